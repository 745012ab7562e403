#include "ngm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ngm/error.hpp"

namespace ngm {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

int Feature::encoded_width() const {
  return type == FeatureType::Categorical ? static_cast<int>(categories.size()) : 1;
}

int Feature::binned_width() const {
  if (type == FeatureType::Categorical) return static_cast<int>(categories.size());
  require(bin_edges.size() >= 2, "feature '", name, "' has no bin edges");
  return static_cast<int>(bin_edges.size()) - 1;
}

int Feature::category_index(const std::string& label) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == label) return static_cast<int>(i);
  fail("feature '", name, "': unknown category '", label, "'");
}

int Feature::bin_index(double v) const {
  require(bin_edges.size() >= 2, "feature '", name, "' has no bin edges");
  const int m = static_cast<int>(bin_edges.size()) - 1;
  if (v <= bin_edges.front()) return 0;
  if (v >= bin_edges.back()) return m - 1;
  int lo = 0, hi = m - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (v >= bin_edges[mid]) lo = mid;
    else hi = mid - 1;
  }
  return lo;
}

int FeatureSchema::index_of(const std::string& name) const {
  for (int i = 0; i < feature_count(); ++i)
    if (features[i].name == name) return i;
  fail("schema: unknown feature '", name, "'");
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

std::vector<int> FeatureSchema::encoded_widths() const {
  std::vector<int> out;
  for (const auto& f : features) out.push_back(f.encoded_width());
  return out;
}

std::vector<int> FeatureSchema::binned_widths() const {
  std::vector<int> out;
  for (const auto& f : features) out.push_back(f.binned_width());
  return out;
}

int FeatureSchema::encoded_width() const {
  int w = 0;
  for (const auto& f : features) w += f.encoded_width();
  return w;
}

int FeatureSchema::binned_width() const {
  int w = 0;
  for (const auto& f : features) w += f.binned_width();
  return w;
}

void FeatureSchema::validate() const {
  std::set<std::string> seen;
  for (const auto& f : features) {
    require(!f.name.empty(), "schema: empty feature name");
    require(seen.insert(f.name).second, "schema: duplicate feature '", f.name, "'");
    if (f.type == FeatureType::Categorical) {
      require(!f.categories.empty(), "schema: feature '", f.name, "' has no categories");
      std::set<std::string> cs(f.categories.begin(), f.categories.end());
      require(cs.size() == f.categories.size(), "schema: feature '", f.name,
              "' has duplicate categories");
    }
    if (f.scaled) require(f.stddev > 0.0, "schema: feature '", f.name, "' scaled with stddev <= 0");
    for (std::size_t i = 1; i < f.bin_edges.size(); ++i)
      require(f.bin_edges[i] > f.bin_edges[i - 1], "schema: feature '", f.name,
              "' bin edges not strictly increasing");
  }
}

std::string schema_to_json(const FeatureSchema& s) {
  json out = json::array();
  for (const auto& f : s.features) {
    json j;
    j["name"] = f.name;
    j["type"] = f.type == FeatureType::Categorical ? "categorical"
                : f.type == FeatureType::Ordinal   ? "ordinal"
                                                   : "continuous";
    if (f.type == FeatureType::Categorical) j["categories"] = f.categories;
    if (f.scaled) {
      j["mean"] = f.mean;
      j["std"] = f.stddev;
    }
    if (f.constant) j["constant"] = true;
    if (!f.bin_edges.empty()) j["bin_edges"] = f.bin_edges;
    if (!f.marginal.empty()) j["marginal"] = f.marginal;
    out.push_back(std::move(j));
  }
  return json{{"features", out}}.dump(2);
}

FeatureSchema schema_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail("schema JSON parse error: ", e.what());
  }
  require(j.contains("features") && j["features"].is_array(),
          "schema JSON: missing 'features' array");
  FeatureSchema s;
  for (const auto& jf : j["features"]) {
    Feature f;
    require(jf.contains("name"), "schema JSON: feature without name");
    f.name = jf["name"].get<std::string>();
    const std::string t = jf.value("type", "continuous");
    if (t == "continuous") f.type = FeatureType::Continuous;
    else if (t == "ordinal") f.type = FeatureType::Ordinal;
    else if (t == "categorical") f.type = FeatureType::Categorical;
    else fail("schema JSON: feature '", f.name, "' has unknown type '", t, "'");
    if (jf.contains("categories")) f.categories = jf["categories"].get<std::vector<std::string>>();
    if (jf.contains("mean")) {
      f.mean = jf["mean"].get<double>();
      f.stddev = jf.value("std", 1.0);
      f.scaled = true;
    }
    f.constant = jf.value("constant", false);
    if (jf.contains("bin_edges")) f.bin_edges = jf["bin_edges"].get<std::vector<double>>();
    if (jf.contains("marginal")) f.marginal = jf["marginal"].get<std::vector<double>>();
    s.features.push_back(std::move(f));
  }
  s.validate();
  return s;
}

FeatureSchema schema_from_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open schema file '", path, "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return schema_from_json(ss.str());
}

void write_schema_json(const FeatureSchema& s, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write schema file '", path, "'");
  out << schema_to_json(s) << '\n';
}

Dataset::Dataset(FeatureSchema schema, std::vector<std::vector<double>> numeric_columns,
                 std::vector<std::vector<int>> categorical_columns)
    : schema_(std::move(schema)),
      numeric_(std::move(numeric_columns)),
      categorical_(std::move(categorical_columns)) {
  schema_.validate();
  int nn = 0, nc = 0;
  storage_index_.resize(schema_.feature_count());
  for (int i = 0; i < schema_.feature_count(); ++i)
    storage_index_[i] = schema_.features[i].is_numeric() ? nn++ : nc++;
  require(static_cast<int>(numeric_.size()) == nn, "dataset: numeric column count mismatch");
  require(static_cast<int>(categorical_.size()) == nc,
          "dataset: categorical column count mismatch");
  rows_ = 0;
  if (!numeric_.empty()) rows_ = static_cast<int>(numeric_.front().size());
  else if (!categorical_.empty()) rows_ = static_cast<int>(categorical_.front().size());
  require(rows_ >= 1, "dataset: no rows");
  for (const auto& c : numeric_)
    require(static_cast<int>(c.size()) == rows_, "dataset: ragged numeric column");
  for (const auto& c : categorical_)
    require(static_cast<int>(c.size()) == rows_, "dataset: ragged categorical column");
}

Dataset Dataset::load_csv(const std::string& path,
                          const std::optional<FeatureSchema>& schema_in) {
  std::ifstream in(path);
  require(in.good(), "cannot open data file '", path, "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "data file '", path,
          "' is empty (header row required)");
  std::vector<std::string> names;
  for (auto& h : split_csv_line(line)) {
    names.push_back(trim(h));
    require(!names.back().empty(), "data file '", path, "': empty column name in header");
  }
  const int D = static_cast<int>(names.size());

  std::vector<std::vector<std::string>> raw(D);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    require(static_cast<int>(cells.size()) == D, "data file '", path, "' line ", lineno,
            ": expected ", D, " cells, got ", cells.size());
    for (int j = 0; j < D; ++j) {
      const std::string c = trim(cells[j]);
      require(!c.empty(), "data file '", path, "' line ", lineno, ", column '", names[j],
              "': missing value (imputation is not supported)");
      raw[j].push_back(c);
    }
  }
  require(!raw.empty() && !raw[0].empty(), "data file '", path, "' has no data rows");

  FeatureSchema schema;
  if (schema_in) {
    schema = *schema_in;
    require(schema.feature_count() == D, "schema has ", schema.feature_count(),
            " features but '", path, "' has ", D, " columns");
    for (int j = 0; j < D; ++j)
      require(schema.features[j].name == names[j], "schema/file column mismatch at ", j,
              ": '", schema.features[j].name, "' vs '", names[j], "'");
  } else {
    for (int j = 0; j < D; ++j) {
      Feature f;
      f.name = names[j];
      double tmp;
      bool numeric = true;
      for (const auto& c : raw[j])
        if (!parse_double(c, tmp)) {
          numeric = false;
          break;
        }
      if (numeric) {
        f.type = FeatureType::Continuous;
      } else {
        f.type = FeatureType::Categorical;
        std::set<std::string> cats(raw[j].begin(), raw[j].end());
        f.categories.assign(cats.begin(), cats.end());  // lexicographic
      }
      schema.features.push_back(std::move(f));
    }
  }

  std::vector<std::vector<double>> numeric;
  std::vector<std::vector<int>> categorical;
  for (int j = 0; j < D; ++j) {
    const Feature& f = schema.features[j];
    if (f.is_numeric()) {
      std::vector<double> col;
      col.reserve(raw[j].size());
      for (std::size_t r = 0; r < raw[j].size(); ++r) {
        double v;
        require(parse_double(raw[j][r], v), "data file '", path, "' line ", r + 2,
                ", column '", f.name, "': cannot parse '", raw[j][r], "' as a number");
        col.push_back(v);
      }
      numeric.push_back(std::move(col));
    } else {
      std::vector<int> col;
      col.reserve(raw[j].size());
      for (std::size_t r = 0; r < raw[j].size(); ++r)
        col.push_back(f.category_index(raw[j][r]));
      categorical.push_back(std::move(col));
    }
  }
  return Dataset(std::move(schema), std::move(numeric), std::move(categorical));
}

double Dataset::numeric_at(int row, int feature) const {
  require(schema_.features[feature].is_numeric(), "feature ", feature, " is categorical");
  return numeric_[storage_index_[feature]][row];
}

int Dataset::category_at(int row, int feature) const {
  require(!schema_.features[feature].is_numeric(), "feature ", feature, " is numeric");
  return categorical_[storage_index_[feature]][row];
}

Cell Dataset::cell(int row, int feature) const {
  const Feature& f = schema_.features[feature];
  if (f.is_numeric()) return numeric_at(row, feature);
  return f.categories[category_at(row, feature)];
}

Dataset Dataset::standardize(int bins) const {
  require(bins >= 2, "standardize: need at least 2 bins");
  FeatureSchema schema = schema_;
  std::vector<std::vector<double>> numeric = numeric_;
  for (int j = 0; j < schema.feature_count(); ++j) {
    Feature& f = schema.features[j];
    if (!f.is_numeric()) {
      // categorical marginal: relative category frequencies
      const auto& col = categorical_[storage_index_[j]];
      std::vector<double> freq(f.categories.size(), 0.0);
      for (int v : col) freq[v] += 1.0;
      for (double& p : freq) p /= static_cast<double>(rows_);
      f.marginal = std::move(freq);
      continue;
    }
    auto& col = numeric[storage_index_[j]];
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(rows_);
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    var /= static_cast<double>(rows_);
    const double sd = std::sqrt(var);
    if (sd <= 0.0) {
      f.constant = true;
      f.scaled = false;
    } else {
      f.mean = mean;
      f.stddev = sd;
      f.scaled = true;
      for (double& v : col) v = (v - mean) / sd;
    }
    // equal-width bins over the observed standardized range
    double lo = col[0], hi = col[0];
    for (double v : col) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi <= lo) {  // constant column: synthesize a unit-wide window
      lo -= 0.5;
      hi += 0.5;
    }
    f.bin_edges.resize(bins + 1);
    for (int k = 0; k <= bins; ++k)
      f.bin_edges[k] = lo + (hi - lo) * static_cast<double>(k) / bins;
    std::vector<double> hist(bins, 0.0);
    for (double v : col) hist[f.bin_index(v)] += 1.0;
    for (double& p : hist) p /= static_cast<double>(rows_);
    f.marginal = std::move(hist);
  }
  return Dataset(std::move(schema), std::move(numeric), categorical_);
}

Eigen::MatrixXd Dataset::encode() const {
  const int W = schema_.encoded_width();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, W);
  int c0 = 0;
  for (int j = 0; j < schema_.feature_count(); ++j) {
    const Feature& f = schema_.features[j];
    if (f.is_numeric()) {
      const auto& col = numeric_[storage_index_[j]];
      for (int r = 0; r < rows_; ++r) out(r, c0) = col[r];
      c0 += 1;
    } else {
      const auto& col = categorical_[storage_index_[j]];
      for (int r = 0; r < rows_; ++r) out(r, c0 + col[r]) = 1.0;
      c0 += f.encoded_width();
    }
  }
  return out;
}

Eigen::MatrixXd Dataset::encode_binned() const {
  const int W = schema_.binned_width();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, W);
  int c0 = 0;
  for (int j = 0; j < schema_.feature_count(); ++j) {
    const Feature& f = schema_.features[j];
    if (f.is_numeric()) {
      const auto& col = numeric_[storage_index_[j]];
      for (int r = 0; r < rows_; ++r) out(r, c0 + f.bin_index(col[r])) = 1.0;
    } else {
      const auto& col = categorical_[storage_index_[j]];
      for (int r = 0; r < rows_; ++r) out(r, c0 + col[r]) = 1.0;
    }
    c0 += f.binned_width();
  }
  return out;
}

Eigen::MatrixXd Dataset::encode_targets() const { return encode(); }

std::vector<double> Dataset::empirical_marginal(int feature) const {
  const Feature& f = schema_.features[feature];
  require(!f.marginal.empty(), "feature '", f.name,
          "' has no marginal (standardize the dataset first)");
  return f.marginal;
}

double Dataset::unscale(int feature, double standardized) const {
  const Feature& f = schema_.features[feature];
  require(f.is_numeric(), "unscale: feature is categorical");
  if (!f.scaled) return standardized;
  return standardized * f.stddev + f.mean;
}

void Dataset::write_csv(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "cannot write data file '", path, "'");
  for (int j = 0; j < schema_.feature_count(); ++j)
    out << (j ? "," : "") << schema_.features[j].name;
  out << '\n';
  for (int r = 0; r < rows_; ++r) {
    for (int j = 0; j < schema_.feature_count(); ++j) {
      if (j) out << ',';
      const Feature& f = schema_.features[j];
      if (f.is_numeric()) out << format_double(numeric_[storage_index_[j]][r]);
      else out << f.categories[categorical_[storage_index_[j]][r]];
    }
    out << '\n';
  }
}

Dataset dataset_from_matrix(const Eigen::MatrixXd& x,
                            const std::vector<std::string>& names) {
  require(static_cast<int>(names.size()) == x.cols(),
          "dataset_from_matrix: name count mismatch");
  FeatureSchema schema;
  std::vector<std::vector<double>> cols;
  for (int j = 0; j < x.cols(); ++j) {
    Feature f;
    f.name = names[j];
    f.type = FeatureType::Continuous;
    schema.features.push_back(std::move(f));
    std::vector<double> col(x.rows());
    for (int r = 0; r < x.rows(); ++r) col[r] = x(r, j);
    cols.push_back(std::move(col));
  }
  return Dataset(std::move(schema), std::move(cols), {});
}

}  // namespace ngm
