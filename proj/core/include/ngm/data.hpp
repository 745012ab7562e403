#ifndef NGM_DATA_HPP
#define NGM_DATA_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ngm {

enum class FeatureType { Continuous, Categorical, Ordinal };

// A raw cell value: number for continuous/ordinal columns, label otherwise.
using Cell = std::variant<double, std::string>;

struct Feature {
  std::string name;
  FeatureType type = FeatureType::Continuous;

  // continuous/ordinal scaling (valid once standardized)
  double mean = 0.0;
  double stddev = 1.0;
  bool scaled = false;
  bool constant = false;

  std::vector<std::string> categories;  // categorical only

  // standardized-space equal-width bin edges (size bins+1), continuous only
  std::vector<double> bin_edges;
  // empirical marginal: per-category or per-bin relative frequencies
  std::vector<double> marginal;

  bool is_numeric() const { return type != FeatureType::Categorical; }
  // width in the standard one-hot encoding (1 or |categories|)
  int encoded_width() const;
  // width in the binned encoding (bin count or |categories|)
  int binned_width() const;
  int category_index(const std::string& label) const;  // throws on unknown
  int bin_index(double standardized_value) const;      // clamped at the edges
};

struct FeatureSchema {
  std::vector<Feature> features;

  int feature_count() const { return static_cast<int>(features.size()); }
  int index_of(const std::string& name) const;
  std::vector<std::string> names() const;
  std::vector<int> encoded_widths() const;
  std::vector<int> binned_widths() const;
  int encoded_width() const;
  int binned_width() const;
  void validate() const;
};

std::string schema_to_json(const FeatureSchema& s);
FeatureSchema schema_from_json(const std::string& json_text);
FeatureSchema schema_from_json_file(const std::string& path);
void write_schema_json(const FeatureSchema& s, const std::string& path);

// Column-major typed table. Immutable after construction.
class Dataset {
 public:
  Dataset(FeatureSchema schema, std::vector<std::vector<double>> numeric_columns,
          std::vector<std::vector<int>> categorical_columns);

  // Parses a header CSV. Without a schema, numeric columns become continuous
  // and everything else categorical with lexicographically sorted categories.
  // Ragged rows, unparseable cells and missing values are rejected.
  static Dataset load_csv(const std::string& path,
                          const std::optional<FeatureSchema>& schema = {});

  const FeatureSchema& schema() const { return schema_; }
  int row_count() const { return rows_; }
  int feature_count() const { return schema_.feature_count(); }

  double numeric_at(int row, int feature) const;
  int category_at(int row, int feature) const;
  Cell cell(int row, int feature) const;

  // Zero-mean unit-variance continuous columns (constant columns are flagged
  // and left unscaled); fills bin edges (standardized space) and empirical
  // marginals into the returned dataset's schema.
  Dataset standardize(int bins = 20) const;

  // One-hot expanded matrix view (continuous as-is, categorical one-hot).
  Eigen::MatrixXd encode() const;
  // Binned view: numeric columns as bin one-hots, categorical as one-hots.
  Eigen::MatrixXd encode_binned() const;
  // Numeric targets un-binned (numeric value, categorical one-hot) — the
  // regression target for binned-input models.
  Eigen::MatrixXd encode_targets() const;

  // Relative-frequency histogram over categories or schema bins.
  std::vector<double> empirical_marginal(int feature) const;

  // Inverse of standardize() for a single value.
  double unscale(int feature, double standardized) const;

  void write_csv(const std::string& path) const;

 private:
  FeatureSchema schema_;
  std::vector<std::vector<double>> numeric_;      // per numeric feature
  std::vector<std::vector<int>> categorical_;     // per categorical feature
  std::vector<int> storage_index_;                // feature -> column in its pool
  int rows_ = 0;
};

// Builds a dataset from a dense numeric matrix (all continuous).
Dataset dataset_from_matrix(const Eigen::MatrixXd& x,
                            const std::vector<std::string>& names);

}  // namespace ngm

#endif  // NGM_DATA_HPP
