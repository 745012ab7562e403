#include "ngm/inference.hpp"

#include <algorithm>
#include <cmath>

#include "ngm/error.hpp"

namespace ngm {

void InferenceQuery::validate(const FeatureSchema& schema) const {
  require(settings.tolerance > 0.0, "inference: tolerance must be positive");
  require(settings.max_iterations >= 1, "inference: max_iterations must be >= 1");
  require(settings.step_size > 0.0, "inference: step size must be positive");
  for (const auto& [name, value] : known) {
    const int f = schema.index_of(name);
    const Feature& feat = schema.features[f];
    if (feat.is_numeric())
      require(std::holds_alternative<double>(value), "inference: feature '", name,
              "' expects a numeric value");
    else
      feat.category_index(std::get<std::string>(value));  // throws on unknown label
  }
  for (const auto& t : targets) {
    schema.index_of(t);
    require(known.find(t) == known.end(), "inference: feature '", t,
            "' is both known and a target");
  }
}

Eigen::VectorXd unknown_init_block(const NgmModel& model, int feature) {
  const Feature& f = model.schema.features[feature];
  if (model.input_encoding == NgmModel::InputEncoding::Binned) {
    if (f.is_numeric()) {
      // marginal mean of the bin indicators == empirical bin histogram
      require(!f.marginal.empty(), "feature '", f.name, "' lacks a marginal histogram");
      Eigen::VectorXd b(f.binned_width());
      for (int k = 0; k < b.size(); ++k) b(k) = f.marginal[k];
      return b;
    }
    return Eigen::VectorXd::Constant(f.encoded_width(),
                                     1.0 / static_cast<double>(f.encoded_width()));
  }
  if (f.is_numeric()) {
    Eigen::VectorXd b(1);
    b(0) = 0.0;  // standardized marginal mean
    return b;
  }
  return Eigen::VectorXd::Constant(f.encoded_width(),
                                   1.0 / static_cast<double>(f.encoded_width()));
}

namespace {

// Encoded input block for a known value, in the model's input encoding.
Eigen::VectorXd known_input_block(const NgmModel& model, int feature, double std_value,
                                  int category) {
  const Feature& f = model.schema.features[feature];
  if (f.is_numeric()) {
    if (model.input_encoding == NgmModel::InputEncoding::Binned) {
      Eigen::VectorXd b = Eigen::VectorXd::Zero(f.binned_width());
      b(f.bin_index(std_value)) = 1.0;
      return b;
    }
    Eigen::VectorXd b(1);
    b(0) = std_value;
    return b;
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(f.encoded_width());
  b(category) = 1.0;
  return b;
}

// Output-space target block for a known value (used in the inference loss).
Eigen::VectorXd known_target_block(const NgmModel& model, int feature, double std_value,
                                   int category) {
  const Feature& f = model.schema.features[feature];
  if (f.is_numeric()) {
    Eigen::VectorXd b(1);
    b(0) = std_value;
    return b;
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(f.encoded_width());
  b(category) = 1.0;
  return b;
}

struct EncodedQuery {
  BatchInferenceProblem problem;          // single row
  std::vector<int> target_features;
  std::vector<char> is_known;
};

double standardize_value(const Feature& f, double raw, ValueSpace space) {
  if (space == ValueSpace::Standardized || !f.scaled) return raw;
  return (raw - f.mean) / f.stddev;
}

double unstandardize_value(const Feature& f, double std_v, ValueSpace space) {
  if (space == ValueSpace::Standardized || !f.scaled) return std_v;
  return std_v * f.stddev + f.mean;
}

EncodedQuery encode_query(const NgmModel& model, const InferenceQuery& query) {
  query.validate(model.schema);
  const auto in_off = model.input_offsets();
  const auto out_off = model.output_offsets();
  const auto in_w = model.input_widths();
  const auto out_w = model.output_widths();
  const int D = model.schema.feature_count();
  const int Din = model.params.input_dim();
  const int Dout = model.params.output_dim();

  EncodedQuery eq;
  eq.problem.inputs0 = Eigen::MatrixXd::Zero(1, Din);
  eq.problem.free_mask = Eigen::MatrixXd::Zero(1, Din);
  eq.problem.targets = Eigen::MatrixXd::Zero(1, Dout);
  eq.problem.target_mask = Eigen::MatrixXd::Zero(1, Dout);
  eq.problem.settings = query.settings;
  eq.is_known.assign(D, 0);

  for (const auto& [name, value] : query.known) {
    const int f = model.schema.index_of(name);
    const Feature& feat = model.schema.features[f];
    eq.is_known[f] = 1;
    double std_v = 0.0;
    int cat = 0;
    if (feat.is_numeric())
      std_v = standardize_value(feat, std::get<double>(value), query.space);
    else
      cat = feat.category_index(std::get<std::string>(value));
    eq.problem.inputs0.block(0, in_off[f], 1, in_w[f]) =
        known_input_block(model, f, std_v, cat).transpose();
    eq.problem.targets.block(0, out_off[f], 1, out_w[f]) =
        known_target_block(model, f, std_v, cat).transpose();
    eq.problem.target_mask.block(0, out_off[f], 1, out_w[f]).setOnes();
  }
  for (int f = 0; f < D; ++f) {
    if (eq.is_known[f]) continue;
    eq.problem.inputs0.block(0, in_off[f], 1, in_w[f]) =
        unknown_init_block(model, f).transpose();
    eq.problem.free_mask.block(0, in_off[f], 1, in_w[f]).setOnes();
  }
  for (const auto& t : query.targets) eq.target_features.push_back(model.schema.index_of(t));
  return eq;
}

void fill_assignment(const NgmModel& model, const InferenceQuery& query,
                     const Eigen::MatrixXd& inputs, InferenceResult& res) {
  const auto out_off = model.output_offsets();
  const auto out_w = model.output_widths();
  res.outputs = mlp_forward(model.params, Eigen::MatrixXd(inputs)).row(0).transpose();
  for (const auto& name : query.targets) {
    const int f = model.schema.index_of(name);
    const Feature& feat = model.schema.features[f];
    const Eigen::MatrixXd ro =
        readout_with_feature_at_init(model, inputs, f, unknown_init_block(model, f));
    if (feat.is_numeric()) {
      const double std_v = ro(0, out_off[f]);
      res.assignment[name] = unstandardize_value(feat, std_v, query.space);
    } else {
      int arg = 0;
      ro.block(0, out_off[f], 1, out_w[f]).row(0).maxCoeff(&arg);
      res.assignment[name] = feat.categories[arg];
    }
  }
}

}  // namespace

BatchInferenceResult batched_gradient_inference(const MlpParams& net,
                                                const BatchInferenceProblem& p) {
  const int N = static_cast<int>(p.inputs0.rows());
  require(p.free_mask.rows() == N && p.targets.rows() == N && p.target_mask.rows() == N,
          "batched inference: row count mismatch");
  require(p.inputs0.cols() == net.input_dim(), "batched inference: input width mismatch");
  require(p.targets.cols() == net.output_dim(), "batched inference: target width mismatch");

  BatchInferenceResult res;
  res.best_inputs = p.inputs0;
  res.best_loss = Eigen::VectorXd::Constant(N, std::numeric_limits<double>::infinity());
  res.converged.assign(N, 0);

  Eigen::MatrixXd x = p.inputs0;
  AdamConfig ac;
  ac.step_size = p.settings.step_size;
  MatrixAdam adam(x.rows(), x.cols(), ac);
  const bool nothing_free = p.free_mask.sum() == 0.0;

  int it = 0;
  for (; it < p.settings.max_iterations; ++it) {
    ad::Tape tape;
    MlpVars vars;
    for (int l = 0; l < net.layer_count(); ++l) {
      vars.weights.push_back(tape.constant(net.weights[l]));  // frozen
      vars.biases.push_back(tape.constant(net.biases[l]));
    }
    const ad::Var xv = tape.input(x);
    const ad::Var pred = mlp_forward_tape(tape, vars, xv, net);
    const ad::Var row_loss = tape.row_sqnorm_masked(pred, p.targets, p.target_mask);
    const Eigen::MatrixXd& rl = tape.value(row_loss);
    require(rl.allFinite(), "inference loss became non-finite");
    if (it == 0) res.initial_loss = rl.col(0);
    bool all_done = true;
    for (int r = 0; r < N; ++r) {
      if (rl(r, 0) < res.best_loss(r)) {
        res.best_loss(r) = rl(r, 0);
        res.best_inputs.row(r) = x.row(r);
      }
      if (res.best_loss(r) <= p.settings.tolerance) res.converged[r] = 1;
      else all_done = false;
    }
    if (all_done || nothing_free) {
      ++it;
      break;
    }
    const ad::Var total = tape.sum(row_loss);
    tape.backward(total);
    Eigen::MatrixXd g = tape.grad(xv).cwiseProduct(p.free_mask);
    adam.step(x, g);
    // re-clamp known entries
    x = x.cwiseProduct(p.free_mask) + p.inputs0.cwiseProduct(
        Eigen::MatrixXd::Ones(x.rows(), x.cols()) - p.free_mask);
  }
  res.iterations = it;
  return res;
}

Eigen::MatrixXd readout_with_feature_at_init(const NgmModel& model,
                                             const Eigen::MatrixXd& inputs, int feature,
                                             const Eigen::VectorXd& init_block) {
  const auto in_off = model.input_offsets();
  const auto in_w = model.input_widths();
  Eigen::MatrixXd x = inputs;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    x.block(r, in_off[feature], 1, in_w[feature]) = init_block.transpose();
  return mlp_forward(model.params, x);
}

InferenceResult gradient_map(const NgmModel& model, const InferenceQuery& query) {
  EncodedQuery eq = encode_query(model, query);
  InferenceResult res;
  if (query.targets.empty()) {
    // fully specified query: nothing to optimize
    res.inputs = eq.problem.inputs0.row(0).transpose();
    const Eigen::MatrixXd out = mlp_forward(model.params, eq.problem.inputs0);
    res.outputs = out.row(0).transpose();
    res.final_loss = ((out - eq.problem.targets).cwiseProduct(eq.problem.target_mask))
                         .squaredNorm();
    res.initial_loss = res.final_loss;
    res.converged = true;
    return res;
  }
  const BatchInferenceResult bres = batched_gradient_inference(model.params, eq.problem);
  res.inputs = bres.best_inputs.row(0).transpose();
  res.initial_loss = bres.initial_loss(0);
  res.final_loss = bres.best_loss(0);
  res.converged = bres.converged[0] != 0;
  res.iterations = bres.iterations;
  if (!res.converged)
    res.warnings.push_back(cat("gradient inference stopped after ", bres.iterations,
                               " iterations with loss ", res.final_loss));
  fill_assignment(model, query, bres.best_inputs, res);
  return res;
}

InferenceResult message_passing(const NgmModel& model, const InferenceQuery& query) {
  require(model.params.input_dim() == model.params.output_dim() &&
              model.input_encoding == NgmModel::InputEncoding::Standard,
          "message_passing: needs matching input/output encodings");
  EncodedQuery eq = encode_query(model, query);
  InferenceResult res;
  Eigen::MatrixXd x = eq.problem.inputs0;
  const Eigen::MatrixXd& free = eq.problem.free_mask;
  const Eigen::MatrixXd clamp = eq.problem.inputs0;
  bool converged = query.targets.empty();
  int it = 0;
  for (; it < query.settings.max_iterations && !converged; ++it) {
    const Eigen::MatrixXd out = mlp_forward(model.params, x);
    require(out.allFinite(), "message passing produced non-finite values");
    Eigen::MatrixXd next =
        out.cwiseProduct(free) +
        clamp.cwiseProduct(Eigen::MatrixXd::Ones(x.rows(), x.cols()) - free);
    const double delta = (next - x).squaredNorm();
    x = next;
    if (delta <= query.settings.tolerance) {
      converged = true;
      ++it;
      break;
    }
  }
  res.inputs = x.row(0).transpose();
  res.converged = converged;
  res.iterations = it;
  if (!converged)
    res.warnings.push_back(cat("message passing did not converge within ",
                               query.settings.max_iterations, " iterations"));
  const Eigen::MatrixXd out = mlp_forward(model.params, x);
  res.final_loss =
      ((out - eq.problem.targets).cwiseProduct(eq.problem.target_mask)).squaredNorm();
  // message passing's assignment is the fixed-point iterate itself
  const auto in_off = model.input_offsets();
  const auto in_w = model.input_widths();
  res.outputs = out.row(0).transpose();
  for (const auto& name : query.targets) {
    const int f = model.schema.index_of(name);
    const Feature& feat = model.schema.features[f];
    if (feat.is_numeric()) {
      res.assignment[name] = unstandardize_value(feat, x(0, in_off[f]), query.space);
    } else {
      int arg = 0;
      x.block(0, in_off[f], 1, in_w[f]).row(0).maxCoeff(&arg);
      res.assignment[name] = feat.categories[arg];
    }
  }
  return res;
}

void ConditionalDistribution::validate() const {
  require(probabilities.size() > 0, "conditional distribution: empty support");
  require(probabilities.minCoeff() > 0.0, "conditional distribution: zero probability");
  require(std::abs(probabilities.sum() - 1.0) <= 1e-9,
          "conditional distribution: probabilities sum to ", probabilities.sum());
}

ConditionalDistribution conditional_distribution(const NgmModel& model,
                                                 const InferenceQuery& query,
                                                 const std::string& target,
                                                 double eps_clip) {
  require(eps_clip > 0.0 && eps_clip < 1.0, "eps_clip must lie in (0,1)");
  const int f = model.schema.index_of(target);
  const Feature& feat = model.schema.features[f];
  InferenceQuery q = query;
  if (std::find(q.targets.begin(), q.targets.end(), target) == q.targets.end())
    q.targets.push_back(target);

  ConditionalDistribution dist;
  dist.feature = target;
  Eigen::VectorXd scores;
  if (feat.is_numeric()) {
    require(model.input_encoding == NgmModel::InputEncoding::Binned,
            "conditional_distribution: numeric target '", target,
            "' needs the binned model variant");
    EncodedQuery eq = encode_query(model, q);
    const BatchInferenceResult bres = batched_gradient_inference(model.params, eq.problem);
    const auto in_off = model.input_offsets();
    scores = bres.best_inputs.block(0, in_off[f], 1, feat.binned_width()).row(0).transpose();
    for (int k = 0; k + 1 < static_cast<int>(feat.bin_edges.size()); ++k) {
      const double lo_std = feat.bin_edges[k], hi_std = feat.bin_edges[k + 1];
      const double lo = feat.scaled ? lo_std * feat.stddev + feat.mean : lo_std;
      const double hi = feat.scaled ? hi_std * feat.stddev + feat.mean : hi_std;
      dist.intervals.push_back({lo, hi});
      dist.support.push_back(cat("bin", k));
    }
  } else {
    EncodedQuery eq = encode_query(model, q);
    const BatchInferenceResult bres = batched_gradient_inference(model.params, eq.problem);
    const Eigen::MatrixXd ro =
        readout_with_feature_at_init(model, bres.best_inputs, f, unknown_init_block(model, f));
    const auto out_off = model.output_offsets();
    scores = ro.block(0, out_off[f], 1, feat.encoded_width()).row(0).transpose();
    dist.support = feat.categories;
  }
  scores = scores.cwiseMax(eps_clip).cwiseMin(1.0);
  dist.probabilities = scores / scores.sum();
  dist.validate();
  return dist;
}

NgmModel train_binned_variant(const Dataset& standardized,
                              const DependencyMask& feature_mask, const TrainConfig& cfg) {
  cfg.validate();
  const FeatureSchema& schema = standardized.schema();
  for (const auto& f : schema.features)
    if (f.is_numeric())
      require(!f.bin_edges.empty(), "train_binned_variant: feature '", f.name,
              "' has no bin edges (standardize the dataset first)");
  const auto row_widths = schema.binned_widths();
  const auto col_widths = schema.encoded_widths();
  const DependencyMask unit_mask = expand_mask(feature_mask, row_widths, col_widths);

  const Eigen::MatrixXd X = standardized.encode_binned();
  const Eigen::MatrixXd Y = standardized.encode_targets();

  Rng rng(cfg.seed, 110);
  std::vector<int> dims{static_cast<int>(X.cols())};
  const int H = cfg.resolve_hidden(static_cast<int>(Y.cols()));
  for (int l = 0; l < cfg.layers - 1; ++l) dims.push_back(H);
  dims.push_back(static_cast<int>(Y.cols()));
  MlpParams initial = init_mlp(dims, cfg.activation, cfg.linear_output, rng);

  PenaltySpec pen;
  pen.name = "structure";
  pen.first_layer = 0;
  pen.last_layer = initial.layer_count();
  pen.complement =
      penalty_complement(feature_mask, row_widths, col_widths, cfg.penalize_self_paths);

  TrainOutcome outcome = train_network(X, Y, std::move(initial), {pen}, cfg);
  NgmModel m;
  m.params = std::move(outcome.params);
  m.mask = unit_mask;
  m.schema = schema;
  m.input_encoding = NgmModel::InputEncoding::Binned;
  m.lambda_trace = std::move(outcome.lambda_trace);
  m.diag = std::move(outcome.diag);
  m.config = cfg;
  m.diag.masked_ratio_final = masked_path_ratio(m);
  return m;
}

NgmModel train_binned_variant(const Dataset& standardized, const DependencyGraph& g,
                              const TrainConfig& cfg) {
  require(g.node_count() == standardized.feature_count(),
          "train_binned_variant: graph and dataset have different feature counts");
  return train_binned_variant(standardized, dependency_mask(g), cfg);
}

}  // namespace ngm
