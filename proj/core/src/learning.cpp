#include "ngm/learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ngm/error.hpp"

namespace ngm {

NormKind norm_from_string(const std::string& s) {
  if (s == "l1") return NormKind::L1;
  if (s == "l2") return NormKind::L2;
  fail("unknown structure norm '", s, "' (expected l1|l2)");
}

std::string to_string(NormKind n) { return n == NormKind::L1 ? "l1" : "l2"; }

LambdaMode LambdaMode::parse(const std::string& text) {
  LambdaMode m;
  if (text == "adaptive") {
    m.kind = Kind::Adaptive;
    return m;
  }
  if (text.rfind("fixed:", 0) == 0) {
    m.kind = Kind::Fixed;
    try {
      m.value = std::stod(text.substr(6));
    } catch (...) {
      fail("bad lambda mode '", text, "'");
    }
    return m;
  }
  if (text.rfind("mixed:", 0) == 0) {
    m.kind = Kind::Mixed;
    const std::string rest = text.substr(6);
    const auto colon = rest.find(':');
    try {
      m.value = std::stod(rest.substr(0, colon));
      if (colon != std::string::npos) m.fixed_fraction = std::stod(rest.substr(colon + 1));
    } catch (...) {
      fail("bad lambda mode '", text, "'");
    }
    require(m.fixed_fraction > 0.0 && m.fixed_fraction < 1.0,
            "mixed lambda fraction must be in (0,1)");
    return m;
  }
  fail("unknown lambda mode '", text, "' (expected fixed:V, adaptive or mixed:V:FRAC)");
}

std::string LambdaMode::to_text() const {
  switch (kind) {
    case Kind::Fixed:
      return cat("fixed:", value);
    case Kind::Adaptive:
      return "adaptive";
    case Kind::Mixed:
      return cat("mixed:", value, ":", fixed_fraction);
  }
  return "adaptive";
}

int TrainConfig::resolve_hidden(int input_units) const {
  if (hidden > 0) return hidden;
  return std::max(1, static_cast<int>(std::lround(hidden_multiplier * input_units)));
}

void TrainConfig::validate() const {
  require(hidden >= 0, "config: hidden must be >= 0");
  require(layers >= 1, "config: need at least one layer");
  require(epochs_init >= 1 && epochs >= 1, "config: E1 and E2 must be >= 1");
  require(batch >= 1, "config: batch must be >= 1");
  if (lambda_mode.kind != LambdaMode::Kind::Adaptive)
    require(lambda_mode.value >= 1e-2 && lambda_mode.value <= 1e2,
            "config: fixed lambda must lie in [1e-2, 1e2]");
  require(eps_log > 0.0, "config: eps_log must be positive");
  require(validation_split >= 0.0 && validation_split < 1.0,
          "config: validation split must be in [0,1)");
  require(learning_rate > 0.0, "config: learning rate must be positive");
  require(input_noise >= 0.0, "config: input noise must be >= 0");
  require(bins >= 2, "config: bins must be >= 2");
  require(threads >= 1, "config: threads must be >= 1");
}

std::vector<int> NgmModel::input_widths() const {
  return input_encoding == InputEncoding::Binned ? schema.binned_widths()
                                                 : schema.encoded_widths();
}

std::vector<int> NgmModel::output_widths() const { return schema.encoded_widths(); }

static std::vector<int> offsets_of(const std::vector<int>& widths) {
  std::vector<int> off(widths.size());
  int c = 0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    off[i] = c;
    c += widths[i];
  }
  return off;
}

std::vector<int> NgmModel::input_offsets() const { return offsets_of(input_widths()); }
std::vector<int> NgmModel::output_offsets() const { return offsets_of(output_widths()); }

double regression_loss(const MlpParams& p, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets) {
  require(inputs.allFinite() && targets.allFinite(), "regression_loss: non-finite input");
  const Eigen::MatrixXd out = mlp_forward(p, inputs);
  return (out - targets).squaredNorm() /
         static_cast<double>(targets.rows() * targets.cols());
}

static double norm_value(const Eigen::MatrixXd& masked, NormKind norm) {
  // path entries are nonnegative, so the l1 norm is a plain sum
  return norm == NormKind::L1 ? masked.sum() : masked.norm();
}

double structure_penalty(const MlpParams& p, const Eigen::MatrixXd& s_complement,
                         NormKind norm, double eps_log) {
  const Eigen::MatrixXd path = path_dependency(p, /*normalize=*/true);
  require(path.rows() == s_complement.rows() && path.cols() == s_complement.cols(),
          "structure_penalty: complement shape ", s_complement.rows(), "x",
          s_complement.cols(), " does not match path ", path.rows(), "x", path.cols());
  return std::log(eps_log + norm_value(path.cwiseProduct(s_complement), norm));
}

double lambda_init(const MlpParams& p, const Eigen::MatrixXd& s_complement) {
  return lambda_init(p, s_complement, 0, p.layer_count());
}

double lambda_init(const MlpParams& p, const Eigen::MatrixXd& s_complement, int first,
                   int last) {
  const Eigen::MatrixXd path = path_dependency(p, /*normalize=*/false, first, last);
  return path.cwiseProduct(s_complement).squaredNorm();
}

Eigen::MatrixXd penalty_complement(const DependencyMask& feature_mask,
                                   const std::vector<int>& row_widths,
                                   const std::vector<int>& col_widths,
                                   bool penalize_self) {
  const DependencyMask expanded = expand_mask(feature_mask, row_widths, col_widths);
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(expanded.rows(), expanded.cols()) -
                      expanded.matrix;
  if (penalize_self) {
    require(feature_mask.rows() == feature_mask.cols(),
            "penalty_complement: self blocks need a square feature mask");
    int r0 = 0;
    for (int i = 0; i < feature_mask.rows(); ++i) {
      int c0 = 0;
      for (int j = 0; j < i; ++j) c0 += col_widths[j];
      c.block(r0, c0, row_widths[i], col_widths[i]).setOnes();
      r0 += row_widths[i];
    }
  }
  return c;
}

namespace {

struct PenaltyState {
  PenaltySpec spec;
  double lambda = 0.0;
  double lambda_retain = 0.0;
  bool adaptive_now = false;
};

double penalty_value(const MlpParams& p, const PenaltySpec& spec, NormKind norm,
                     double eps_log) {
  const Eigen::MatrixXd path =
      path_dependency(p, /*normalize=*/true, spec.first_layer, spec.last_layer);
  return std::log(eps_log + norm_value(path.cwiseProduct(spec.complement), norm));
}

}  // namespace

TrainOutcome train_network(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                           MlpParams initial, const std::vector<PenaltySpec>& penalties,
                           const TrainConfig& cfg, bool run_fit_phase) {
  cfg.validate();
  initial.validate();
  require(inputs.rows() == targets.rows(), "train_network: row count mismatch");
  require(inputs.cols() == initial.input_dim(), "train_network: input width mismatch");
  require(targets.cols() == initial.output_dim(), "train_network: target width mismatch");
  for (const auto& pen : penalties) {
    require(pen.first_layer >= 0 && pen.last_layer <= initial.layer_count() &&
                pen.first_layer < pen.last_layer,
            "train_network: bad penalty layer range for ", pen.name);
  }
  const auto t_start = std::chrono::steady_clock::now();
  const int M = static_cast<int>(inputs.rows());

  // deterministic row split: tail of a seeded permutation is validation
  Rng split_rng(cfg.seed, 101);
  const auto perm = split_rng.permutation(M);
  const int n_val = static_cast<int>(std::floor(cfg.validation_split * M));
  const int n_train = M - n_val;
  require(n_train >= 1, "train_network: validation split leaves no training rows");
  Eigen::MatrixXd Xtr(n_train, inputs.cols()), Ytr(n_train, targets.cols());
  Eigen::MatrixXd Xval(std::max(n_val, 1), inputs.cols()),
      Yval(std::max(n_val, 1), targets.cols());
  for (int i = 0; i < n_train; ++i) {
    Xtr.row(i) = inputs.row(perm[i]);
    Ytr.row(i) = targets.row(perm[i]);
  }
  if (n_val == 0) {  // fall back to the training rows for retention
    Xval = Xtr;
    Yval = Ytr;
  } else {
    for (int i = 0; i < n_val; ++i) {
      Xval.row(i) = inputs.row(perm[n_train + i]);
      Yval.row(i) = targets.row(perm[n_train + i]);
    }
  }

  MlpParams params = std::move(initial);
  TrainOutcome out;
  out.diag.regression_at_init = regression_loss(params, Xtr, Ytr);

  Rng shuffle_rng(cfg.seed, 102);
  Rng noise_rng(cfg.seed, 103);

  auto run_batch = [&](const Eigen::MatrixXd& xb, const Eigen::MatrixXd& yb,
                       std::vector<PenaltyState>& pens, bool with_penalties,
                       OptimizerState& opt) {
    ad::Tape tape;
    const MlpVars vars = bind_mlp(tape, params);
    Eigen::MatrixXd xin = xb;
    if (cfg.input_noise > 0.0) {
      for (Eigen::Index i = 0; i < xin.rows(); ++i)
        for (Eigen::Index j = 0; j < xin.cols(); ++j)
          xin(i, j) += cfg.input_noise * noise_rng.normal();
    }
    const ad::Var x = tape.constant(std::move(xin));
    const ad::Var pred =
        mlp_forward_tape(tape, vars, x, params);
    const double denom = static_cast<double>(yb.rows() * yb.cols());
    ad::Var loss = tape.scale(
        tape.sum(tape.row_sqnorm_masked(pred, yb, Eigen::MatrixXd::Ones(yb.rows(), yb.cols()))),
        1.0 / denom);
    require(std::isfinite(tape.value(loss)(0, 0)),
            "regression loss became non-finite; reduce the step size");
    if (with_penalties) {
      for (auto& pen : pens) {
        ad::Var path = path_tape(tape, vars, /*normalize=*/true, pen.spec.first_layer,
                                 pen.spec.last_layer);
        ad::Var masked = tape.hadamard(path, pen.spec.complement);
        ad::Var nv = cfg.structure_norm == NormKind::L1
                         ? tape.sum(masked)
                         : tape.sqrt_scalar(tape.sum_squares(masked));
        ad::Var term = tape.log_guarded(nv, cfg.eps_log);
        require(std::isfinite(tape.value(term)(0, 0)), pen.spec.name,
                " penalty became non-finite; reduce the step size");
        loss = tape.add(loss, tape.scale(term, pen.lambda));
      }
    }
    tape.backward(loss);
    adam_step(params, collect_grads(tape, vars, params), opt);
    if (with_penalties) {
      for (auto& pen : pens) {
        if (pen.adaptive_now)
          pen.lambda = lambda_init(params, pen.spec.complement, pen.spec.first_layer,
                                   pen.spec.last_layer);
      }
    }
  };

  auto run_epoch = [&](std::vector<PenaltyState>& pens, bool with_penalties,
                       OptimizerState& opt) {
    const auto order = shuffle_rng.permutation(n_train);
    for (int s = 0; s < n_train; s += cfg.batch) {
      const int bs = std::min(cfg.batch, n_train - s);
      Eigen::MatrixXd xb(bs, Xtr.cols()), yb(bs, Ytr.cols());
      for (int i = 0; i < bs; ++i) {
        xb.row(i) = Xtr.row(order[s + i]);
        yb.row(i) = Ytr.row(order[s + i]);
      }
      run_batch(xb, yb, pens, with_penalties, opt);
    }
  };

  // --- proximal initialization: regression only --------------------------
  {
    AdamConfig ac;
    ac.step_size = cfg.learning_rate;
    OptimizerState opt = OptimizerState::for_params(params, ac);
    std::vector<PenaltyState> none;
    for (int e = 0; e < cfg.epochs_init; ++e) run_epoch(none, false, opt);
  }
  out.diag.regression_after_prox = regression_loss(params, Xtr, Ytr);

  if (!run_fit_phase) {
    out.diag.regression_final = out.diag.regression_after_prox;
    out.diag.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    out.params = std::move(params);
    return out;
  }

  // --- constrained fit ----------------------------------------------------
  std::vector<PenaltyState> pens;
  for (const auto& spec : penalties) {
    PenaltyState ps;
    ps.spec = spec;
    switch (cfg.lambda_mode.kind) {
      case LambdaMode::Kind::Fixed:
        ps.lambda = cfg.lambda_mode.value;
        break;
      case LambdaMode::Kind::Mixed:
        ps.lambda = cfg.lambda_mode.value;
        break;
      case LambdaMode::Kind::Adaptive: {
        ps.lambda = lambda_init(params, spec.complement, spec.first_layer, spec.last_layer);
        if (ps.lambda < 1e-8) ps.lambda = 1.0;  // degenerate complement fallback
        ps.adaptive_now = true;
        break;
      }
    }
    ps.lambda_retain = std::clamp(ps.lambda, 1e-2, 1e2);
    pens.push_back(std::move(ps));
  }

  const int fixed_epochs =
      cfg.lambda_mode.kind == LambdaMode::Kind::Mixed
          ? std::clamp(static_cast<int>(std::lround(cfg.lambda_mode.fixed_fraction *
                                                    cfg.epochs)),
                       1, cfg.epochs - 1)
          : (cfg.lambda_mode.kind == LambdaMode::Kind::Fixed ? cfg.epochs : 0);

  auto validation_score = [&]() {
    double j = regression_loss(params, Xval, Yval);
    for (const auto& pen : pens)
      j += pen.lambda_retain *
           penalty_value(params, pen.spec, cfg.structure_norm, cfg.eps_log);
    return j;
  };

  if (!pens.empty()) out.lambda_trace.push_back(pens.front().lambda);
  MlpParams best_params = params;
  double best_score = validation_score();
  out.diag.validation_trace.push_back(best_score);

  AdamConfig ac;
  ac.step_size = cfg.learning_rate;
  OptimizerState opt = OptimizerState::for_params(params, ac);
  for (int e = 0; e < cfg.epochs; ++e) {
    if (cfg.lambda_mode.kind == LambdaMode::Kind::Mixed && e == fixed_epochs) {
      // switch to the annealing phase: adaptive lambda, smaller steps
      for (auto& pen : pens) {
        pen.adaptive_now = true;
        pen.lambda = lambda_init(params, pen.spec.complement, pen.spec.first_layer,
                                 pen.spec.last_layer);
      }
      ac.step_size = cfg.learning_rate * cfg.lr_adaptive_scale;
      opt = OptimizerState::for_params(params, ac);
    }
    run_epoch(pens, true, opt);
    if (!pens.empty()) out.lambda_trace.push_back(pens.front().lambda);
    const double score = validation_score();
    out.diag.validation_trace.push_back(score);
    if (score < best_score) {
      best_score = score;
      best_params = params;
    }
  }
  params = best_params;

  out.diag.regression_final = regression_loss(params, Xtr, Ytr);
  if (!pens.empty())
    out.diag.structure_final =
        penalty_value(params, pens.front().spec, cfg.structure_norm, cfg.eps_log);
  out.diag.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  out.params = std::move(params);
  return out;
}

MlpParams proximal_init(const Eigen::MatrixXd& x, const DependencyMask& expanded_mask,
                        const TrainConfig& cfg) {
  cfg.validate();
  require(expanded_mask.rows() == x.cols(), "proximal_init: mask does not match data");
  Rng rng(cfg.seed, 100);
  std::vector<int> dims{static_cast<int>(x.cols())};
  const int H = cfg.resolve_hidden(static_cast<int>(x.cols()));
  for (int l = 0; l < cfg.layers - 1; ++l) dims.push_back(H);
  dims.push_back(static_cast<int>(expanded_mask.cols()));
  MlpParams initial = init_mlp(dims, cfg.activation, cfg.linear_output, rng);
  return train_network(x, x, std::move(initial), {}, cfg, /*run_fit_phase=*/false).params;
}

static NgmModel assemble_model(TrainOutcome outcome, DependencyMask unit_mask,
                               FeatureSchema schema, NgmModel::InputEncoding enc,
                               const TrainConfig& cfg) {
  NgmModel m;
  m.params = std::move(outcome.params);
  m.mask = std::move(unit_mask);
  m.schema = std::move(schema);
  m.input_encoding = enc;
  m.lambda_trace = std::move(outcome.lambda_trace);
  m.diag = std::move(outcome.diag);
  m.config = cfg;
  m.diag.masked_ratio_final = masked_path_ratio(m);
  return m;
}

NgmModel fit_ngm(const Eigen::MatrixXd& x, const DependencyMask& feature_mask,
                 const FeatureSchema& schema, const TrainConfig& cfg) {
  cfg.validate();
  feature_mask.validate();
  const auto widths = schema.encoded_widths();
  const DependencyMask unit_mask = expand_mask(feature_mask, widths, widths);
  require(unit_mask.rows() == x.cols(), "fit_ngm: encoded data width ", x.cols(),
          " does not match expanded mask ", unit_mask.rows());

  Rng rng(cfg.seed, 100);
  std::vector<int> dims{static_cast<int>(x.cols())};
  const int H = cfg.resolve_hidden(static_cast<int>(x.cols()));
  for (int l = 0; l < cfg.layers - 1; ++l) dims.push_back(H);
  dims.push_back(static_cast<int>(x.cols()));
  MlpParams initial = init_mlp(dims, cfg.activation, cfg.linear_output, rng);

  PenaltySpec pen;
  pen.name = "structure";
  pen.first_layer = 0;
  pen.last_layer = initial.layer_count();
  pen.complement = penalty_complement(feature_mask, widths, widths, cfg.penalize_self_paths);

  TrainOutcome outcome = train_network(x, x, std::move(initial), {pen}, cfg);
  return assemble_model(std::move(outcome), unit_mask, schema,
                        NgmModel::InputEncoding::Standard, cfg);
}

NgmModel fit_ngm(const Dataset& standardized, const DependencyGraph& g,
                 const TrainConfig& cfg) {
  require(g.node_count() == standardized.feature_count(),
          "fit_ngm: graph and dataset have different feature counts");
  DependencyMask fm = dependency_mask(g);
  // align mask order with the schema order
  const auto names = standardized.schema().names();
  for (int i = 0; i < g.node_count(); ++i)
    require(fm.row_labels[i] == names[i], "fit_ngm: graph node order mismatch at ", i);
  return fit_ngm(standardized.encode(), fm, standardized.schema(), cfg);
}

double masked_path_ratio(const NgmModel& model) {
  const Eigen::MatrixXd path = path_dependency(model.params, /*normalize=*/true,
                                               model.core_first(), model.core_last());
  const Eigen::MatrixXd sc =
      Eigen::MatrixXd::Ones(model.mask.rows(), model.mask.cols()) - model.mask.matrix;
  const double total = path.sum();
  if (total <= 0.0) return 0.0;
  return path.cwiseProduct(sc).sum() / total;
}

double end_to_end_masked_ratio(const NgmModel& model) {
  if (model.encoder_layers == 0 && model.decoder_layers == 0)
    return masked_path_ratio(model);
  const Eigen::MatrixXd path = path_dependency(model.params, /*normalize=*/true);
  // feature-block mask between raw inputs and raw outputs
  DependencyMask fm;
  const int d = model.schema.feature_count();
  fm.matrix = Eigen::MatrixXd::Identity(d, d);
  // recover the feature-level mask from the core unit mask block pattern
  const auto in_w = model.input_widths();
  const auto out_w = model.output_widths();
  std::vector<int> in_off = model.input_offsets(), out_off = model.output_offsets();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      fm.matrix(i, j) = model.mask.matrix(in_off[i], out_off[j]);
  fm.row_labels = model.schema.names();
  fm.col_labels = model.schema.names();
  const DependencyMask expanded = expand_mask(fm, in_w, out_w);
  const Eigen::MatrixXd sc =
      Eigen::MatrixXd::Ones(expanded.rows(), expanded.cols()) - expanded.matrix;
  const double total = path.sum();
  if (total <= 0.0) return 0.0;
  return path.cwiseProduct(sc).sum() / total;
}

}  // namespace ngm
