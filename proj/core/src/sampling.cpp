#include "ngm/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "ngm/error.hpp"

namespace ngm {

void SamplerConfig::validate() const {
  require(count >= 1, "sampler: count must be >= 1");
  require(eps_clip > 0.0 && eps_clip < 1.0, "sampler: eps_clip must lie in (0,1)");
  require(inference.max_iterations >= 1, "sampler: max iterations must be >= 1");
}

namespace {

// State of one batched sampling pass over the model used for conditionals.
struct BatchState {
  const NgmModel* model = nullptr;
  std::vector<int> in_off, in_w, out_off, out_w;
  Eigen::MatrixXd inputs;       // N x D_in (knowns encoded, unknowns at init)
  Eigen::MatrixXd free_mask;    // N x D_in
  Eigen::MatrixXd targets;      // N x D_out
  Eigen::MatrixXd target_mask;  // N x D_out
  std::vector<double> std_values;  // N*D standardized numeric values / category ids
  std::vector<char> fixed;         // N*D

  int N = 0, D = 0;

  void init(const NgmModel& m, int n) {
    model = &m;
    N = n;
    D = m.schema.feature_count();
    in_off = m.input_offsets();
    in_w = m.input_widths();
    out_off = m.output_offsets();
    out_w = m.output_widths();
    inputs.resize(N, m.params.input_dim());
    free_mask = Eigen::MatrixXd::Zero(N, m.params.input_dim());
    targets = Eigen::MatrixXd::Zero(N, m.params.output_dim());
    target_mask = Eigen::MatrixXd::Zero(N, m.params.output_dim());
    std_values.assign(static_cast<std::size_t>(N) * D, 0.0);
    fixed.assign(static_cast<std::size_t>(N) * D, 0);
    for (int f = 0; f < D; ++f) {
      const Eigen::VectorXd init = unknown_init_block(m, f);
      for (int r = 0; r < N; ++r) {
        inputs.block(r, in_off[f], 1, in_w[f]) = init.transpose();
        free_mask.block(r, in_off[f], 1, in_w[f]).setOnes();
      }
    }
  }

  // Fix feature f of row r to a standardized numeric value or category index.
  void fix(int r, int f, double std_value, int category) {
    const Feature& feat = model->schema.features[f];
    fixed[static_cast<std::size_t>(r) * D + f] = 1;
    std_values[static_cast<std::size_t>(r) * D + f] =
        feat.is_numeric() ? std_value : static_cast<double>(category);
    // input encoding
    if (feat.is_numeric()) {
      if (model->input_encoding == NgmModel::InputEncoding::Binned) {
        Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(feat.binned_width());
        b(feat.bin_index(std_value)) = 1.0;
        inputs.block(r, in_off[f], 1, in_w[f]) = b;
      } else {
        inputs(r, in_off[f]) = std_value;
      }
      targets(r, out_off[f]) = std_value;
      target_mask(r, out_off[f]) = 1.0;
    } else {
      Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(feat.encoded_width());
      b(category) = 1.0;
      inputs.block(r, in_off[f], 1, in_w[f]) = b;
      targets.block(r, out_off[f], 1, out_w[f]) = b;
      target_mask.block(r, out_off[f], 1, out_w[f]).setOnes();
    }
    free_mask.block(r, in_off[f], 1, in_w[f]).setZero();
  }

  bool is_fixed(int r, int f) const {
    return fixed[static_cast<std::size_t>(r) * D + f] != 0;
  }
};

// Draw a value for feature f of row r from clip-normalized scores.
double draw_numeric(const Feature& feat, const Eigen::VectorXd& scores, double eps_clip,
                    Rng& rng) {
  std::vector<double> p(scores.size());
  for (int k = 0; k < scores.size(); ++k)
    p[k] = std::clamp(scores(k), eps_clip, 1.0);
  const int bin = rng.discrete(p);
  return rng.uniform(feat.bin_edges[bin], feat.bin_edges[bin + 1]);
}

int draw_categorical(const Eigen::VectorXd& scores, double eps_clip, Rng& rng) {
  std::vector<double> p(scores.size());
  for (int k = 0; k < scores.size(); ++k)
    p[k] = std::clamp(scores(k), eps_clip, 1.0);
  return rng.discrete(p);
}

double marginal_draw_numeric(const Feature& feat, Rng& rng) {
  require(!feat.marginal.empty(), "feature '", feat.name, "' has no marginal histogram");
  const int bin = rng.discrete(feat.marginal);
  return rng.uniform(feat.bin_edges[bin], feat.bin_edges[bin + 1]);
}

int marginal_draw_categorical(const Feature& feat, Rng& rng) {
  require(!feat.marginal.empty(), "feature '", feat.name, "' has no marginal frequencies");
  return rng.discrete(feat.marginal);
}

const NgmModel& sampling_model(const ModelBundle& bundle) {
  bool has_numeric = false;
  for (const auto& f : bundle.main.schema.features)
    if (f.is_numeric()) has_numeric = true;
  if (!has_numeric) return bundle.main;
  require(bundle.binned.has_value(),
          "sampling continuous features needs the binned model variant");
  return *bundle.binned;
}

}  // namespace

SampleBatchResult sample_batch(const ModelBundle& bundle, const DependencyGraph& graph,
                               const SamplerConfig& cfg) {
  cfg.validate();
  const NgmModel& model = sampling_model(bundle);
  const FeatureSchema& schema = model.schema;
  const int D = schema.feature_count();
  const int N = cfg.count;
  require(graph.node_count() == D, "sample_batch: graph does not match the schema");
  for (int i = 0; i < D; ++i)
    require(graph.nodes()[i] == schema.features[i].name,
            "sample_batch: graph node order mismatch at ", i);

  // orderings
  const bool topological_mode = cfg.ordering == SamplerConfig::Ordering::Topological;
  std::vector<int> topo;
  DependencyGraph undirected = graph.has_directed_edges() ? graph.moralized() : graph;
  if (topological_mode) topo = topological_order(graph);

  Rng master(cfg.seed, 7);
  std::vector<Rng> streams;
  streams.reserve(N);
  for (int r = 0; r < N; ++r) streams.push_back(master.substream(r));

  std::vector<std::vector<int>> orderings(N);
  for (int r = 0; r < N; ++r) {
    if (topological_mode) {
      orderings[r] = topo;
      (void)streams[r].next_u64();  // keep stream layout identical across modes
    } else {
      const int start = static_cast<int>(streams[r].below(D));
      orderings[r] = bfs_order(undirected, start);
    }
  }

  BatchState state;
  state.init(model, N);

  // presets fix features for every row before sampling starts
  std::vector<char> preset_feature(D, 0);
  for (const auto& [name, value] : cfg.preset) {
    const int f = schema.index_of(name);
    const Feature& feat = schema.features[f];
    preset_feature[f] = 1;
    for (int r = 0; r < N; ++r) {
      if (feat.is_numeric()) {
        const double raw = std::get<double>(value);
        const double std_v = feat.scaled ? (raw - feat.mean) / feat.stddev : raw;
        state.fix(r, f, std_v, 0);
      } else {
        state.fix(r, f, 0.0, feat.category_index(std::get<std::string>(value)));
      }
    }
  }
  const bool have_presets = !cfg.preset.empty();

  SampleBatchResult result;
  int convergence_warnings = 0;

  for (int depth = 0; depth < D; ++depth) {
    // rows that still need their depth-th feature
    std::vector<int> pending;
    for (int r = 0; r < N; ++r) {
      const int f = orderings[r][depth];
      if (!state.is_fixed(r, f)) pending.push_back(r);
    }
    if (pending.empty()) continue;

    const bool first_free = !have_presets && depth == 0;
    if (!first_free) {
      // one shared conditional-inference pass for the whole batch
      BatchInferenceProblem prob;
      prob.inputs0 = state.inputs;
      prob.free_mask = state.free_mask;
      prob.targets = state.targets;
      prob.target_mask = state.target_mask;
      prob.settings = cfg.inference;
      const BatchInferenceResult bres = batched_gradient_inference(model.params, prob);
      for (char c : bres.converged)
        if (!c) ++convergence_warnings;
      // draw pending features from their conditional scores
      Eigen::MatrixXd outputs;  // lazy: only needed for categorical targets
      bool outputs_ready = false;
      for (int r : pending) {
        const int f = orderings[r][depth];
        const Feature& feat = schema.features[f];
        if (feat.is_numeric()) {
          const Eigen::VectorXd scores =
              bres.best_inputs.block(r, state.in_off[f], 1, state.in_w[f]).row(0)
                  .transpose();
          const double v = draw_numeric(feat, scores, cfg.eps_clip, streams[r]);
          state.fix(r, f, v, 0);
        } else {
          if (!outputs_ready) {
            outputs = mlp_forward(model.params, bres.best_inputs);
            outputs_ready = true;
          }
          const Eigen::VectorXd scores =
              outputs.block(r, state.out_off[f], 1, state.out_w[f]).row(0).transpose();
          state.fix(r, f, 0.0, draw_categorical(scores, cfg.eps_clip, streams[r]));
        }
      }
    } else {
      // first feature of each chain comes from its empirical marginal
      for (int r : pending) {
        const int f = orderings[r][depth];
        const Feature& feat = schema.features[f];
        if (feat.is_numeric()) state.fix(r, f, marginal_draw_numeric(feat, streams[r]), 0);
        else state.fix(r, f, 0.0, marginal_draw_categorical(feat, streams[r]));
      }
    }
  }

  if (convergence_warnings > 0)
    result.warnings.push_back(cat(convergence_warnings,
                                  " conditional inference passes hit the iteration cap"));

  // assemble the raw-space dataset
  std::vector<std::vector<double>> numeric;
  std::vector<std::vector<int>> categorical;
  FeatureSchema out_schema;
  for (int f = 0; f < D; ++f) {
    Feature feat = schema.features[f];
    const Feature& src = schema.features[f];
    if (feat.is_numeric()) {
      feat.scaled = false;  // output holds raw values
      feat.mean = 0.0;
      feat.stddev = 1.0;
      feat.bin_edges.clear();
      feat.marginal.clear();
      std::vector<double> col(N);
      for (int r = 0; r < N; ++r) {
        const double std_v = state.std_values[static_cast<std::size_t>(r) * D + f];
        col[r] = src.scaled ? std_v * src.stddev + src.mean : std_v;
      }
      numeric.push_back(std::move(col));
    } else {
      feat.marginal.clear();
      std::vector<int> col(N);
      for (int r = 0; r < N; ++r)
        col[r] = static_cast<int>(state.std_values[static_cast<std::size_t>(r) * D + f]);
      categorical.push_back(std::move(col));
    }
    out_schema.features.push_back(std::move(feat));
  }
  result.samples = Dataset(std::move(out_schema), std::move(numeric), std::move(categorical));
  return result;
}

Eigen::VectorXd get_sample(const ModelBundle& bundle, const std::vector<int>& ordering,
                           const SamplerConfig& cfg, Rng& rng) {
  const NgmModel& model = sampling_model(bundle);
  const FeatureSchema& schema = model.schema;
  const int D = schema.feature_count();
  require(static_cast<int>(ordering.size()) == D, "get_sample: ordering size mismatch");
  std::vector<char> seen(D, 0);
  for (int f : ordering) {
    require(f >= 0 && f < D, "get_sample: ordering entry out of range");
    require(!seen[f], "get_sample: ordering repeats feature ", f);
    seen[f] = 1;
  }

  BatchState state;
  state.init(model, 1);
  for (int depth = 0; depth < D; ++depth) {
    const int f = ordering[depth];
    const Feature& feat = schema.features[f];
    if (depth == 0) {
      if (feat.is_numeric()) state.fix(0, f, marginal_draw_numeric(feat, rng), 0);
      else state.fix(0, f, 0.0, marginal_draw_categorical(feat, rng));
      continue;
    }
    BatchInferenceProblem prob;
    prob.inputs0 = state.inputs;
    prob.free_mask = state.free_mask;
    prob.targets = state.targets;
    prob.target_mask = state.target_mask;
    prob.settings = cfg.inference;
    const BatchInferenceResult bres = batched_gradient_inference(model.params, prob);
    if (feat.is_numeric()) {
      const Eigen::VectorXd scores =
          bres.best_inputs.block(0, state.in_off[f], 1, state.in_w[f]).row(0).transpose();
      state.fix(0, f, draw_numeric(feat, scores, cfg.eps_clip, rng), 0);
    } else {
      const Eigen::MatrixXd out = mlp_forward(model.params, bres.best_inputs);
      const Eigen::VectorXd scores =
          out.block(0, state.out_off[f], 1, state.out_w[f]).row(0).transpose();
      state.fix(0, f, 0.0, draw_categorical(scores, cfg.eps_clip, rng));
    }
  }
  Eigen::VectorXd row(D);
  for (int f = 0; f < D; ++f) {
    const Feature& feat = schema.features[f];
    const double v = state.std_values[f];
    row(f) = feat.is_numeric() && feat.scaled ? v * feat.stddev + feat.mean : v;
  }
  return row;
}

}  // namespace ngm
