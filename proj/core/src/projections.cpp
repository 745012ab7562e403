#include "ngm/projections.hpp"

#include "ngm/error.hpp"

namespace ngm {

void ProjectionSpec::validate() const {
  require(!input_widths.empty(), "projection: empty schema");
  require(input_widths.size() == encoder_widths.size() &&
              input_widths.size() == output_widths.size(),
          "projection: width lists disagree");
  for (std::size_t i = 0; i < input_widths.size(); ++i)
    require(input_widths[i] >= 1 && encoder_widths[i] >= 1 && output_widths[i] >= 1,
            "projection: widths must be >= 1");
  s_enc.validate();
  s_dec.validate();
}

ProjectionSpec build_projection(const FeatureSchema& schema) {
  require(schema.feature_count() > 0, "build_projection: empty schema");
  ProjectionSpec spec;
  spec.input_widths = schema.encoded_widths();
  spec.encoder_widths = schema.encoded_widths();  // embedding width = raw width
  spec.output_widths = schema.encoded_widths();

  const int d = schema.feature_count();
  DependencyMask eye;
  eye.matrix = Eigen::MatrixXd::Identity(d, d);
  eye.row_labels = schema.names();
  eye.col_labels = schema.names();
  spec.s_enc = expand_mask(eye, spec.input_widths, spec.encoder_widths);
  spec.s_dec = expand_mask(eye, spec.encoder_widths, spec.output_widths);
  spec.validate();
  return spec;
}

NgmModel fit_ngm_generic(const Eigen::MatrixXd& x, const DependencyMask& feature_mask,
                         const FeatureSchema& schema, const ProjectionSpec& spec,
                         const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  feature_mask.validate();
  require(static_cast<int>(spec.input_widths.size()) == schema.feature_count(),
          "fit_ngm_generic: projection spec does not match the schema");

  int DI = 0, DE = 0, DO = 0;
  for (std::size_t i = 0; i < spec.input_widths.size(); ++i) {
    DI += spec.input_widths[i];
    DE += spec.encoder_widths[i];
    DO += spec.output_widths[i];
  }
  require(x.cols() == DI, "fit_ngm_generic: data width ", x.cols(), " != projection ", DI);
  require(spec.s_enc.rows() == DI && spec.s_enc.cols() == DE,
          "fit_ngm_generic: encoder mask shape mismatch");
  require(spec.s_dec.rows() == DE && spec.s_dec.cols() == DO,
          "fit_ngm_generic: decoder mask shape mismatch");

  // end-to-end stack: encoder affine + core MLP + decoder affine
  Rng rng(cfg.seed, 120);
  const int H = cfg.resolve_hidden(DE);
  std::vector<int> dims{DI, DE};
  for (int l = 0; l < cfg.layers - 1; ++l) dims.push_back(H);
  dims.push_back(DE);
  dims.push_back(DO);
  MlpParams initial = init_mlp(dims, cfg.activation, cfg.linear_output, rng);
  const int L = initial.layer_count();

  const DependencyMask unit_core = expand_mask(feature_mask, spec.encoder_widths,
                                               spec.encoder_widths);

  std::vector<PenaltySpec> pens(3);
  pens[0].name = "structure";
  pens[0].first_layer = 1;
  pens[0].last_layer = L - 1;
  pens[0].complement = penalty_complement(feature_mask, spec.encoder_widths,
                                          spec.encoder_widths, cfg.penalize_self_paths);
  pens[1].name = "encoder";
  pens[1].first_layer = 0;
  pens[1].last_layer = 1;
  pens[1].complement =
      Eigen::MatrixXd::Ones(DI, DE) - spec.s_enc.matrix;
  pens[2].name = "decoder";
  pens[2].first_layer = L - 1;
  pens[2].last_layer = L;
  pens[2].complement =
      Eigen::MatrixXd::Ones(DE, DO) - spec.s_dec.matrix;

  TrainOutcome outcome = train_network(x, x, std::move(initial), pens, cfg);

  NgmModel m;
  m.params = std::move(outcome.params);
  m.encoder_layers = 1;
  m.decoder_layers = 1;
  m.mask = unit_core;
  m.mask_enc = spec.s_enc;
  m.mask_dec = spec.s_dec;
  m.schema = schema;
  m.input_encoding = NgmModel::InputEncoding::Standard;
  m.lambda_trace = std::move(outcome.lambda_trace);
  m.diag = std::move(outcome.diag);
  m.config = cfg;
  m.diag.masked_ratio_final = masked_path_ratio(m);
  return m;
}

NgmModel fit_ngm_generic(const Dataset& standardized, const DependencyGraph& g,
                         const ProjectionSpec& spec, const TrainConfig& cfg) {
  require(g.node_count() == standardized.feature_count(),
          "fit_ngm_generic: graph and dataset have different feature counts");
  DependencyMask fm = dependency_mask(g);
  const auto names = standardized.schema().names();
  for (int i = 0; i < g.node_count(); ++i)
    require(fm.row_labels[i] == names[i], "fit_ngm_generic: node order mismatch at ", i);
  return fit_ngm_generic(standardized.encode(), fm, standardized.schema(), spec, cfg);
}

}  // namespace ngm
