#ifndef NGM_PROJECTIONS_HPP
#define NGM_PROJECTIONS_HPP

#include "ngm/learning.hpp"

namespace ngm {

// Encoder/decoder wiring for mixed-type and embedding inputs. Each feature's
// raw block maps to its own embedding block (block-diagonal connectivity),
// enforced with the same soft-graph penalty as the core.
struct ProjectionSpec {
  std::vector<int> input_widths;    // raw block width per feature
  std::vector<int> encoder_widths;  // embedding width per feature
  std::vector<int> output_widths;   // decoder output width per feature
  DependencyMask s_enc;             // unit-level, input -> embedding
  DependencyMask s_dec;             // unit-level, core output -> raw output

  void validate() const;
};

// Default wiring from a schema: embedding width = raw one-hot width, both
// projection masks block-diagonal.
ProjectionSpec build_projection(const FeatureSchema& schema);

// Eq.-4 training: single-affine encoder and decoder wrapped around the core
// MLP, with soft-graph penalties on all three connection patterns. The
// encoder/decoder multipliers follow the same schedule rule as the core one.
NgmModel fit_ngm_generic(const Dataset& standardized, const DependencyGraph& g,
                         const ProjectionSpec& spec, const TrainConfig& cfg);
NgmModel fit_ngm_generic(const Eigen::MatrixXd& x, const DependencyMask& feature_mask,
                         const FeatureSchema& schema, const ProjectionSpec& spec,
                         const TrainConfig& cfg);

}  // namespace ngm

#endif  // NGM_PROJECTIONS_HPP
