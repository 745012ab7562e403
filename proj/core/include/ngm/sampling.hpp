#ifndef NGM_SAMPLING_HPP
#define NGM_SAMPLING_HPP

#include <map>
#include <string>
#include <vector>

#include "ngm/inference.hpp"

namespace ngm {

struct SamplerConfig {
  int count = 1;
  enum class Ordering { BfsRandomStart, Topological } ordering = Ordering::BfsRandomStart;
  std::uint64_t seed = 0;
  std::map<std::string, Cell> preset;  // raw-space values fixed for every sample
  InferenceSettings inference{/*max_iterations=*/200, /*tolerance=*/1e-6,
                              /*step_size=*/5e-2};
  double eps_clip = 1e-4;

  void validate() const;
};

struct SampleBatchResult {
  Dataset samples;                  // raw-space values
  std::vector<std::string> warnings;
};

// Forward-style sampling: per sample, pick an ordering (BFS from a random
// start for undirected graphs, the fixed topological order for DAGs), draw the
// first free feature from its empirical marginal, then repeatedly run
// conditional inference on everything fixed so far and draw the next feature
// from the clip-normalized conditional. Inference passes are shared across
// the whole batch at each conditioning depth. Continuous draws go through the
// binned companion model (uniform inside the selected bin).
SampleBatchResult sample_batch(const ModelBundle& bundle, const DependencyGraph& graph,
                               const SamplerConfig& cfg);

// Single sample along an explicit feature ordering.
Eigen::VectorXd get_sample(const ModelBundle& bundle, const std::vector<int>& ordering,
                           const SamplerConfig& cfg, Rng& rng);

}  // namespace ngm

#endif  // NGM_SAMPLING_HPP
