#ifndef NGM_INFERENCE_HPP
#define NGM_INFERENCE_HPP

#include <map>
#include <string>
#include <vector>

#include "ngm/learning.hpp"

namespace ngm {

struct InferenceSettings {
  int max_iterations = 2000;
  double tolerance = 1e-6;   // stop when the (per-row) loss falls below this
  double step_size = 1e-2;   // Adam step on the learnable inputs
};

// Values may be given in raw units (default, rescaled via the schema) or
// directly in the model's standardized space.
enum class ValueSpace { Raw, Standardized };

struct InferenceQuery {
  std::map<std::string, Cell> known;
  std::vector<std::string> targets;
  InferenceSettings settings;
  ValueSpace space = ValueSpace::Raw;

  void validate(const FeatureSchema& schema) const;  // disjoint, known features
};

struct InferenceResult {
  std::map<std::string, Cell> assignment;  // targets only, in query's space
  Eigen::VectorXd inputs;    // best-loss encoded input iterate (knowns untouched)
  Eigen::VectorXd outputs;   // readout outputs at the best iterate
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

// Alg.-2 gradient MAP: freeze weights, run Adam on the unknown input entries
// against || f(X)[K] - X[K] ||^2, keep the best iterate. The per-target
// readout is the model output with that target's own input block held at its
// initialization (the self path carries no information about an unobserved
// feature).
InferenceResult gradient_map(const NgmModel& model, const InferenceQuery& query);

// Alg.-2 message passing: X[U] <- f(X)[U] with knowns re-clamped, stopping on
// ||X_t - X_{t-1}||^2 <= tolerance. Non-convergence sets a warning, not an
// error. Requires matching input/output encodings (not binned models).
InferenceResult message_passing(const NgmModel& model, const InferenceQuery& query);

struct ConditionalDistribution {
  std::string feature;
  std::vector<std::string> support;                  // category labels or bin names
  std::vector<std::pair<double, double>> intervals;  // raw-space bin bounds (numeric)
  Eigen::VectorXd probabilities;                     // clipped, normalized

  void validate() const;  // strictly positive, sums to 1 within 1e-9
};

// Categorical targets read the one-hot output block of `model` after gradient
// inference; numeric targets need a binned-input model and read the optimized
// input bin scores. Both are clipped to [eps_clip, 1] and normalized.
ConditionalDistribution conditional_distribution(const NgmModel& model,
                                                 const InferenceQuery& query,
                                                 const std::string& target,
                                                 double eps_clip = 1e-4);

// Binned-input companion model: numeric inputs split into bin indicator
// nodes (inheriting the feature's mask row), outputs left numeric.
NgmModel train_binned_variant(const Dataset& standardized, const DependencyGraph& g,
                              const TrainConfig& cfg);
NgmModel train_binned_variant(const Dataset& standardized,
                              const DependencyMask& feature_mask, const TrainConfig& cfg);

// --- batched engine (shared with sampling and dependency curves) ----------

struct BatchInferenceProblem {
  Eigen::MatrixXd inputs0;      // N x D_in initial (knowns encoded, unknowns at init)
  Eigen::MatrixXd free_mask;    // N x D_in, 1 on learnable entries
  Eigen::MatrixXd targets;      // N x D_out values for known outputs
  Eigen::MatrixXd target_mask;  // N x D_out, 1 where the loss applies
  InferenceSettings settings;
};

struct BatchInferenceResult {
  Eigen::MatrixXd best_inputs;
  Eigen::VectorXd best_loss;
  Eigen::VectorXd initial_loss;
  std::vector<char> converged;
  int iterations = 0;
};

BatchInferenceResult batched_gradient_inference(const MlpParams& net,
                                                const BatchInferenceProblem& problem);

// Model outputs per row with `feature`'s input block reset to `init_block`
// (the self-free readout used for assignments and curves).
Eigen::MatrixXd readout_with_feature_at_init(const NgmModel& model,
                                             const Eigen::MatrixXd& inputs, int feature,
                                             const Eigen::VectorXd& init_block);

// Initialization block for an unknown feature in the model's input encoding:
// marginal mean for numeric inputs, the marginal bin histogram for binned
// inputs, uniform simplex for categorical blocks.
Eigen::VectorXd unknown_init_block(const NgmModel& model, int feature);

}  // namespace ngm

#endif  // NGM_INFERENCE_HPP
