#ifndef NGM_LEARNING_HPP
#define NGM_LEARNING_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ngm/data.hpp"
#include "ngm/graph.hpp"
#include "ngm/mlp.hpp"

namespace ngm {

enum class NormKind { L1, L2 };
NormKind norm_from_string(const std::string& s);
std::string to_string(NormKind n);

// Lagrange multiplier schedule for the structure term.
//   fixed:    constant user value
//   adaptive: lambda_0 from the masked raw path product, refreshed after every
//             optimizer step (annealing as the constraint is satisfied)
//   mixed:    fixed for the first `fixed_fraction` of the epochs, then
//             adaptive at `lr_adaptive_scale` times the learning rate
struct LambdaMode {
  enum class Kind { Fixed, Adaptive, Mixed };
  Kind kind = Kind::Adaptive;
  double value = 1.0;          // fixed / mixed first phase
  double fixed_fraction = 0.5; // mixed only

  static LambdaMode parse(const std::string& text);
  std::string to_text() const;
};

struct TrainConfig {
  int hidden = 0;         // hidden layer width; 0 resolves to 2x input units
  double hidden_multiplier = 2.0;
  int layers = 2;         // number of weight layers (layers-1 hidden layers)
  int epochs_init = 100;  // E1, proximal initialization
  int epochs = 400;       // E2, constrained fit
  int batch = 128;
  LambdaMode lambda_mode;
  NormKind structure_norm = NormKind::L2;
  double eps_log = 1e-12;
  std::uint64_t seed = 0;
  double validation_split = 0.1;
  double learning_rate = 1e-3;
  double lr_adaptive_scale = 0.2;  // mixed mode second phase
  double input_noise = 0.0;        // Gaussian jitter std on training inputs
  bool penalize_self_paths = true;
  Activation activation = Activation::Tanh;
  bool linear_output = true;
  int bins = 20;     // binned-variant resolution
  int threads = 1;

  int resolve_hidden(int input_units) const;
  void validate() const;
};

struct TrainDiagnostics {
  double regression_at_init = 0.0;   // random init, before any training
  double regression_after_prox = 0.0;
  double regression_final = 0.0;
  double structure_final = 0.0;      // core penalty term value
  double masked_ratio_final = 0.0;   // ||S_nn * S^c||_1 / ||S_nn||_1 (official S^c)
  std::vector<double> validation_trace;
  double train_seconds = 0.0;
};

// A trained neural view. `params` holds every layer end to end; for generic
// (projection) models the first `encoder_layers` and last `decoder_layers`
// are the projection wrappers and the core is the range in between.
struct NgmModel {
  enum class InputEncoding { Standard, Binned };

  MlpParams params;
  int encoder_layers = 0;
  int decoder_layers = 0;
  DependencyMask mask;                      // unit-level core mask (unit diagonal)
  std::optional<DependencyMask> mask_enc;   // unit-level encoder mask
  std::optional<DependencyMask> mask_dec;
  FeatureSchema schema;
  InputEncoding input_encoding = InputEncoding::Standard;
  std::vector<double> lambda_trace;
  TrainDiagnostics diag;
  TrainConfig config;

  int core_first() const { return encoder_layers; }
  int core_last() const { return params.layer_count() - decoder_layers; }
  // offsets of each feature block in the model input / output vector
  std::vector<int> input_offsets() const;
  std::vector<int> output_offsets() const;
  std::vector<int> input_widths() const;
  std::vector<int> output_widths() const;
};

// Main model plus its optional binned-input companion (needed for continuous
// conditional distributions and sampling).
struct ModelBundle {
  NgmModel main;
  std::optional<NgmModel> binned;
};

// Mean squared reconstruction error per sample and output unit.
double regression_loss(const MlpParams& p, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets);

// log(eps_log + || path(p, normalized) * s_complement ||_norm)
double structure_penalty(const MlpParams& p, const Eigen::MatrixXd& s_complement,
                         NormKind norm, double eps_log);

// Squared l2 norm of the masked raw-weight path product (adaptive lambda rule).
double lambda_init(const MlpParams& p, const Eigen::MatrixXd& s_complement);
double lambda_init(const MlpParams& p, const Eigen::MatrixXd& s_complement, int first,
                   int last);

// E1 epochs of unconstrained regression from a fresh fan-in init.
MlpParams proximal_init(const Eigen::MatrixXd& x, const DependencyMask& expanded_mask,
                        const TrainConfig& cfg);

// Full Alg.-1 pipeline on a standardized dataset.
NgmModel fit_ngm(const Dataset& standardized, const DependencyGraph& g,
                 const TrainConfig& cfg);
// Same on a pre-encoded design matrix with a feature-level mask.
NgmModel fit_ngm(const Eigen::MatrixXd& x, const DependencyMask& feature_mask,
                 const FeatureSchema& schema, const TrainConfig& cfg);

// ||S_nn * S^c||_1 / ||S_nn||_1 over the core layers (official complement,
// i.e. the unit diagonal is allowed).
double masked_path_ratio(const NgmModel& model);
// Same ratio for the end-to-end path (encoder + core + decoder) against the
// feature-block expanded mask; equals masked_path_ratio for plain models.
double end_to_end_masked_ratio(const NgmModel& model);

// --- shared trainer (also used by projections and the binned variant) -----

struct PenaltySpec {
  std::string name;            // "structure", "encoder", "decoder" (error messages)
  int first_layer = 0;
  int last_layer = 0;          // exclusive
  Eigen::MatrixXd complement;  // unit-level, self blocks already added if wanted
};

struct TrainOutcome {
  MlpParams params;
  std::vector<double> lambda_trace;
  TrainDiagnostics diag;
};

TrainOutcome train_network(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                           MlpParams initial, const std::vector<PenaltySpec>& penalties,
                           const TrainConfig& cfg, bool run_fit_phase = true);

// Unit-level penalty complement for a feature-level mask: complement of the
// expanded mask, plus the diagonal feature blocks when penalize_self is set.
Eigen::MatrixXd penalty_complement(const DependencyMask& feature_mask,
                                   const std::vector<int>& row_widths,
                                   const std::vector<int>& col_widths,
                                   bool penalize_self);

}  // namespace ngm

#endif  // NGM_LEARNING_HPP
