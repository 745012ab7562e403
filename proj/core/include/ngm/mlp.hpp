#ifndef NGM_MLP_HPP
#define NGM_MLP_HPP

#include <Eigen/Dense>
#include <vector>

#include "ngm/ad.hpp"
#include "ngm/rng.hpp"

namespace ngm {

enum class Activation { ReLU, Tanh };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Dense multilayer perceptron parameters. W_l is (out x in); biases match.
// The nonlinearity is applied after every layer; `linear_output` drops it on
// the last layer so standardized (signed) targets are reachable.
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::Tanh;
  bool linear_output = true;
  // Per-layer override: apply the nonlinearity after layer l? Empty means the
  // default rule (after every layer, except the last when linear_output).
  // Generic models use this to keep encoder/decoder layers purely affine.
  std::vector<char> activate_after;

  int layer_count() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  bool activated(int layer) const;
  void validate() const;  // dimension chain, finite entries
};

// Uniform fan-in init: entries ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)).
MlpParams init_mlp(const std::vector<int>& dims, Activation act, bool linear_output,
                   Rng& rng);

// Batch forward; rows of x are samples.
Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& x);
Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x);

// Path-dependency matrix: product of per-layer |W_l|, oriented input x output
// (entry [i,o] is the absolute path mass from input unit i to output unit o).
// With `normalize`, each W_l is scaled to unit Frobenius norm first.
// Entry [i,o] == 0 implies output o is unaffected by input i.
Eigen::MatrixXd path_dependency(const MlpParams& p, bool normalize);
// Restricted to a layer range [first, last).
Eigen::MatrixXd path_dependency(const MlpParams& p, bool normalize, int first, int last);

// --- tape bindings -------------------------------------------------------

struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

MlpVars bind_mlp(ad::Tape& tape, const MlpParams& p);
ad::Var mlp_forward_tape(ad::Tape& tape, const MlpVars& vars, ad::Var x,
                         const MlpParams& p);
// Path product over layers [first, last) on the tape.
ad::Var path_tape(ad::Tape& tape, const MlpVars& vars, bool normalize, int first,
                  int last);

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Pulls d(loss)/d(params) off a tape after backward(). Missing grads are zero.
MlpGrads collect_grads(const ad::Tape& tape, const MlpVars& vars, const MlpParams& p);

// --- Adam ----------------------------------------------------------------

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators shaped like the parameters.
struct OptimizerState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long step_count = 0;
  AdamConfig config;

  static OptimizerState for_params(const MlpParams& p, AdamConfig cfg);
};

// Standard bias-corrected Adam update, in place.
void adam_step(MlpParams& p, const MlpGrads& g, OptimizerState& st);

// Matrix-shaped Adam for learnable input tensors (inference).
struct MatrixAdam {
  Eigen::MatrixXd m, v;
  long step_count = 0;
  AdamConfig config;

  explicit MatrixAdam(Eigen::Index rows, Eigen::Index cols, AdamConfig cfg);
  void step(Eigen::MatrixXd& x, const Eigen::MatrixXd& grad);
};

}  // namespace ngm

#endif  // NGM_MLP_HPP
