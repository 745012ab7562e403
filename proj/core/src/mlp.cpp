#include "ngm/mlp.hpp"

#include <cmath>

#include "ngm/error.hpp"

namespace ngm {

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  fail("unknown activation '", s, "' (expected relu|tanh)");
}

std::string to_string(Activation a) {
  return a == Activation::ReLU ? "relu" : "tanh";
}

bool MlpParams::activated(int layer) const {
  if (!activate_after.empty()) return activate_after[layer] != 0;
  return layer + 1 < layer_count() || !linear_output;
}

void MlpParams::validate() const {
  require(!weights.empty(), "mlp: no layers");
  require(weights.size() == biases.size(), "mlp: weight/bias layer count mismatch");
  require(activate_after.empty() || activate_after.size() == weights.size(),
          "mlp: activate_after size mismatch");
  for (int l = 0; l < layer_count(); ++l) {
    require(biases[l].size() == weights[l].rows(), "mlp: bias size mismatch at layer ", l);
    if (l + 1 < layer_count())
      require(weights[l + 1].cols() == weights[l].rows(),
              "mlp: dimension chain broken between layers ", l, " and ", l + 1);
    require(weights[l].allFinite() && biases[l].allFinite(),
            "mlp: non-finite parameter at layer ", l);
  }
}

MlpParams init_mlp(const std::vector<int>& dims, Activation act, bool linear_output,
                   Rng& rng) {
  require(dims.size() >= 2, "init_mlp: need at least input and output dims");
  MlpParams p;
  p.activation = act;
  p.linear_output = linear_output;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    require(dims[l] >= 1 && dims[l + 1] >= 1, "init_mlp: dims must be positive");
    const double bound = std::sqrt(1.0 / dims[l]);
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    Eigen::VectorXd b(dims[l + 1]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

namespace {
inline void apply_activation(Eigen::MatrixXd& x, Activation a) {
  if (a == Activation::ReLU)
    x = x.cwiseMax(0.0);
  else
    x = x.array().tanh().matrix();
}
}  // namespace

Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& x) {
  require(x.cols() == p.input_dim(), "mlp_forward: input width ", x.cols(),
          " != expected ", p.input_dim());
  Eigen::MatrixXd h = x;
  for (int l = 0; l < p.layer_count(); ++l) {
    h = (h * p.weights[l].transpose()).eval();
    h.rowwise() += p.biases[l].transpose();
    if (p.activated(l)) apply_activation(h, p.activation);
  }
  return h;
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x) {
  Eigen::MatrixXd row = x.transpose();
  return mlp_forward(p, row).row(0).transpose();
}

Eigen::MatrixXd path_dependency(const MlpParams& p, bool normalize) {
  return path_dependency(p, normalize, 0, p.layer_count());
}

Eigen::MatrixXd path_dependency(const MlpParams& p, bool normalize, int first, int last) {
  require(first >= 0 && last <= p.layer_count() && first < last,
          "path_dependency: bad layer range");
  Eigen::MatrixXd out;
  for (int l = first; l < last; ++l) {
    Eigen::MatrixXd a = p.weights[l];
    if (normalize) {
      const double n = a.norm();
      if (n > 0.0) a /= n;
    }
    a = a.cwiseAbs().transpose().eval();  // (in x out) orientation
    out = (l == first) ? a : Eigen::MatrixXd(out * a);
  }
  return out;
}

MlpVars bind_mlp(ad::Tape& tape, const MlpParams& p) {
  MlpVars v;
  for (int l = 0; l < p.layer_count(); ++l) {
    v.weights.push_back(tape.input(p.weights[l]));
    v.biases.push_back(tape.input(p.biases[l]));
  }
  return v;
}

ad::Var mlp_forward_tape(ad::Tape& tape, const MlpVars& vars, ad::Var x,
                         const MlpParams& p) {
  ad::Var h = x;
  const int L = static_cast<int>(vars.weights.size());
  for (int l = 0; l < L; ++l) {
    h = tape.linear(h, vars.weights[l], vars.biases[l]);
    if (p.activated(l))
      h = p.activation == Activation::ReLU ? tape.relu(h) : tape.tanh(h);
  }
  return h;
}

ad::Var path_tape(ad::Tape& tape, const MlpVars& vars, bool normalize, int first,
                  int last) {
  ad::Var out;
  for (int l = first; l < last; ++l) {
    ad::Var w = vars.weights[l];
    if (normalize) w = tape.normalize_fro(w);
    ad::Var a = tape.transpose(tape.abs(w));
    out = (l == first) ? a : tape.matmul(out, a);
  }
  return out;
}

MlpGrads collect_grads(const ad::Tape& tape, const MlpVars& vars, const MlpParams& p) {
  MlpGrads g;
  for (int l = 0; l < p.layer_count(); ++l) {
    const Eigen::MatrixXd& gw = tape.grad(vars.weights[l]);
    const Eigen::MatrixXd& gb = tape.grad(vars.biases[l]);
    g.weights.push_back(gw.size() ? gw : Eigen::MatrixXd::Zero(p.weights[l].rows(),
                                                               p.weights[l].cols()));
    g.biases.push_back(gb.size() ? Eigen::VectorXd(gb.col(0))
                                 : Eigen::VectorXd::Zero(p.biases[l].size()));
  }
  return g;
}

OptimizerState OptimizerState::for_params(const MlpParams& p, AdamConfig cfg) {
  OptimizerState st;
  st.config = cfg;
  for (int l = 0; l < p.layer_count(); ++l) {
    st.m_w.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
    st.v_w.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
    st.m_b.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    st.v_b.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
  }
  return st;
}

namespace {
template <typename T>
void adam_update(T& x, const T& g, T& m, T& v, const AdamConfig& c, double bc1,
                 double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
  const auto mhat = m.array() / bc1;
  const auto vhat = v.array() / bc2;
  x.array() -= c.step_size * mhat / (vhat.sqrt() + c.epsilon);
}
}  // namespace

void adam_step(MlpParams& p, const MlpGrads& g, OptimizerState& st) {
  require(g.weights.size() == p.weights.size(), "adam_step: gradient layer mismatch");
  ++st.step_count;
  const double bc1 = 1.0 - std::pow(st.config.beta1, static_cast<double>(st.step_count));
  const double bc2 = 1.0 - std::pow(st.config.beta2, static_cast<double>(st.step_count));
  for (int l = 0; l < p.layer_count(); ++l) {
    adam_update(p.weights[l], g.weights[l], st.m_w[l], st.v_w[l], st.config, bc1, bc2);
    adam_update(p.biases[l], g.biases[l], st.m_b[l], st.v_b[l], st.config, bc1, bc2);
  }
}

MatrixAdam::MatrixAdam(Eigen::Index rows, Eigen::Index cols, AdamConfig cfg)
    : m(Eigen::MatrixXd::Zero(rows, cols)),
      v(Eigen::MatrixXd::Zero(rows, cols)),
      config(cfg) {}

void MatrixAdam::step(Eigen::MatrixXd& x, const Eigen::MatrixXd& grad) {
  ++step_count;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step_count));
  adam_update(x, grad, m, v, config, bc1, bc2);
}

}  // namespace ngm
