#include "ngm/ad.hpp"

#include <cmath>

#include "ngm/error.hpp"

namespace ngm::ad {

int Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

Var Tape::constant(Matrix value) { return {push(std::move(value), false)}; }

Var Tape::input(Matrix value) { return {push(std::move(value), true)}; }

Var Tape::linear(Var x, Var w, Var b) {
  const Matrix& X = nodes_[x.id].value;
  const Matrix& W = nodes_[w.id].value;
  const Matrix& B = nodes_[b.id].value;
  require(X.cols() == W.cols(), "ad::linear: input width ", X.cols(),
          " != weight fan-in ", W.cols());
  require(B.rows() == W.rows() && B.cols() == 1, "ad::linear: bias shape mismatch");
  Matrix out = X * W.transpose();
  out.rowwise() += B.col(0).transpose();
  const int xi = x.id, wi = w.id, bi = b.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [xi, wi, bi, id](Tape& t) {
    const Matrix& g = t.nodes_[id].grad;
    if (t.nodes_[xi].needs_grad) t.accumulate(xi, g * t.nodes_[wi].value);
    if (t.nodes_[wi].needs_grad) t.accumulate(wi, g.transpose() * t.nodes_[xi].value);
    if (t.nodes_[bi].needs_grad) t.accumulate(bi, g.colwise().sum().transpose());
  };
  return {id};
}

Var Tape::relu(Var a) {
  const Matrix& A = nodes_[a.id].value;
  Matrix out = A.cwiseMax(0.0);
  const int ai = a.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [ai, id](Tape& t) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix& A2 = t.nodes_[ai].value;
    t.accumulate(ai, (A2.array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  };
  return {id};
}

Var Tape::tanh(Var a) {
  const Matrix& A = nodes_[a.id].value;
  Matrix out = A.array().tanh().matrix();
  const int ai = a.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [ai, id](Tape& t) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix& Y = t.nodes_[id].value;
    t.accumulate(ai, ((1.0 - Y.array().square()) * g.array()).matrix());
  };
  return {id};
}

Var Tape::abs(Var a) {
  const Matrix& A = nodes_[a.id].value;
  Matrix out = A.cwiseAbs();
  const int ai = a.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [ai, id](Tape& t) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix& A2 = t.nodes_[ai].value;
    Matrix sign = (A2.array() > 0.0).cast<double>() - (A2.array() < 0.0).cast<double>();
    t.accumulate(ai, sign.cwiseProduct(g));
  };
  return {id};
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = nodes_[a.id].value;
  const Matrix& B = nodes_[b.id].value;
  require(A.cols() == B.rows(), "ad::matmul: inner dimensions ", A.cols(), " vs ",
          B.rows());
  const int ai = a.id, bi = b.id;
  const int id = push(A * B, true);
  nodes_[id].back = [ai, bi, id](Tape& t) {
    const Matrix& g = t.nodes_[id].grad;
    if (t.nodes_[ai].needs_grad) t.accumulate(ai, g * t.nodes_[bi].value.transpose());
    if (t.nodes_[bi].needs_grad) t.accumulate(bi, t.nodes_[ai].value.transpose() * g);
  };
  return {id};
}

Var Tape::transpose(Var a) {
  const int ai = a.id;
  const int id = push(nodes_[a.id].value.transpose(), true);
  nodes_[id].back = [ai, id](Tape& t) {
    t.accumulate(ai, t.nodes_[id].grad.transpose());
  };
  return {id};
}

Var Tape::normalize_fro(Var a) {
  const Matrix& A = nodes_[a.id].value;
  const double n = A.norm();
  require(n > 0.0, "ad::normalize_fro: zero matrix");
  const int ai = a.id;
  const int id = push(A / n, true);
  nodes_[id].back = [ai, id, n](Tape& t) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix& Y = t.nodes_[id].value;  // A / n
    const double inner = (g.array() * Y.array()).sum();
    t.accumulate(ai, (g - inner * Y) / n);
  };
  return {id};
}

Var Tape::hadamard(Var a, Matrix mask) {
  const Matrix& A = nodes_[a.id].value;
  require(A.rows() == mask.rows() && A.cols() == mask.cols(),
          "ad::hadamard: mask shape mismatch");
  const int ai = a.id;
  const int id = push(A.cwiseProduct(mask), true);
  nodes_[id].back = [ai, id, m = std::move(mask)](Tape& t) {
    t.accumulate(ai, t.nodes_[id].grad.cwiseProduct(m));
  };
  return {id};
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = nodes_[a.id].value;
  const Matrix& B = nodes_[b.id].value;
  require(A.rows() == B.rows() && A.cols() == B.cols(), "ad::add: shape mismatch");
  const int ai = a.id, bi = b.id;
  const int id = push(A + B, true);
  nodes_[id].back = [ai, bi, id](Tape& t) {
    const Matrix& g = t.nodes_[id].grad;
    t.accumulate(ai, g);
    t.accumulate(bi, g);
  };
  return {id};
}

Var Tape::scale(Var a, double s) {
  const int ai = a.id;
  const int id = push(nodes_[a.id].value * s, true);
  nodes_[id].back = [ai, id, s](Tape& t) { t.accumulate(ai, t.nodes_[id].grad * s); };
  return {id};
}

Var Tape::sum(Var a) {
  const Matrix& A = nodes_[a.id].value;
  Matrix out(1, 1);
  out(0, 0) = A.sum();
  const int ai = a.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [ai, id](Tape& t) {
    const double g = t.nodes_[id].grad(0, 0);
    const Matrix& A2 = t.nodes_[ai].value;
    t.accumulate(ai, Matrix::Constant(A2.rows(), A2.cols(), g));
  };
  return {id};
}

Var Tape::sum_squares(Var a) {
  const Matrix& A = nodes_[a.id].value;
  Matrix out(1, 1);
  out(0, 0) = A.squaredNorm();
  const int ai = a.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [ai, id](Tape& t) {
    const double g = t.nodes_[id].grad(0, 0);
    t.accumulate(ai, 2.0 * g * t.nodes_[ai].value);
  };
  return {id};
}

Var Tape::sqrt_scalar(Var a) {
  const Matrix& A = nodes_[a.id].value;
  require(A.size() == 1, "ad::sqrt_scalar: expects 1x1");
  require(A(0, 0) >= 0.0, "ad::sqrt_scalar: negative argument");
  Matrix out(1, 1);
  out(0, 0) = std::sqrt(A(0, 0));
  const int ai = a.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [ai, id](Tape& t) {
    const double y = t.nodes_[id].value(0, 0);
    if (y <= 0.0) return;  // subgradient 0 at sqrt(0)
    Matrix g(1, 1);
    g(0, 0) = t.nodes_[id].grad(0, 0) * 0.5 / y;
    t.accumulate(ai, g);
  };
  return {id};
}

Var Tape::log_guarded(Var a, double eps) {
  const Matrix& A = nodes_[a.id].value;
  require(A.size() == 1, "ad::log_guarded: expects 1x1");
  require(eps + A(0, 0) > 0.0, "ad::log_guarded: non-positive argument");
  Matrix out(1, 1);
  out(0, 0) = std::log(eps + A(0, 0));
  const int ai = a.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [ai, id, eps](Tape& t) {
    Matrix g(1, 1);
    g(0, 0) = t.nodes_[id].grad(0, 0) / (eps + t.nodes_[ai].value(0, 0));
    t.accumulate(ai, g);
  };
  return {id};
}

Var Tape::row_sqnorm_masked(Var pred, Matrix target, Matrix mask) {
  const Matrix& P = nodes_[pred.id].value;
  require(P.rows() == target.rows() && P.cols() == target.cols(),
          "ad::row_sqnorm_masked: target shape mismatch");
  require(P.rows() == mask.rows() && P.cols() == mask.cols(),
          "ad::row_sqnorm_masked: mask shape mismatch");
  Matrix resid = (P - target).cwiseProduct(mask);
  Matrix out = resid.array().square().matrix().rowwise().sum();
  const int pi = pred.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [pi, id, r = std::move(resid), m = std::move(mask)](Tape& t) {
    const Matrix& g = t.nodes_[id].grad;  // (N,1)
    Matrix gp = 2.0 * r.cwiseProduct(m);
    gp.array().colwise() *= g.col(0).array();
    t.accumulate(pi, gp);
  };
  return {id};
}

Var Tape::mean_all(Var a) {
  const Matrix& A = nodes_[a.id].value;
  const double n = static_cast<double>(A.size());
  Matrix out(1, 1);
  out(0, 0) = A.sum() / n;
  const int ai = a.id;
  const int id = push(std::move(out), true);
  nodes_[id].back = [ai, id, n](Tape& t) {
    const double g = t.nodes_[id].grad(0, 0) / n;
    const Matrix& A2 = t.nodes_[ai].value;
    t.accumulate(ai, Matrix::Constant(A2.rows(), A2.cols(), g));
  };
  return {id};
}

void Tape::backward(Var root) {
  require(root.valid() && root.id < static_cast<int>(nodes_.size()), "ad::backward: bad root");
  require(nodes_[root.id].value.size() == 1, "ad::backward: root must be scalar");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id].grad = Matrix::Constant(1, 1, 1.0);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back(*this);
  }
}

}  // namespace ngm::ad
