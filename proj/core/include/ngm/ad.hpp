#ifndef NGM_AD_HPP
#define NGM_AD_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace ngm::ad {

using Matrix = Eigen::MatrixXd;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense matrices. Covers exactly the operator set the
// losses need: affine layers, ReLU/tanh, |.|, matrix products, Frobenius
// normalization, Hadamard masking, norms, guarded log and masked squared
// residuals. Subgradient at ReLU kinks, |w| = 0 and ||.|| = 0 is taken as 0,
// so pruned weights stay pruned and the l2 norm never divides by zero.
class Tape {
 public:
  Var constant(Matrix value);                  // no gradient tracked
  Var input(Matrix value);                     // leaf with gradient

  Var linear(Var x, Var w, Var b);             // x:(N,I) w:(O,I) b:(O,1) -> (N,O)
  Var relu(Var a);
  Var tanh(Var a);
  Var abs(Var a);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var normalize_fro(Var a);                    // a / ||a||_F
  Var hadamard(Var a, Matrix mask);            // elementwise a * mask (constant mask)
  Var add(Var a, Var b);
  Var scale(Var a, double s);
  Var sum(Var a);                              // 1x1
  Var sum_squares(Var a);                      // 1x1
  Var sqrt_scalar(Var a);                      // 1x1, subgradient 0 at 0
  Var log_guarded(Var a, double eps);          // 1x1: log(eps + a)
  // Per-row squared residual sum((pred - target) * mask)^2 -> (N,1).
  Var row_sqnorm_masked(Var pred, Matrix target, Matrix mask);
  Var mean_all(Var a);                         // 1x1 mean of all entries

  void backward(Var root);                     // seeds d(root)/d(root) = 1
  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;  // null for leaves/constants
    bool needs_grad = false;
  };
  int push(Matrix value, bool needs_grad, std::function<void(Tape&)> back = nullptr);
  Matrix& grad_ref(int id) { return nodes_[id].grad; }
  void accumulate(int id, const Matrix& g);

  std::vector<Node> nodes_;
};

}  // namespace ngm::ad

#endif  // NGM_AD_HPP
