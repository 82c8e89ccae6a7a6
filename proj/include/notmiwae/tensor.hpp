#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "notmiwae/errors.hpp"

// Dense 2-D tensors with reverse-mode automatic differentiation on a single
// per-thread tape. Tensors are cheap shared handles; values are immutable by
// convention once used in a graph, gradients accumulate during backward().
// Scalars are 1x1, vectors are 1xN or Nx1. 64-bit floats throughout: the
// importance weights this engine exists for span hundreds of nats.
namespace notmiwae {

struct TensorData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily, only for requires_grad tensors
  bool requires_grad = false;
  std::uint64_t epoch = 0;  // tape epoch that produced this node, 0 = leaf
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> values);
  static Tensor column(std::vector<double> values);

  std::size_t rows() const { return d_->rows; }
  std::size_t cols() const { return d_->cols; }
  std::size_t size() const { return d_->value.size(); }
  bool defined() const { return d_ != nullptr; }

  double* data() { return d_->value.data(); }
  const double* data() const { return d_->value.data(); }
  const std::vector<double>& values() const { return d_->value; }
  double at(std::size_t r, std::size_t c) const { return d_->value[r * d_->cols + c]; }
  double& at(std::size_t r, std::size_t c) { return d_->value[r * d_->cols + c]; }
  // Value of a 1x1 tensor.
  double item() const;

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return !d_->grad.empty(); }
  const std::vector<double>& grad() const;
  double grad_at(std::size_t r, std::size_t c) const;
  void zero_grad();

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }
  std::string shape_str() const;

  std::shared_ptr<TensorData> ptr() const { return d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

// Reverse-mode tape: an append-only list of backward closures, walked in
// strict reverse append order by backward(). One tape per thread; a training
// step builds the graph, calls backward() once (which clears the tape) and
// then applies parameter updates outside any recording.
class Tape {
 public:
  static Tape& active();

  bool recording() const { return pause_ == 0; }
  std::size_t size() const { return nodes_.size(); }
  std::uint64_t epoch() const { return epoch_; }

  void push(std::function<void()> pull);
  void reset();

  // Accumulates d(loss)/d(leaf) into every reachable requires_grad tensor,
  // then clears the tape. loss must be a 1x1 tensor produced on this tape
  // (or a requires_grad leaf). A second call without new forward work throws.
  void backward(const Tensor& loss);

 private:
  friend struct NoGrad;
  std::vector<std::function<void()>> nodes_;
  std::uint64_t epoch_ = 1;
  int pause_ = 0;
  bool consumed_ = false;
};

// RAII guard: ops executed in scope compute values but record nothing.
struct NoGrad {
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;
};

// ---- elementwise ----
// Binary ops take equal shapes, or a 1xN row vector on the right that is
// broadcast against each row of an MxN left operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
Tensor neg(const Tensor& a);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);

// ---- reductions ----
Tensor sum_rows(const Tensor& a);      // MxN -> Mx1
Tensor sum_cols(const Tensor& a);      // MxN -> 1xN
Tensor sum_all(const Tensor& a);       // MxN -> 1x1
Tensor mean_all(const Tensor& a);
Tensor mean_rows(const Tensor& a);     // MxN -> Mx1
Tensor mean_cols(const Tensor& a);     // MxN -> 1xN
Tensor logsumexp_rows(const Tensor& a);  // MxN -> Mx1, max-subtracted

// ---- structural ----
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);  // same size
Tensor repeat_rows(const Tensor& a, std::size_t k);  // MxN -> (M*k)xN, blocks
Tensor broadcast_to(const Tensor& a, std::size_t rows, std::size_t cols);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);

bool all_finite(const Tensor& a);

}  // namespace notmiwae
