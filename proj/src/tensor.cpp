#include "notmiwae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "notmiwae/kernels.hpp"

namespace notmiwae {
namespace {

using DataPtr = std::shared_ptr<TensorData>;

std::string shape_of(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void ensure_grad(TensorData& t) {
  if (t.grad.empty()) t.grad.assign(t.value.size(), 0.0);
}

// Accumulates src into t.grad iff t participates in differentiation.
void accumulate(TensorData& t, const double* src, std::size_t n) {
  if (!t.requires_grad) return;
  ensure_grad(t);
  kernels::ops().axpy(1.0, src, t.grad.data(), n);
}

bool want_grad(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active().recording()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

Tensor make_result(std::size_t rows, std::size_t cols) {
  return Tensor(rows, cols);
}

void mark_on_tape(Tensor& out) {
  out.ptr()->requires_grad = true;
  out.ptr()->epoch = Tape::active().epoch();
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : d_(std::make_shared<TensorData>()) {
  d_->rows = rows;
  d_->cols = cols;
  d_->value.assign(rows * cols, fill);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : d_(std::make_shared<TensorData>()) {
  if (values.size() != rows * cols)
    throw ShapeError("tensor init: " + std::to_string(values.size()) +
                     " values for shape " + shape_of(rows, cols));
  d_->rows = rows;
  d_->cols = cols;
  d_->value = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(1, 1, std::vector<double>{v}); }
Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}
Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

double Tensor::item() const {
  if (size() != 1)
    throw ShapeError("item() requires a 1x1 tensor, got " + shape_str());
  return d_->value[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  d_->requires_grad = on;
  if (!on) d_->grad.clear();
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  if (d_->grad.empty())
    throw AutodiffError("gradient requested but none accumulated (shape " +
                        shape_str() + ")");
  return d_->grad;
}

double Tensor::grad_at(std::size_t r, std::size_t c) const {
  return grad()[r * cols() + c];
}

void Tensor::zero_grad() {
  std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

std::string Tensor::shape_str() const { return shape_of(rows(), cols()); }

// ------------------------------------------------------------------ Tape

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::push(std::function<void()> pull) {
  nodes_.push_back(std::move(pull));
  consumed_ = false;
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
  ++epoch_;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw AutodiffError("backward requires a scalar loss, got " +
                        (loss.defined() ? loss.shape_str() : std::string("undefined")));
  if (consumed_)
    throw AutodiffError("backward() called twice without a new forward pass");
  if (!loss.requires_grad())
    throw AutodiffError("backward on a tensor detached from the tape");
  if (loss.ptr()->epoch != 0 && loss.ptr()->epoch != epoch_)
    throw AutodiffError("backward on a tensor from a cleared tape");

  TensorData& l = *loss.ptr();
  ensure_grad(l);
  l.grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
  consumed_ = true;
  ++epoch_;
}

NoGrad::NoGrad() { ++Tape::active().pause_; }
NoGrad::~NoGrad() { --Tape::active().pause_; }

// ------------------------------------------------------------ elementwise

namespace {

enum class BinKind { add, sub, mul, div };

const char* bin_name(BinKind k) {
  switch (k) {
    case BinKind::add: return "add";
    case BinKind::sub: return "sub";
    case BinKind::mul: return "mul";
    case BinKind::div: return "div";
  }
  return "?";
}

Tensor binary_same(BinKind kind, const Tensor& a, const Tensor& b) {
  const auto& k = kernels::ops();
  Tensor out = make_result(a.rows(), a.cols());
  const std::size_t n = a.size();
  switch (kind) {
    case BinKind::add: k.add(a.data(), b.data(), out.data(), n); break;
    case BinKind::sub: k.sub(a.data(), b.data(), out.data(), n); break;
    case BinKind::mul: k.mul(a.data(), b.data(), out.data(), n); break;
    case BinKind::div: k.div(a.data(), b.data(), out.data(), n); break;
  }
  if (want_grad({&a, &b})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), bd = b.ptr(), od = out.ptr();
    Tape::active().push([kind, ad, bd, od, n] {
      if (od->grad.empty()) return;
      const auto& kk = kernels::ops();
      const double* g = od->grad.data();
      switch (kind) {
        case BinKind::add:
          accumulate(*ad, g, n);
          accumulate(*bd, g, n);
          break;
        case BinKind::sub:
          accumulate(*ad, g, n);
          if (bd->requires_grad) {
            ensure_grad(*bd);
            kk.axpy(-1.0, g, bd->grad.data(), n);
          }
          break;
        case BinKind::mul:
          if (ad->requires_grad) {
            ensure_grad(*ad);
            kk.madd(g, bd->value.data(), ad->grad.data(), n);
          }
          if (bd->requires_grad) {
            ensure_grad(*bd);
            kk.madd(g, ad->value.data(), bd->grad.data(), n);
          }
          break;
        case BinKind::div: {
          std::vector<double> gb(n);  // g / b
          kk.div(g, bd->value.data(), gb.data(), n);
          accumulate(*ad, gb.data(), n);
          if (bd->requires_grad) {
            ensure_grad(*bd);
            std::vector<double> t(n);  // (g/b) * out = g*a/b^2
            kk.mul(gb.data(), od->value.data(), t.data(), n);
            kk.axpy(-1.0, t.data(), bd->grad.data(), n);
          }
          break;
        }
      }
    });
  }
  return out;
}

Tensor binary_rowvec(BinKind kind, const Tensor& a, const Tensor& b) {
  const auto& k = kernels::ops();
  const std::size_t m = a.rows(), p = a.cols();
  Tensor out = make_result(m, p);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * p;
    double* orow = out.data() + i * p;
    switch (kind) {
      case BinKind::add: k.add(arow, b.data(), orow, p); break;
      case BinKind::sub: k.sub(arow, b.data(), orow, p); break;
      case BinKind::mul: k.mul(arow, b.data(), orow, p); break;
      case BinKind::div: k.div(arow, b.data(), orow, p); break;
    }
  }
  if (want_grad({&a, &b})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), bd = b.ptr(), od = out.ptr();
    Tape::active().push([kind, ad, bd, od, m, p] {
      if (od->grad.empty()) return;
      const auto& kk = kernels::ops();
      const double* g = od->grad.data();
      if (ad->requires_grad) {
        ensure_grad(*ad);
        switch (kind) {
          case BinKind::add:
          case BinKind::sub:
            kk.axpy(1.0, g, ad->grad.data(), m * p);
            break;
          case BinKind::mul:
            for (std::size_t i = 0; i < m; ++i)
              kk.madd(g + i * p, bd->value.data(), ad->grad.data() + i * p, p);
            break;
          case BinKind::div:
            for (std::size_t i = 0; i < m; ++i) {
              std::vector<double> gb(p);
              kk.div(g + i * p, bd->value.data(), gb.data(), p);
              kk.axpy(1.0, gb.data(), ad->grad.data() + i * p, p);
            }
            break;
        }
      }
      if (bd->requires_grad) {
        ensure_grad(*bd);
        double* bg = bd->grad.data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g + i * p;
          const double* arow = ad->value.data() + i * p;
          switch (kind) {
            case BinKind::add:
              kk.axpy(1.0, grow, bg, p);
              break;
            case BinKind::sub:
              kk.axpy(-1.0, grow, bg, p);
              break;
            case BinKind::mul:
              kk.madd(grow, arow, bg, p);
              break;
            case BinKind::div:
              for (std::size_t j = 0; j < p; ++j)
                bg[j] -= grow[j] * od->value[i * p + j] / bd->value[j];
              break;
          }
        }
      }
    });
  }
  return out;
}

Tensor binary(BinKind kind, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return binary_same(kind, a, b);
  if (b.rows() == 1 && b.cols() == a.cols()) return binary_rowvec(kind, a, b);
  throw ShapeError(std::string("elementwise ") + bin_name(kind) +
                   ": cannot broadcast " + a.shape_str() + " with " +
                   b.shape_str() + " (equal shapes or a 1xN row vector)");
}

enum class UnKind { exp, log, tanh, relu, sigmoid, softplus, square, neg };

Tensor unary(UnKind kind, const Tensor& a) {
  const auto& k = kernels::ops();
  const std::size_t n = a.size();
  Tensor out = make_result(a.rows(), a.cols());
  switch (kind) {
    case UnKind::exp: k.exp(a.data(), out.data(), n); break;
    case UnKind::log: k.log(a.data(), out.data(), n); break;
    case UnKind::tanh: k.tanh(a.data(), out.data(), n); break;
    case UnKind::relu: k.relu(a.data(), out.data(), n); break;
    case UnKind::sigmoid: k.sigmoid(a.data(), out.data(), n); break;
    case UnKind::softplus: k.softplus(a.data(), out.data(), n); break;
    case UnKind::square: k.square(a.data(), out.data(), n); break;
    case UnKind::neg: k.neg(a.data(), out.data(), n); break;
  }
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    Tape::active().push([kind, ad, od, n] {
      if (!ad->requires_grad || od->grad.empty()) return;
      const auto& kk = kernels::ops();
      ensure_grad(*ad);
      const double* g = od->grad.data();
      const double* x = ad->value.data();
      const double* y = od->value.data();
      double* dst = ad->grad.data();
      switch (kind) {
        case UnKind::exp:
          kk.madd(g, y, dst, n);
          break;
        case UnKind::log: {
          std::vector<double> t(n);
          kk.div(g, x, t.data(), n);
          kk.axpy(1.0, t.data(), dst, n);
          break;
        }
        case UnKind::tanh:
          for (std::size_t i = 0; i < n; ++i) dst[i] += g[i] * (1.0 - y[i] * y[i]);
          break;
        case UnKind::relu:
          // derivative at exactly 0 is defined as 0
          for (std::size_t i = 0; i < n; ++i)
            if (x[i] > 0.0) dst[i] += g[i];
          break;
        case UnKind::sigmoid:
          for (std::size_t i = 0; i < n; ++i) dst[i] += g[i] * y[i] * (1.0 - y[i]);
          break;
        case UnKind::softplus: {
          std::vector<double> s(n);
          kk.sigmoid(x, s.data(), n);
          kk.madd(g, s.data(), dst, n);
          break;
        }
        case UnKind::square:
          for (std::size_t i = 0; i < n; ++i) dst[i] += 2.0 * g[i] * x[i];
          break;
        case UnKind::neg:
          kk.axpy(-1.0, g, dst, n);
          break;
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinKind::mul, a, b); }
Tensor divide(const Tensor& a, const Tensor& b) { return binary(BinKind::div, a, b); }

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = make_result(a.rows(), a.cols());
  kernels::ops().shift(a.data(), c, out.data(), a.size());
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    const std::size_t n = a.size();
    Tape::active().push([ad, od, n] {
      if (!od->grad.empty()) accumulate(*ad, od->grad.data(), n);
    });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double c) {
  Tensor out = make_result(a.rows(), a.cols());
  kernels::ops().scale(a.data(), c, out.data(), a.size());
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    const std::size_t n = a.size();
    Tape::active().push([ad, od, n, c] {
      if (!ad->requires_grad || od->grad.empty()) return;
      ensure_grad(*ad);
      kernels::ops().axpy(c, od->grad.data(), ad->grad.data(), n);
    });
  }
  return out;
}

Tensor exp(const Tensor& a) { return unary(UnKind::exp, a); }
Tensor log(const Tensor& a) { return unary(UnKind::log, a); }
Tensor tanh(const Tensor& a) { return unary(UnKind::tanh, a); }
Tensor relu(const Tensor& a) { return unary(UnKind::relu, a); }
Tensor sigmoid(const Tensor& a) { return unary(UnKind::sigmoid, a); }
Tensor softplus(const Tensor& a) { return unary(UnKind::softplus, a); }
Tensor square(const Tensor& a) { return unary(UnKind::square, a); }
Tensor neg(const Tensor& a) { return unary(UnKind::neg, a); }

// ---------------------------------------------------------------- matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() +
                     " * " + b.shape_str());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_result(m, n);
  kernels::ops().matmul_nn(a.data(), b.data(), out.data(), m, k, n, false);
  if (want_grad({&a, &b})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), bd = b.ptr(), od = out.ptr();
    Tape::active().push([ad, bd, od, m, k, n] {
      if (od->grad.empty()) return;
      const auto& kk = kernels::ops();
      const double* g = od->grad.data();
      if (ad->requires_grad) {
        ensure_grad(*ad);
        // dA += dC * B^T
        kk.matmul_nt(g, bd->value.data(), ad->grad.data(), m, n, k, true);
      }
      if (bd->requires_grad) {
        ensure_grad(*bd);
        // dB += A^T * dC
        kk.matmul_tn(ad->value.data(), g, bd->grad.data(), k, m, n, true);
      }
    });
  }
  return out;
}

// ------------------------------------------------------------- reductions

Tensor sum_rows(const Tensor& a) {
  const std::size_t m = a.rows(), p = a.cols();
  Tensor out = make_result(m, 1);
  for (std::size_t i = 0; i < m; ++i)
    out.data()[i] = kernels::ops().sum(a.data() + i * p, p);
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    Tape::active().push([ad, od, m, p] {
      if (!ad->requires_grad || od->grad.empty()) return;
      ensure_grad(*ad);
      for (std::size_t i = 0; i < m; ++i) {
        double* row = ad->grad.data() + i * p;
        kernels::ops().shift(row, od->grad[i], row, p);
      }
    });
  }
  return out;
}

Tensor sum_cols(const Tensor& a) {
  const std::size_t m = a.rows(), p = a.cols();
  Tensor out = make_result(1, p);
  for (std::size_t i = 0; i < m; ++i)
    kernels::ops().axpy(1.0, a.data() + i * p, out.data(), p);
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    Tape::active().push([ad, od, m, p] {
      if (!ad->requires_grad || od->grad.empty()) return;
      ensure_grad(*ad);
      for (std::size_t i = 0; i < m; ++i)
        kernels::ops().axpy(1.0, od->grad.data(), ad->grad.data() + i * p, p);
    });
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  Tensor out = Tensor::scalar(kernels::ops().sum(a.data(), a.size()));
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    const std::size_t n = a.size();
    Tape::active().push([ad, od, n] {
      if (!ad->requires_grad || od->grad.empty()) return;
      ensure_grad(*ad);
      double* dst = ad->grad.data();
      kernels::ops().shift(dst, od->grad[0], dst, n);
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean over an empty tensor");
  return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_rows(const Tensor& a) {
  if (a.cols() == 0) throw ShapeError("mean over an empty axis");
  return mul_scalar(sum_rows(a), 1.0 / static_cast<double>(a.cols()));
}

Tensor mean_cols(const Tensor& a) {
  if (a.rows() == 0) throw ShapeError("mean over an empty axis");
  return mul_scalar(sum_cols(a), 1.0 / static_cast<double>(a.rows()));
}

Tensor logsumexp_rows(const Tensor& a) {
  const std::size_t m = a.rows(), p = a.cols();
  if (p == 0) throw ShapeError("logsumexp over an empty axis");
  Tensor out = make_result(m, 1);
  // softmax of each row is kept as the saved activation for backward
  auto soft = std::make_shared<std::vector<double>>(m * p, 0.0);
  const auto& k = kernels::ops();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a.data() + i * p;
    double* srow = soft->data() + i * p;
    const double mx = k.max(row, p);
    if (!(mx > -std::numeric_limits<double>::infinity())) {
      out.data()[i] = mx;  // all -inf row; gradient stays 0
      continue;
    }
    k.shift(row, -mx, srow, p);
    k.exp(srow, srow, p);
    const double s = k.sum(srow, p);
    out.data()[i] = mx + std::log(s);
    k.scale(srow, 1.0 / s, srow, p);
  }
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    Tape::active().push([ad, od, soft, m, p] {
      if (!ad->requires_grad || od->grad.empty()) return;
      ensure_grad(*ad);
      for (std::size_t i = 0; i < m; ++i)
        kernels::ops().axpy(od->grad[i], soft->data() + i * p,
                            ad->grad.data() + i * p, p);
    });
  }
  return out;
}

// ------------------------------------------------------------- structural

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.size())
    throw ShapeError("reshape: " + a.shape_str() + " has " +
                     std::to_string(a.size()) + " elements, target " +
                     shape_of(rows, cols));
  Tensor out(rows, cols, a.values());
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    const std::size_t n = a.size();
    Tape::active().push([ad, od, n] {
      if (!od->grad.empty()) accumulate(*ad, od->grad.data(), n);
    });
  }
  return out;
}

Tensor repeat_rows(const Tensor& a, std::size_t k) {
  if (k == 0) throw ShapeError("repeat_rows with k = 0");
  const std::size_t m = a.rows(), p = a.cols();
  Tensor out = make_result(m * k, p);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t r = 0; r < k; ++r)
      std::copy_n(a.data() + i * p, p, out.data() + (i * k + r) * p);
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    Tape::active().push([ad, od, m, p, k] {
      if (!ad->requires_grad || od->grad.empty()) return;
      ensure_grad(*ad);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r)
          kernels::ops().axpy(1.0, od->grad.data() + (i * k + r) * p,
                              ad->grad.data() + i * p, p);
    });
  }
  return out;
}

Tensor broadcast_to(const Tensor& a, std::size_t rows, std::size_t cols) {
  const bool from_scalar = a.rows() == 1 && a.cols() == 1;
  const bool from_row = a.rows() == 1 && a.cols() == cols;
  const bool from_col = a.cols() == 1 && a.rows() == rows;
  if (!from_scalar && !from_row && !from_col)
    throw ShapeError("broadcast_to: cannot expand " + a.shape_str() + " to " +
                     shape_of(rows, cols));
  Tensor out = make_result(rows, cols);
  if (from_scalar) {
    std::fill_n(out.data(), rows * cols, a.data()[0]);
  } else if (from_row) {
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(a.data(), cols, out.data() + i * cols);
  } else {
    for (std::size_t i = 0; i < rows; ++i)
      std::fill_n(out.data() + i * cols, cols, a.data()[i]);
  }
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    Tape::active().push([ad, od, rows, cols, from_scalar, from_row] {
      if (!ad->requires_grad || od->grad.empty()) return;
      ensure_grad(*ad);
      const double* g = od->grad.data();
      if (from_scalar) {
        ad->grad[0] += kernels::ops().sum(g, rows * cols);
      } else if (from_row) {
        for (std::size_t i = 0; i < rows; ++i)
          kernels::ops().axpy(1.0, g + i * cols, ad->grad.data(), cols);
      } else {
        for (std::size_t i = 0; i < rows; ++i)
          ad->grad[i] += kernels::ops().sum(g + i * cols, cols);
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  if (c0 >= c1 || c1 > a.cols())
    throw ShapeError("slice_cols [" + std::to_string(c0) + ", " +
                     std::to_string(c1) + ") out of range for " + a.shape_str());
  const std::size_t m = a.rows(), p = a.cols(), w = c1 - c0;
  Tensor out = make_result(m, w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.data() + i * p + c0, w, out.data() + i * w);
  if (want_grad({&a})) {
    mark_on_tape(out);
    DataPtr ad = a.ptr(), od = out.ptr();
    Tape::active().push([ad, od, m, p, w, c0] {
      if (!ad->requires_grad || od->grad.empty()) return;
      ensure_grad(*ad);
      for (std::size_t i = 0; i < m; ++i)
        kernels::ops().axpy(1.0, od->grad.data() + i * w,
                            ad->grad.data() + i * p + c0, w);
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of zero tensors");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    if (t.rows() != m)
      throw ShapeError("concat_cols: row mismatch " + t.shape_str() + " vs " +
                       parts.front().shape_str());
    total += t.cols();
  }
  Tensor out = make_result(m, total);
  std::size_t off = 0;
  for (const Tensor& t : parts) {
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(t.data() + i * t.cols(), t.cols(),
                  out.data() + i * total + off);
    off += t.cols();
  }
  bool need = false;
  for (const Tensor& t : parts)
    if (t.requires_grad()) need = true;
  if (need && Tape::active().recording()) {
    mark_on_tape(out);
    std::vector<DataPtr> ins;
    ins.reserve(parts.size());
    for (const Tensor& t : parts) ins.push_back(t.ptr());
    DataPtr od = out.ptr();
    Tape::active().push([ins, od, m, total] {
      if (od->grad.empty()) return;
      std::size_t off2 = 0;
      for (const DataPtr& t : ins) {
        const std::size_t w = t->cols;
        if (t->requires_grad) {
          ensure_grad(*t);
          for (std::size_t i = 0; i < m; ++i)
            kernels::ops().axpy(1.0, od->grad.data() + i * total + off2,
                                t->grad.data() + i * w, w);
        }
        off2 += w;
      }
    });
  }
  return out;
}

bool all_finite(const Tensor& a) {
  const double* x = a.data();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

}  // namespace notmiwae
