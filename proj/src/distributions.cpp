#include "notmiwae/distributions.hpp"

#include <cmath>

namespace notmiwae {
namespace {

void check_positive_std(const Tensor& std) {
  const double* s = std.data();
  for (std::size_t i = 0; i < std.size(); ++i)
    if (!(s[i] > 0.0))
      throw ValueError("gaussian std must be strictly positive (got " +
                       std::to_string(s[i]) + ")");
}

}  // namespace

Tensor gaussian_log_prob(const Tensor& x, const GaussianParams& p) {
  if (!x.same_shape(p.mean) || !x.same_shape(p.std))
    throw ShapeError("gaussian_log_prob: x " + x.shape_str() + ", mean " +
                     p.mean.shape_str() + ", std " + p.std.shape_str());
  check_positive_std(p.std);
  Tensor z = divide(sub(x, p.mean), p.std);
  Tensor quad = mul_scalar(square(z), -0.5);
  return add_scalar(sub(quad, log(p.std)), -kHalfLog2Pi);
}

Tensor standard_normal_log_prob(const Tensor& z) {
  return add_scalar(mul_scalar(square(z), -0.5), -kHalfLog2Pi);
}

Tensor gaussian_rsample(const GaussianParams& p, RngStream& rng) {
  check_positive_std(p.std);
  Tensor eps(p.mean.rows(), p.mean.cols());
  rng.fill_normal(eps.data(), eps.size());
  return add(p.mean, mul(p.std, eps));
}

double gaussian_cdf(double x, double mean, double std) {
  if (!(std > 0.0))
    throw ValueError("gaussian_cdf: std must be strictly positive");
  return 0.5 * std::erfc(-(x - mean) / (std * std::sqrt(2.0)));
}

Tensor bernoulli_log_prob(const Tensor& s, const BernoulliLogits& p) {
  if (!s.same_shape(p.logits))
    throw ShapeError("bernoulli_log_prob: s " + s.shape_str() + " vs logits " +
                     p.logits.shape_str());
  const double* sv = s.data();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (sv[i] != 0.0 && sv[i] != 1.0)
      throw ValueError("bernoulli_log_prob: mask entries must be 0 or 1, got " +
                       std::to_string(sv[i]));
  // s*log(sigmoid(l)) + (1-s)*log(1-sigmoid(l)) == s*l - softplus(l)
  return sub(mul(s, p.logits), softplus(p.logits));
}

Tensor log_softmax_rows(const Tensor& logits) {
  Tensor lse = logsumexp_rows(logits);
  return sub(logits, broadcast_to(lse, logits.rows(), logits.cols()));
}

Tensor gumbel_softmax_rsample(const CategoricalLogits& p, RngStream& rng) {
  if (!(p.temperature > 0.0))
    throw ValueError("gumbel_softmax_rsample: temperature must be positive");
  Tensor noise(p.logits.rows(), p.logits.cols());
  rng.fill_gumbel(noise.data(), noise.size());
  Tensor y = mul_scalar(add(p.logits, noise), 1.0 / p.temperature);
  return exp(log_softmax_rows(y));
}

}  // namespace notmiwae
