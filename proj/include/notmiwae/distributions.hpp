#pragma once

#include "notmiwae/rng.hpp"
#include "notmiwae/tensor.hpp"

// Reparameterizable distributions and log-densities for the prior p(z), the
// proposal q(z|x_obs), the observation model p(x|z) and the Bernoulli mask
// model p(s|x). Everything is built from tape ops, so log-probabilities and
// reparameterized samples are differentiable end to end. Other
// reparameterizable observation families (Student's t, ...) slot in next to
// the Gaussian here and behind Model::decode().
namespace notmiwae {

struct GaussianParams {
  Tensor mean;
  Tensor std;  // strictly positive, same shape as mean
};

struct BernoulliLogits {
  Tensor logits;
};

struct CategoricalLogits {
  Tensor logits;  // N x classes, classes along the column axis
  double temperature = 0.5;
};

// Elementwise log N(x | mean, std); differentiable w.r.t. x, mean and std.
Tensor gaussian_log_prob(const Tensor& x, const GaussianParams& p);

// Elementwise log N(z | 0, 1).
Tensor standard_normal_log_prob(const Tensor& z);

// mean + std .* eps with eps ~ N(0, I); gradients flow to mean and std only.
Tensor gaussian_rsample(const GaussianParams& p, RngStream& rng);

// Normal CDF via erf; scalar because it backs root-finding, not training.
double gaussian_cdf(double x, double mean, double std);

// Numerically stable Bernoulli log-pmf from logits: s*l - softplus(l).
// s must be exactly 0 or 1.
Tensor bernoulli_log_prob(const Tensor& s, const BernoulliLogits& p);

// softmax((logits + G) / tau) with G i.i.d. standard Gumbel; rows sum to 1.
Tensor gumbel_softmax_rsample(const CategoricalLogits& p, RngStream& rng);

// Row-wise log softmax (columns are classes).
Tensor log_softmax_rows(const Tensor& logits);

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*ln(2*pi)

}  // namespace notmiwae
