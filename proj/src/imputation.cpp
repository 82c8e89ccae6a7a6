#include "notmiwae/imputation.hpp"

#include <algorithm>
#include <cmath>

#include "notmiwae/distributions.hpp"

namespace notmiwae {

const char* to_string(PointEstimator e) {
  switch (e) {
    case PointEstimator::snis_mean: return "snis_mean";
    case PointEstimator::snis_mean_rao_blackwell: return "snis_mean_rao_blackwell";
    case PointEstimator::snis_median: return "snis_median";
  }
  return "?";
}

PointEstimator estimator_from_string(const std::string& s) {
  if (s == "snis_mean") return PointEstimator::snis_mean;
  if (s == "snis_mean_rao_blackwell") return PointEstimator::snis_mean_rao_blackwell;
  if (s == "snis_median") return PointEstimator::snis_median;
  throw ConfigError("unknown imputation estimator: " + s);
}

std::vector<double> normalize_weights(const Tensor& log_w_row) {
  const std::size_t k = log_w_row.size();
  const double* lw = log_w_row.data();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) mx = std::max(mx, lw[i]);
  if (!std::isfinite(mx))
    throw NumericalError(
        "all importance weights are zero; the proposal places no mass on the "
        "conditional");
  std::vector<double> alpha(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    alpha[i] = std::exp(lw[i] - mx);
    sum += alpha[i];
  }
  for (double& a : alpha) a /= sum;
  return alpha;
}

double effective_sample_size(const std::vector<double>& alpha) {
  double sq = 0.0;
  for (double a : alpha) sq += a * a;
  return 1.0 / sq;
}

double mixture_gaussian_median(const std::vector<double>& alpha,
                               const std::vector<double>& mu,
                               const std::vector<double>& sigma, double tol) {
  const std::size_t k = alpha.size();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    lo = std::min(lo, mu[i] - 6.0 * sigma[i]);
    hi = std::max(hi, mu[i] + 6.0 * sigma[i]);
  }
  auto cdf = [&](double x) {
    double f = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      f += alpha[i] * gaussian_cdf(x, mu[i], sigma[i]);
    return f;
  };
  if (cdf(lo) > 0.5 || cdf(hi) < 0.5)
    throw NumericalError("median bracket failure on the mixture CDF");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < 0.5)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

struct RowSamples {
  std::vector<double> alpha;
  Tensor xm;        // K x p sampled completions
  Tensor obs_mean;  // K x p
  Tensor obs_std;   // K x p (gaussian only)
  DecoderKind kind;
};

RowSamples sample_row(const std::vector<double>& x_row,
                      const std::vector<double>& mask_row, const Model& model,
                      std::size_t K, ObjectiveKind kind, RngStream& rng) {
  if (K < 1) throw ValueError("imputation needs K >= 1");
  const std::size_t p = x_row.size();
  Tensor x(1, p), m(1, p);
  for (std::size_t j = 0; j < p; ++j) {
    m.at(0, j) = mask_row[j];
    x.at(0, j) = mask_row[j] == 1.0 ? x_row[j] : 0.0;
  }
  NoGrad pause;
  WeightMatrix wm = log_weights(x, m, model, K, rng, kind);
  RowSamples out;
  out.alpha = normalize_weights(wm.log_w);
  out.xm = wm.xm_samples;
  out.obs_mean = wm.obs_mean;
  out.obs_std = wm.obs_std;
  out.kind = wm.obs_kind;
  return out;
}

bool row_fully_observed(const std::vector<double>& mask_row) {
  return std::all_of(mask_row.begin(), mask_row.end(),
                     [](double m) { return m == 1.0; });
}

}  // namespace

RowImpute impute_row(const std::vector<double>& x_row,
                     const std::vector<double>& mask_row, const Model& model,
                     std::size_t K, PointEstimator estimator,
                     ObjectiveKind kind, RngStream& rng) {
  if (row_fully_observed(mask_row))
    return {x_row, static_cast<double>(K)};
  RowSamples s = sample_row(x_row, mask_row, model, K, kind, rng);
  if (estimator == PointEstimator::snis_median &&
      s.kind == DecoderKind::categorical)
    throw ValueError("snis_median requires a Gaussian observation model");

  const std::size_t p = x_row.size();
  std::vector<double> out = x_row;
  for (std::size_t j = 0; j < p; ++j) {
    if (mask_row[j] == 1.0) continue;
    switch (estimator) {
      case PointEstimator::snis_mean: {
        double v = 0.0;
        for (std::size_t k = 0; k < K; ++k) v += s.alpha[k] * s.xm.at(k, j);
        out[j] = v;
        break;
      }
      case PointEstimator::snis_mean_rao_blackwell: {
        double v = 0.0;
        for (std::size_t k = 0; k < K; ++k)
          v += s.alpha[k] * s.obs_mean.at(k, j);
        out[j] = v;
        break;
      }
      case PointEstimator::snis_median: {
        std::vector<double> mu(K), sigma(K);
        for (std::size_t k = 0; k < K; ++k) {
          mu[k] = s.obs_mean.at(k, j);
          sigma[k] = s.obs_std.at(k, j);
        }
        out[j] = mixture_gaussian_median(s.alpha, mu, sigma);
        break;
      }
    }
  }
  const double ess = std::clamp(effective_sample_size(s.alpha), 1.0,
                                static_cast<double>(K));
  return {out, ess};
}

Matrix multiple_impute_row(const std::vector<double>& x_row,
                           const std::vector<double>& mask_row,
                           const Model& model, std::size_t K, std::size_t draws,
                           ObjectiveKind kind, RngStream& rng) {
  if (draws < 1) throw ValueError("multiple imputation needs draws >= 1");
  if (row_fully_observed(mask_row)) return Matrix(draws, x_row);
  RowSamples s = sample_row(x_row, mask_row, model, K, kind, rng);
  std::vector<double> cumulative(K);
  double acc = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    acc += s.alpha[k];
    cumulative[k] = acc;
  }
  cumulative[K - 1] = 1.0;

  Matrix out(draws, x_row);
  const std::size_t p = x_row.size();
  for (std::size_t d = 0; d < draws; ++d) {
    const double u = rng.uniform();
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
    for (std::size_t j = 0; j < p; ++j)
      if (mask_row[j] == 0.0) out[d][j] = s.xm.at(k, j);
  }
  return out;
}

ImputationResult impute_dataset(const MaskedDataset& data, const Model& model,
                                std::size_t K, PointEstimator estimator,
                                ObjectiveKind kind, std::uint64_t seed) {
  ImputationResult result;
  result.estimator = estimator;
  result.K_used = K;
  const RngStream root(seed);
  result.point_estimates.reserve(data.n());
  result.ess.reserve(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    std::vector<double> x_row(data.p());
    for (std::size_t j = 0; j < data.p(); ++j) x_row[j] = data.x_obs[i][j];
    RngStream row_rng = root.substream(i);
    RowImpute r =
        impute_row(x_row, data.mask[i], model, K, estimator, kind, row_rng);
    result.point_estimates.push_back(std::move(r.row));
    result.ess.push_back(r.ess);
  }
  return result;
}

std::vector<Matrix> multiple_impute_dataset(const MaskedDataset& data,
                                            const Model& model, std::size_t K,
                                            std::size_t draws,
                                            ObjectiveKind kind,
                                            std::uint64_t seed) {
  std::vector<Matrix> out(draws);
  for (Matrix& m : out) m.reserve(data.n());
  const RngStream root(seed);
  for (std::size_t i = 0; i < data.n(); ++i) {
    std::vector<double> x_row(data.p());
    for (std::size_t j = 0; j < data.p(); ++j) x_row[j] = data.x_obs[i][j];
    RngStream row_rng = root.substream(i);
    Matrix rows = multiple_impute_row(x_row, data.mask[i], model, K, draws,
                                      kind, row_rng);
    for (std::size_t d = 0; d < draws; ++d) out[d].push_back(std::move(rows[d]));
  }
  return out;
}

}  // namespace notmiwae
