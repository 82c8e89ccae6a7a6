#pragma once

#include <cstdint>
#include <vector>

#include "notmiwae/missingness.hpp"
#include "notmiwae/objective.hpp"

// Post-training single and multiple imputation by self-normalized importance
// sampling. The weights are the training weights; alpha_k = w_k / sum(w).
// Rows are processed independently with per-row substreams derived from
// (seed, row index), so results do not depend on processing order.
namespace notmiwae {

enum class PointEstimator { snis_mean, snis_mean_rao_blackwell, snis_median };

const char* to_string(PointEstimator e);
PointEstimator estimator_from_string(const std::string& s);

struct ImputationResult {
  Matrix point_estimates;  // observed positions equal the input exactly
  PointEstimator estimator = PointEstimator::snis_mean_rao_blackwell;
  std::size_t K_used = 0;
  std::vector<double> ess;  // 1 / sum(alpha^2); rows without missing get K
};

// Normalized weights from a 1 x K log-weight tensor, max-subtracted.
// Throws NumericalError when every weight is zero.
std::vector<double> normalize_weights(const Tensor& log_w_row);
double effective_sample_size(const std::vector<double>& alpha);

// Median of sum_k alpha_k N(mu_k, sigma_k^2) by bisection on
// [min(mu - 6 sigma), max(mu + 6 sigma)] to the given absolute tolerance.
double mixture_gaussian_median(const std::vector<double>& alpha,
                               const std::vector<double>& mu,
                               const std::vector<double>& sigma,
                               double tol = 1e-8);

struct RowImpute {
  std::vector<double> row;
  double ess;
};

RowImpute impute_row(const std::vector<double>& x_row,
                     const std::vector<double>& mask_row, const Model& model,
                     std::size_t K, PointEstimator estimator,
                     ObjectiveKind kind, RngStream& rng);

// Sampling importance resampling: `draws` completed rows, candidate k chosen
// with probability alpha_k, with replacement.
Matrix multiple_impute_row(const std::vector<double>& x_row,
                           const std::vector<double>& mask_row,
                           const Model& model, std::size_t K, std::size_t draws,
                           ObjectiveKind kind, RngStream& rng);

ImputationResult impute_dataset(const MaskedDataset& data, const Model& model,
                                std::size_t K, PointEstimator estimator,
                                ObjectiveKind kind, std::uint64_t seed);

// One full matrix per draw.
std::vector<Matrix> multiple_impute_dataset(const MaskedDataset& data,
                                            const Model& model, std::size_t K,
                                            std::size_t draws,
                                            ObjectiveKind kind,
                                            std::uint64_t seed);

}  // namespace notmiwae
