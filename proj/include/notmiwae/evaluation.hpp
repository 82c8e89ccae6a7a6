#pragma once

#include <cstdint>
#include <optional>

#include "notmiwae/imputation.hpp"
#include "notmiwae/missingness.hpp"
#include "notmiwae/model.hpp"

// Metrics: imputation RMSE/MSE over ground-truth missing cells, mask
// classification accuracy on fully observed data, importance-sampled test
// log-likelihood, and the mean-imputation baseline.
namespace notmiwae {

struct EvalReport {
  std::optional<double> imputation_rmse;
  std::optional<double> imputation_mse;
  std::optional<double> mask_accuracy;
  std::optional<double> test_loglik;  // per-example average
  std::size_t n_missing_cells = 0;
  std::uint64_t seed = 0;
};

// sqrt(mean over mask==0 cells of squared error). Values stored at observed
// positions of `imputed` never affect the result.
double imputation_rmse(const Matrix& imputed, const Matrix& truth,
                       const Matrix& mask);
double imputation_mse(const Matrix& imputed, const Matrix& truth,
                      const Matrix& mask);

// Feeds complete data through the mask model; predicts observed iff
// sigmoid(logit) >= 0.5 (ties observed) and reports mean agreement with the
// true mask over `affected` features (all features when empty).
double mask_accuracy(const Model& model, const Matrix& x_full,
                     const Matrix& true_mask,
                     const std::vector<std::size_t>& affected);

// Importance-sampled log-likelihood of a fully observed test matrix with the
// variational distribution as proposal: mean over rows of
// logsumexp_L[log p(x|z) + log p(z) - log q(z|x)] - ln L.
double test_loglik_is(const Model& model, const Matrix& x_test, std::size_t L,
                      std::uint64_t seed);

// Missing cells replaced by the per-feature mean of the observed cells.
Matrix mean_impute_baseline(const MaskedDataset& data);

}  // namespace notmiwae
