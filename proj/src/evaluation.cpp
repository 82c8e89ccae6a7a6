#include "notmiwae/evaluation.hpp"

#include <cmath>

#include "notmiwae/objective.hpp"

namespace notmiwae {

double imputation_mse(const Matrix& imputed, const Matrix& truth,
                      const Matrix& mask) {
  if (imputed.size() != truth.size() || truth.size() != mask.size())
    throw ShapeError("imputation error: matrix row counts differ");
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (imputed[i].size() != truth[i].size() || mask[i].size() != truth[i].size())
      throw ShapeError("imputation error: ragged row " + std::to_string(i));
    for (std::size_t j = 0; j < truth[i].size(); ++j) {
      if (mask[i][j] != 0.0) continue;
      const double d = imputed[i][j] - truth[i][j];
      sq += d * d;
      ++count;
    }
  }
  if (count == 0) throw ValueError("imputation error undefined: no missing cells");
  return sq / static_cast<double>(count);
}

double imputation_rmse(const Matrix& imputed, const Matrix& truth,
                       const Matrix& mask) {
  return std::sqrt(imputation_mse(imputed, truth, mask));
}

double mask_accuracy(const Model& model, const Matrix& x_full,
                     const Matrix& true_mask,
                     const std::vector<std::size_t>& affected) {
  const std::size_t n = x_full.size();
  const std::size_t p = n ? x_full.front().size() : 0;
  Tensor x(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) x.at(i, j) = x_full[i][j];
  NoGrad pause;
  Tensor logits = model.mask_logits(x).logits;

  std::vector<bool> use(p, affected.empty());
  for (std::size_t j : affected) {
    if (j >= p) throw ValueError("affected feature index out of range");
    use[j] = true;
  }
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (!use[j]) continue;
      const double predicted = logits.at(i, j) >= 0.0 ? 1.0 : 0.0;
      agree += predicted == true_mask[i][j] ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw ValueError("mask accuracy over an empty feature set");
  return static_cast<double>(agree) / static_cast<double>(total);
}

double test_loglik_is(const Model& model, const Matrix& x_test, std::size_t L,
                      std::uint64_t seed) {
  if (L < 1) throw ValueError("test_loglik_is needs L >= 1");
  const std::size_t n = x_test.size();
  const std::size_t p = n ? x_test.front().size() : 0;
  NoGrad pause;
  const RngStream root(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x(1, p), mask(1, p, 1.0);
    for (std::size_t j = 0; j < p; ++j) x.at(0, j) = x_test[i][j];
    RngStream rng = root.substream(i);
    // fully observed rows make the MAR weights the classic IS estimate
    WeightMatrix wm = log_weights(x, mask, model, L, rng, ObjectiveKind::miwae);
    total += bound(wm).item();
  }
  return total / static_cast<double>(n);
}

Matrix mean_impute_baseline(const MaskedDataset& data) {
  const std::size_t n = data.n(), p = data.p();
  std::vector<double> mean(p, 0.0), count(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (data.mask[i][j] == 1.0) {
        mean[j] += data.x_obs[i][j];
        count[j] += 1.0;
      }
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (count[j] == 0.0)
      throw ValueError("feature " + std::to_string(j) +
                       " has no observed values; mean imputation undefined");
    mean[j] /= count[j];
  }
  Matrix out = data.x_obs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (data.mask[i][j] == 0.0) out[i][j] = mean[j];
  return out;
}

}  // namespace notmiwae
