#pragma once

#include <optional>
#include <string>
#include <vector>

#include "notmiwae/rng.hpp"
#include "notmiwae/tensor.hpp"

// Dataset ingestion, standardization, zero-imputation and the missingness
// mechanism simulators (MCAR, deterministic threshold self-masking, logistic
// clipping). Matrices are row-major n x p; mask entries are 1 = observed,
// 0 = missing.
namespace notmiwae {

using Matrix = std::vector<std::vector<double>>;

struct MaskedDataset {
  std::optional<Matrix> x_full;  // ground truth, simulation mode only
  Matrix x_obs;                  // missing entries carried as 0
  Matrix mask;                   // entries in {0, 1}
  std::vector<double> feature_means;
  std::vector<double> feature_stds;
  bool standardized = false;

  std::size_t n() const { return x_obs.size(); }
  std::size_t p() const { return x_obs.empty() ? 0 : x_obs.front().size(); }
  std::size_t missing_cells() const;
  void validate() const;
};

enum class StatsSource { complete_data, observed_only };

// Numeric CSV; empty cells mark missing values. Returns the value matrix
// (missing as 0) and the presence mask.
struct CsvData {
  Matrix values;
  Matrix mask;
  std::vector<std::string> header;
};
CsvData load_csv(const std::string& path, bool header);
void write_csv(const std::string& path, const Matrix& m,
               const Matrix* mask = nullptr,
               const std::vector<std::string>* header = nullptr);

// (x - mean) / std per feature, in place on x_obs (and x_full when present).
// complete_data reads statistics from the ground truth (simulation protocol:
// data are standardized before missingness is introduced); observed_only uses
// the observed cells of each feature. Throws on constant features.
void standardize(MaskedDataset& data, StatsSource source);
// Inverse affine transform of a single value of feature j.
double destandardize_value(const MaskedDataset& data, std::size_t j, double v);

// Deterministic threshold self-masking: s_ij = 0 iff j is affected and
// x_ij > mean_j + offset * std_j (statistics of x_full itself).
Matrix mnar_threshold_mask(const Matrix& x_full,
                           const std::vector<std::size_t>& affected,
                           double offset);
// Default affected set: the first ceil(p/2) features.
std::vector<std::size_t> first_half_features(std::size_t p);

// Bernoulli cell mask with Pr(observed) = sigmoid(w * (x - b)).
Matrix mnar_logistic_mask(const Matrix& x_full, double w, double b,
                          RngStream& rng);

// i.i.d. Bernoulli(1 - rate) observation mask.
Matrix mcar_mask(std::size_t n, std::size_t p, double rate, RngStream& rng);

// n samples of N(mean, cov) via Cholesky; cov must be SPD.
Matrix sample_mvn(std::size_t n, const std::vector<double>& mean,
                  const Matrix& cov, RngStream& rng);

// Encoder input: x .* mask as a constant tensor (gradient never reaches
// missing positions through this path).
Tensor zero_impute(const MaskedDataset& data);
Tensor mask_tensor(const MaskedDataset& data);

// Assembles a dataset from a value matrix and a mask, zeroing missing cells
// and keeping the full matrix as ground truth when requested.
MaskedDataset make_masked(Matrix x_full, Matrix mask, bool keep_truth);

}  // namespace notmiwae
