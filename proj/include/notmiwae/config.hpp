#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "notmiwae/missingness.hpp"
#include "notmiwae/model.hpp"
#include "notmiwae/objective.hpp"

// Experiment configuration: a single JSON document covering data source,
// missingness mechanism, model, training, imputation and sweep grids. Every
// field has a serialized default and the document round-trips losslessly.
namespace notmiwae {

struct SyntheticSpec {
  std::string kind = "gaussian";  // gaussian | squashed_gaussian
  std::size_t n = 2000;
  std::size_t p = 2;
  std::vector<double> mean;  // gaussian; defaults to zeros
  Matrix cov;                // gaussian; defaults to identity
  // squashed_gaussian: x = sigmoid(scale * (z * loadings) + offset + noise_std * eps)
  Matrix loadings;  // latent x p
  double noise_std = 0.1;
  double squash_scale = 1.0;
  double squash_offset = 0.0;
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | csv
  std::string csv_path;
  bool csv_header = false;
  SyntheticSpec synthetic;
  // applied by `simulate` before the mechanism: none | complete | observed_only
  std::string standardize = "complete";
};

struct MechanismConfig {
  std::string kind = "threshold";  // none | mcar | threshold | logistic
  double offset = 0.0;             // threshold cutoff, in units of std
  std::vector<std::size_t> affected;  // empty = first ceil(p/2) features
  double w = -50.0;                // logistic slope
  double b = 0.75;                 // logistic midpoint
  double rate = 0.2;               // mcar missing rate
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  MissingModelSpec missing;
};

struct ImputeConfig {
  std::size_t K = 10000;
  std::string estimator = "snis_mean_rao_blackwell";
  std::size_t draws = 0;  // 0 = single imputation only
  std::size_t histogram_bins = 50;
};

struct EvalConfig {
  bool refit_encoder = false;
  std::size_t test_loglik_L = 0;  // 0 = skip the log-likelihood estimate
};

struct SweepConfig {
  std::vector<double> offsets{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> models{"self_masking_known", "miwae"};
  std::vector<std::uint64_t> seeds{1, 2};
};

struct ExperimentConfig {
  DataConfig data;
  MechanismConfig mechanism;
  ModelConfig model;
  TrainConfig training;
  ImputeConfig imputation;
  EvalConfig evaluation;
  SweepConfig sweep;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
};

ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& config);
std::string config_to_json_string(const ExperimentConfig& config);
ExperimentConfig config_from_json_string(const std::string& text);

// Named presets: "fig1b", "ppca", "uci", "clipping".
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

const char* to_string(ObjectiveKind k);
ObjectiveKind objective_from_string(const std::string& s);

// Fills zero encoder/decoder dims from the dataset width (latent defaults to
// p - 1) and validates the assembled model configuration.
void resolve_model_dims(ExperimentConfig& config, std::size_t p);

}  // namespace notmiwae
