#pragma once

#include <string>
#include <vector>

#include "notmiwae/distributions.hpp"
#include "notmiwae/rng.hpp"
#include "notmiwae/tensor.hpp"

// Encoder (inference network), decoder (observation model) and mask model,
// composed into the not-MIWAE generative structure: z -> x -> s. Parameters
// live in three disjoint collections: theta (decoder), phi (mask model),
// gamma (encoder).
namespace notmiwae {

enum class Activation { tanh, relu };
enum class DecoderKind { mlp_gaussian, linear_ppca, categorical };
enum class VarianceSharing { per_feature, shared_scalar };
enum class MissingKind { fixed, self_masking, self_masking_known, agnostic };

struct EncoderConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{128, 128};  // empty = linear encoder
  Activation activation = Activation::tanh;
  std::size_t latent_dim = 0;
  double std_floor = 0.01;
};

struct DecoderConfig {
  DecoderKind kind = DecoderKind::linear_ppca;
  std::size_t latent_dim = 0;
  std::size_t data_dim = 0;
  std::vector<std::size_t> hidden{128, 128};  // mlp_gaussian only
  Activation activation = Activation::tanh;
  VarianceSharing variance = VarianceSharing::per_feature;
  std::size_t class_count = 0;   // categorical only
  double temperature = 0.5;      // gumbel-softmax relaxation
  double std_floor = 0.01;
};

// Declarative mask-model choice. Richer structured mask models (e.g.
// invariant/equivariant networks for image-like data) would extend this enum
// behind mask_logits().
//   fixed:              logits = fixed_w * (x_j - fixed_b), no parameters
//   self_masking:       logits = a_j * x_j + b_j
//   self_masking_known: logits = sign_j * softplus(a_raw_j) * x_j + b_j
//   agnostic:           logits = x * W + b, one dense linear layer over all features
struct MissingModelSpec {
  MissingKind kind = MissingKind::self_masking;
  double fixed_w = 0.0;
  double fixed_b = 0.0;
  std::vector<int> known_signs;  // one of {-1, +1} per feature
};

struct ModelParams {
  std::vector<Tensor> theta;
  std::vector<Tensor> phi;
  std::vector<Tensor> gamma;
  std::vector<Tensor> all() const;
  std::size_t count() const { return theta.size() + phi.size() + gamma.size(); }
};

// decode() result: Gaussian for mlp_gaussian / linear_ppca, relaxed
// categorical otherwise.
struct Observation {
  DecoderKind kind = DecoderKind::linear_ppca;
  GaussianParams gaussian;          // valid unless kind == categorical
  CategoricalLogits categorical;    // logits (N*p) x C
  std::size_t batch = 0;            // N
  std::size_t features = 0;         // p
};

class Model {
 public:
  Model(EncoderConfig enc, DecoderConfig dec, MissingModelSpec miss);

  // Glorot-uniform weights, zero biases, mask-model raw slopes at 0.01.
  void init_params(RngStream& rng);

  const EncoderConfig& encoder_config() const { return enc_; }
  const DecoderConfig& decoder_config() const { return dec_; }
  const MissingModelSpec& missing_spec() const { return miss_; }

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  // q(z | x_obs): x must already be zero-imputed; the mask is accepted for
  // interface symmetry and shape checking only (the proposal conditions on
  // the zero-imputed observed vector).
  GaussianParams encode(const Tensor& x_zero_imputed, const Tensor& mask) const;

  Observation decode(const Tensor& z) const;

  BernoulliLogits mask_logits(const Tensor& x_mixed) const;

  // Class-value column (values 1..C) used to project relaxed categorical
  // samples onto the data scale.
  Tensor class_values() const;

 private:
  EncoderConfig enc_;
  DecoderConfig dec_;
  MissingModelSpec miss_;
  ModelParams params_;

  struct Dense {
    Tensor W;
    Tensor b;
  };
  std::vector<Dense> enc_hidden_;
  Dense enc_mu_, enc_std_;
  std::vector<Dense> dec_hidden_;
  Dense dec_mu_, dec_std_;
  Tensor dec_std_raw_;  // shared_scalar variance
  Dense miss_linear_;   // agnostic W/b or self-masking a/b rows
  Tensor miss_signs_;   // constant +-1 row (self_masking_known)

  Tensor mlp_forward(const Tensor& x, const std::vector<Dense>& stack) const;
};

// Dataset-level affine transform recorded next to the parameters so imputed
// values can be mapped back to input units.
struct CheckpointStats {
  std::vector<double> means;
  std::vector<double> stds;
  std::string standardize_mode = "none";
};

void save_checkpoint(const std::string& path, const Model& model,
                     const CheckpointStats& stats);
Model load_checkpoint(const std::string& path, CheckpointStats* stats = nullptr);

const char* to_string(Activation a);
const char* to_string(DecoderKind k);
const char* to_string(VarianceSharing v);
const char* to_string(MissingKind k);
Activation activation_from_string(const std::string& s);
DecoderKind decoder_kind_from_string(const std::string& s);
VarianceSharing variance_from_string(const std::string& s);
MissingKind missing_kind_from_string(const std::string& s);

}  // namespace notmiwae
