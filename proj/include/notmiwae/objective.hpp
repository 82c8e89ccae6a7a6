#pragma once

#include <cstdint>
#include <vector>

#include "notmiwae/missingness.hpp"
#include "notmiwae/model.hpp"

// The not-MIWAE importance-weighted lower bound on the joint likelihood of
// observed features and mask, the MIWAE (missing-at-random) baseline that
// drops the mask term, and the Adam training loop. All weight arithmetic is
// in log space; per-sample weights are
//   log w = log p(s|x_mixed) + log p(x_obs|z) + log p(z) - log q(z|x_obs)
// with z reparameterized from the proposal and x_m reparameterized from the
// observation model, so gradients flow through both sampling steps.
namespace notmiwae {

enum class ObjectiveKind { not_miwae, miwae };

struct TrainConfig {
  std::size_t K = 20;
  std::size_t batch_size = 16;
  std::size_t iterations = 20000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  ObjectiveKind objective = ObjectiveKind::not_miwae;
};

// Per-example, per-sample log importance weights with everything needed to
// reuse them for imputation: the sampled codes, the sampled completions and
// the decoder output they came from.
struct WeightMatrix {
  Tensor log_w;       // B x K
  Tensor z_samples;   // (B*K) x d
  Tensor xm_samples;  // (B*K) x p; observed positions carry sampled values too
  Tensor obs_mean;    // (B*K) x p, E[x|z] per sample
  Tensor obs_std;     // (B*K) x p, Gaussian observation models only
  DecoderKind obs_kind = DecoderKind::linear_ppca;
  // per-sample terms, (B*K) x 1, kept for diagnostics and tests
  Tensor log_p_s, log_p_x_obs, log_p_z, log_q_z;
  std::size_t batch = 0;
  std::size_t K = 0;
};

// mask .* x_obs + (1 - mask) .* x_sampled, broadcast over the K sample axis.
// No gradient reaches observed entries from x_sampled.
Tensor mix_observed_missing(const Tensor& x_obs, const Tensor& mask,
                            const Tensor& x_sampled, std::size_t K);

WeightMatrix log_weights(const Tensor& x_obs_zero_imputed, const Tensor& mask,
                         const Model& model, std::size_t K, RngStream& rng,
                         ObjectiveKind kind);

// Batch estimate of the bound: mean over examples of logsumexp_K(log w) - ln K.
Tensor bound(const WeightMatrix& weights);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Tensor> params, double learning_rate,
                         double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);
  // Applies one update from the accumulated gradients, then zeroes them.
  void step();
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TraceRow {
  std::size_t iteration;
  double bound;
  double wall_ms;
};

struct TrainResult {
  std::vector<TraceRow> trace;
};

// Fixed-iteration Adam training (no early stopping). Deterministic given the
// state of rng; a non-finite bound aborts with a diagnostic naming the
// offending term.
TrainResult train(Model& model, const MaskedDataset& data,
                  const TrainConfig& config, RngStream& rng);

// Re-trains the encoder on fully observed data with the decoder frozen
// (used before importance-sampled test log-likelihood).
void refit_encoder(Model& model, const Matrix& x_full, std::size_t iterations,
                   std::size_t K, std::size_t batch_size, double learning_rate,
                   RngStream& rng);

}  // namespace notmiwae
