#include "notmiwae/objective.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace notmiwae {
namespace {

Tensor complement(const Tensor& mask_rep) {
  // 1 - mask as a constant; the mask never carries gradients
  return add_scalar(neg(mask_rep), 1.0);
}

// One-hot rows for categorical observations; observed values must be in
// {1..C}. Zero-imputed missing cells (value 0) get an all-zero row; their
// log-probability is masked out downstream.
Tensor one_hot_classes(const Tensor& x_rep, std::size_t classes) {
  const std::size_t cells = x_rep.size();
  Tensor onehot(cells, classes, 0.0);
  const double* v = x_rep.data();
  for (std::size_t i = 0; i < cells; ++i) {
    const double c = v[i];
    if (c == 0.0) continue;
    if (c != std::floor(c) || c < 1.0 || c > static_cast<double>(classes))
      throw ValueError("categorical observation values must lie in 1.." +
                       std::to_string(classes) + ", got " + std::to_string(c));
    onehot.at(i, static_cast<std::size_t>(c) - 1) = 1.0;
  }
  return onehot;
}

const char* term_name(int i) {
  switch (i) {
    case 0: return "log p(s|x_mixed)";
    case 1: return "log p(x_obs|z)";
    case 2: return "log p(z)";
    case 3: return "log q(z|x_obs)";
  }
  return "?";
}

}  // namespace

Tensor mix_observed_missing(const Tensor& x_obs, const Tensor& mask,
                            const Tensor& x_sampled, std::size_t K) {
  if (!x_obs.same_shape(mask))
    throw ShapeError("mix: x_obs " + x_obs.shape_str() + " vs mask " +
                     mask.shape_str());
  if (x_sampled.rows() != x_obs.rows() * K || x_sampled.cols() != x_obs.cols())
    throw ShapeError("mix: x_sampled " + x_sampled.shape_str() +
                     " does not match " + std::to_string(x_obs.rows()) + "x" +
                     std::to_string(x_obs.cols()) + " repeated " +
                     std::to_string(K) + " times");
  Tensor x_obs_rep = repeat_rows(x_obs, K);
  Tensor mask_rep = repeat_rows(mask, K);
  return add(mul(mask_rep, x_obs_rep), mul(complement(mask_rep), x_sampled));
}

WeightMatrix log_weights(const Tensor& x_obs_zero_imputed, const Tensor& mask,
                         const Model& model, std::size_t K, RngStream& rng,
                         ObjectiveKind kind) {
  if (K < 1) throw ValueError("log_weights needs K >= 1");
  const std::size_t batch = x_obs_zero_imputed.rows();
  const std::size_t p = x_obs_zero_imputed.cols();

  WeightMatrix out;
  out.batch = batch;
  out.K = K;

  GaussianParams proposal = model.encode(x_obs_zero_imputed, mask);
  GaussianParams proposal_rep{repeat_rows(proposal.mean, K),
                              repeat_rows(proposal.std, K)};
  Tensor z = gaussian_rsample(proposal_rep, rng);
  out.z_samples = z;
  out.log_q_z = sum_rows(gaussian_log_prob(z, proposal_rep));
  out.log_p_z = sum_rows(standard_normal_log_prob(z));

  Tensor x_obs_rep = repeat_rows(x_obs_zero_imputed, K);
  Tensor mask_rep = repeat_rows(mask, K);

  Observation obs = model.decode(z);
  out.obs_kind = obs.kind;
  if (obs.kind == DecoderKind::categorical) {
    const std::size_t classes = model.decoder_config().class_count;
    Tensor soft = gumbel_softmax_rsample(obs.categorical, rng);
    Tensor values = model.class_values();
    out.xm_samples = reshape(matmul(soft, values), batch * K, p);
    Tensor lsm = log_softmax_rows(obs.categorical.logits);
    out.obs_mean = reshape(matmul(exp(lsm), values), batch * K, p);
    // log p of the observed class per cell, folded back to (B*K) x p
    Tensor onehot = one_hot_classes(x_obs_rep, classes);
    Tensor per_cell = reshape(sum_rows(mul(onehot, lsm)), batch * K, p);
    out.log_p_x_obs = sum_rows(mul(mask_rep, per_cell));
  } else {
    out.obs_mean = obs.gaussian.mean;
    out.obs_std = obs.gaussian.std;
    out.xm_samples = gaussian_rsample(obs.gaussian, rng);
    Tensor per_cell = gaussian_log_prob(x_obs_rep, obs.gaussian);
    out.log_p_x_obs = sum_rows(mul(mask_rep, per_cell));
  }

  Tensor log_w_col;
  if (kind == ObjectiveKind::not_miwae) {
    Tensor x_mixed =
        mix_observed_missing(x_obs_zero_imputed, mask, out.xm_samples, K);
    BernoulliLogits mask_model = model.mask_logits(x_mixed);
    out.log_p_s = sum_rows(bernoulli_log_prob(mask_rep, mask_model));
    log_w_col = add(out.log_p_s, out.log_p_x_obs);
  } else {
    log_w_col = out.log_p_x_obs;
  }
  log_w_col = sub(add(log_w_col, out.log_p_z), out.log_q_z);
  out.log_w = reshape(log_w_col, batch, K);
  return out;
}

Tensor bound(const WeightMatrix& weights) {
  Tensor lse = logsumexp_rows(weights.log_w);
  return add_scalar(mean_all(lse), -std::log(static_cast<double>(weights.K)));
}

// -------------------------------------------------------------------- Adam

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double learning_rate,
                             double beta1, double beta2, double eps)
    : params_(std::move(params)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  if (!(lr_ > 0.0)) throw ConfigError("learning rate must be positive");
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].size(), 0.0);
    v_[i].assign(params_[i].size(), 0.0);
  }
}

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& param = params_[i];
    const std::size_t n = param.size();
    const double* g = param.has_grad() ? param.grad().data() : nullptr;
    double* value = param.data();
    for (std::size_t j = 0; j < n; ++j) {
      const double gj = g ? g[j] : 0.0;
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gj;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gj * gj;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    param.zero_grad();
  }
}

// ------------------------------------------------------------------- train

namespace {

// Deterministic Fisher-Yates over the canonical order, so each epoch's
// permutation is a pure function of the stream state (a run resumed at an
// epoch boundary sees the same batches as an uninterrupted one).
void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

void check_finite_or_abort(const WeightMatrix& wm, double bound_value,
                           std::size_t iteration) {
  if (std::isfinite(bound_value)) return;
  const Tensor* terms[4] = {&wm.log_p_s, &wm.log_p_x_obs, &wm.log_p_z,
                            &wm.log_q_z};
  std::string bad;
  for (int i = 0; i < 4; ++i) {
    if (terms[i]->defined() && !all_finite(*terms[i])) {
      if (!bad.empty()) bad += ", ";
      bad += term_name(i);
    }
  }
  if (bad.empty()) bad = "logsumexp aggregation";
  throw NumericalError("non-finite bound at iteration " +
                       std::to_string(iteration) +
                       "; offending term(s): " + bad);
}

struct BatchSlices {
  Tensor x;
  Tensor mask;
};

BatchSlices slice_batch(const MaskedDataset& data,
                        const std::vector<std::size_t>& idx, std::size_t lo,
                        std::size_t count) {
  const std::size_t p = data.p();
  Tensor x(count, p), m(count, p);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t i = idx[lo + r];
    for (std::size_t j = 0; j < p; ++j) {
      x.at(r, j) = data.mask[i][j] == 1.0 ? data.x_obs[i][j] : 0.0;
      m.at(r, j) = data.mask[i][j];
    }
  }
  return {x, m};
}

}  // namespace

TrainResult train(Model& model, const MaskedDataset& data,
                  const TrainConfig& config, RngStream& rng) {
  if (config.K < 1) throw ConfigError("K must be >= 1");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  data.validate();
  const std::size_t n = data.n();
  const std::size_t batch = std::min<std::size_t>(config.batch_size, n);

  AdamOptimizer adam(model.params().all(), config.learning_rate);
  TrainResult result;
  result.trace.reserve(config.iterations);

  std::vector<std::size_t> idx(n);
  shuffle_indices(idx, rng);
  std::size_t pos = 0;

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 0; it < config.iterations; ++it) {
    if (pos + batch > n) {
      shuffle_indices(idx, rng);
      pos = 0;
    }
    BatchSlices slices = slice_batch(data, idx, pos, batch);
    pos += batch;

    Tape::active().reset();
    WeightMatrix wm = log_weights(slices.x, slices.mask, model, config.K, rng,
                                  config.objective);
    Tensor b = bound(wm);
    const double bound_value = b.item();
    check_finite_or_abort(wm, bound_value, it);

    Tensor loss = neg(b);
    Tape::active().backward(loss);
    adam.step();

    const double wall_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - start)
            .count();
    result.trace.push_back({it, bound_value, wall_ms});
  }
  return result;
}

void refit_encoder(Model& model, const Matrix& x_full, std::size_t iterations,
                   std::size_t K, std::size_t batch_size, double learning_rate,
                   RngStream& rng) {
  MaskedDataset full;
  full.x_obs = x_full;
  full.mask.assign(x_full.size(),
                   std::vector<double>(x_full.empty() ? 0 : x_full[0].size(), 1.0));

  const std::size_t n = full.n();
  const std::size_t batch = std::min<std::size_t>(batch_size, n);
  AdamOptimizer adam(model.params().gamma, learning_rate);

  std::vector<std::size_t> idx(n);
  shuffle_indices(idx, rng);
  std::size_t pos = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    if (pos + batch > n) {
      shuffle_indices(idx, rng);
      pos = 0;
    }
    BatchSlices slices = slice_batch(full, idx, pos, batch);
    pos += batch;
    Tape::active().reset();
    WeightMatrix wm = log_weights(slices.x, slices.mask, model, K, rng,
                                  ObjectiveKind::miwae);
    Tensor b = bound(wm);
    check_finite_or_abort(wm, b.item(), it);
    Tape::active().backward(neg(b));
    adam.step();
    // the decoder is frozen but still accumulates; drop those gradients
    for (Tensor& t : model.params().theta) t.zero_grad();
    for (Tensor& t : model.params().phi) t.zero_grad();
  }
}

}  // namespace notmiwae
