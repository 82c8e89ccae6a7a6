#include "notmiwae/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace notmiwae {

using nlohmann::json;

std::vector<Tensor> ModelParams::all() const {
  std::vector<Tensor> out;
  out.reserve(count());
  for (const auto& t : theta) out.push_back(t);
  for (const auto& t : phi) out.push_back(t);
  for (const auto& t : gamma) out.push_back(t);
  return out;
}

namespace {

void glorot_fill(Tensor& w, RngStream& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  double* v = w.data();
  for (std::size_t i = 0; i < w.size(); ++i)
    v[i] = (2.0 * rng.uniform() - 1.0) * limit;
}

void const_fill(Tensor& t, double v) {
  std::fill_n(t.data(), t.size(), v);
}

}  // namespace

Model::Model(EncoderConfig enc, DecoderConfig dec, MissingModelSpec miss)
    : enc_(std::move(enc)), dec_(std::move(dec)), miss_(std::move(miss)) {
  if (enc_.input_dim == 0 || enc_.latent_dim == 0)
    throw ConfigError("encoder needs input_dim >= 1 and latent_dim >= 1");
  if (dec_.data_dim != enc_.input_dim || dec_.latent_dim != enc_.latent_dim)
    throw ConfigError("decoder dims (" + std::to_string(dec_.latent_dim) + "->" +
                      std::to_string(dec_.data_dim) + ") do not match encoder (" +
                      std::to_string(enc_.input_dim) + "->" +
                      std::to_string(enc_.latent_dim) + ")");
  if (dec_.kind == DecoderKind::linear_ppca) {
    dec_.hidden.clear();
    dec_.variance = VarianceSharing::shared_scalar;
  }
  if (dec_.kind == DecoderKind::categorical) {
    if (dec_.class_count < 2)
      throw ConfigError("categorical decoder needs class_count >= 2");
    dec_.hidden.clear();  // linear mapping to logits
  }
  if (miss_.kind == MissingKind::self_masking_known) {
    if (miss_.known_signs.size() != dec_.data_dim)
      throw ConfigError("self_masking_known needs one sign per feature");
    for (int s : miss_.known_signs)
      if (s != 1 && s != -1)
        throw ConfigError("known_signs entries must be -1 or +1");
  }

  const std::size_t p = enc_.input_dim;
  const std::size_t d = enc_.latent_dim;

  auto make_dense = [](std::size_t in, std::size_t out) {
    Dense dn{Tensor(in, out), Tensor(1, out)};
    dn.W.set_requires_grad(true);
    dn.b.set_requires_grad(true);
    return dn;
  };

  // encoder (gamma)
  std::size_t in = p;
  for (std::size_t width : enc_.hidden) {
    enc_hidden_.push_back(make_dense(in, width));
    in = width;
  }
  enc_mu_ = make_dense(in, d);
  enc_std_ = make_dense(in, d);
  for (auto& dn : enc_hidden_) {
    params_.gamma.push_back(dn.W);
    params_.gamma.push_back(dn.b);
  }
  params_.gamma.push_back(enc_mu_.W);
  params_.gamma.push_back(enc_mu_.b);
  params_.gamma.push_back(enc_std_.W);
  params_.gamma.push_back(enc_std_.b);

  // decoder (theta)
  in = d;
  for (std::size_t width : dec_.hidden) {
    dec_hidden_.push_back(make_dense(in, width));
    in = width;
  }
  const std::size_t out_width =
      dec_.kind == DecoderKind::categorical ? p * dec_.class_count : p;
  dec_mu_ = make_dense(in, out_width);
  for (auto& dn : dec_hidden_) {
    params_.theta.push_back(dn.W);
    params_.theta.push_back(dn.b);
  }
  params_.theta.push_back(dec_mu_.W);
  params_.theta.push_back(dec_mu_.b);
  if (dec_.kind != DecoderKind::categorical) {
    if (dec_.variance == VarianceSharing::per_feature) {
      dec_std_ = make_dense(in, p);
      params_.theta.push_back(dec_std_.W);
      params_.theta.push_back(dec_std_.b);
    } else {
      dec_std_raw_ = Tensor(1, 1);
      dec_std_raw_.set_requires_grad(true);
      params_.theta.push_back(dec_std_raw_);
    }
  }

  // missing model (phi)
  switch (miss_.kind) {
    case MissingKind::fixed:
      break;
    case MissingKind::self_masking:
    case MissingKind::self_masking_known:
      miss_linear_ = Dense{Tensor(1, p), Tensor(1, p)};
      miss_linear_.W.set_requires_grad(true);
      miss_linear_.b.set_requires_grad(true);
      params_.phi.push_back(miss_linear_.W);
      params_.phi.push_back(miss_linear_.b);
      if (miss_.kind == MissingKind::self_masking_known) {
        std::vector<double> signs(p);
        for (std::size_t j = 0; j < p; ++j)
          signs[j] = static_cast<double>(miss_.known_signs[j]);
        miss_signs_ = Tensor::row(std::move(signs));
      }
      break;
    case MissingKind::agnostic:
      miss_linear_ = make_dense(p, p);
      params_.phi.push_back(miss_linear_.W);
      params_.phi.push_back(miss_linear_.b);
      break;
  }
}

void Model::init_params(RngStream& rng) {
  // gamma, then theta, then phi: the draw order is part of run determinism
  for (auto& dn : enc_hidden_) {
    glorot_fill(dn.W, rng);
    const_fill(dn.b, 0.0);
  }
  glorot_fill(enc_mu_.W, rng);
  const_fill(enc_mu_.b, 0.0);
  glorot_fill(enc_std_.W, rng);
  const_fill(enc_std_.b, 0.0);

  for (auto& dn : dec_hidden_) {
    glorot_fill(dn.W, rng);
    const_fill(dn.b, 0.0);
  }
  glorot_fill(dec_mu_.W, rng);
  const_fill(dec_mu_.b, 0.0);
  if (dec_.kind != DecoderKind::categorical) {
    if (dec_.variance == VarianceSharing::per_feature) {
      glorot_fill(dec_std_.W, rng);
      const_fill(dec_std_.b, 0.0);
    } else {
      const_fill(dec_std_raw_, 0.0);
    }
  }

  switch (miss_.kind) {
    case MissingKind::fixed:
      break;
    case MissingKind::self_masking:
    case MissingKind::self_masking_known:
      const_fill(miss_linear_.W, 0.01);
      const_fill(miss_linear_.b, 0.0);
      break;
    case MissingKind::agnostic:
      glorot_fill(miss_linear_.W, rng);
      const_fill(miss_linear_.b, 0.0);
      break;
  }
}

Tensor Model::mlp_forward(const Tensor& x, const std::vector<Dense>& stack) const {
  Tensor h = x;
  const Activation act =
      &stack == &enc_hidden_ ? enc_.activation : dec_.activation;
  for (const Dense& dn : stack) {
    Tensor lin = add(matmul(h, dn.W), dn.b);
    h = act == Activation::tanh ? tanh(lin) : relu(lin);
  }
  return h;
}

GaussianParams Model::encode(const Tensor& x_zero_imputed, const Tensor& mask) const {
  if (x_zero_imputed.cols() != enc_.input_dim)
    throw ShapeError("encode: input " + x_zero_imputed.shape_str() +
                     " does not match input_dim " + std::to_string(enc_.input_dim));
  if (!mask.same_shape(x_zero_imputed))
    throw ShapeError("encode: mask " + mask.shape_str() + " vs input " +
                     x_zero_imputed.shape_str());
  Tensor h = mlp_forward(x_zero_imputed, enc_hidden_);
  Tensor mu = add(matmul(h, enc_mu_.W), enc_mu_.b);
  Tensor raw = add(matmul(h, enc_std_.W), enc_std_.b);
  return GaussianParams{mu, add_scalar(softplus(raw), enc_.std_floor)};
}

Observation Model::decode(const Tensor& z) const {
  if (z.cols() != dec_.latent_dim)
    throw ShapeError("decode: z " + z.shape_str() + " does not match latent_dim " +
                     std::to_string(dec_.latent_dim));
  const std::size_t n = z.rows();
  const std::size_t p = dec_.data_dim;
  Observation obs;
  obs.kind = dec_.kind;
  obs.batch = n;
  obs.features = p;
  if (dec_.kind == DecoderKind::categorical) {
    Tensor logits = add(matmul(z, dec_mu_.W), dec_mu_.b);
    obs.categorical =
        CategoricalLogits{reshape(logits, n * p, dec_.class_count), dec_.temperature};
    return obs;
  }
  Tensor h = mlp_forward(z, dec_hidden_);
  Tensor mean = add(matmul(h, dec_mu_.W), dec_mu_.b);
  Tensor std;
  if (dec_.variance == VarianceSharing::per_feature) {
    Tensor raw = add(matmul(h, dec_std_.W), dec_std_.b);
    std = add_scalar(softplus(raw), dec_.std_floor);
  } else {
    std = broadcast_to(add_scalar(softplus(dec_std_raw_), dec_.std_floor), n, p);
  }
  obs.gaussian = GaussianParams{mean, std};
  return obs;
}

BernoulliLogits Model::mask_logits(const Tensor& x_mixed) const {
  if (x_mixed.cols() != dec_.data_dim)
    throw ShapeError("mask_logits: input " + x_mixed.shape_str() +
                     " does not match data_dim " + std::to_string(dec_.data_dim));
  switch (miss_.kind) {
    case MissingKind::fixed:
      return BernoulliLogits{
          mul_scalar(add_scalar(x_mixed, -miss_.fixed_b), miss_.fixed_w)};
    case MissingKind::self_masking:
      return BernoulliLogits{add(mul(x_mixed, miss_linear_.W), miss_linear_.b)};
    case MissingKind::self_masking_known: {
      Tensor slope = mul(miss_signs_, softplus(miss_linear_.W));
      return BernoulliLogits{add(mul(x_mixed, slope), miss_linear_.b)};
    }
    case MissingKind::agnostic:
      return BernoulliLogits{add(matmul(x_mixed, miss_linear_.W), miss_linear_.b)};
  }
  throw ConfigError("unknown missing-model kind");
}

Tensor Model::class_values() const {
  std::vector<double> vals(dec_.class_count);
  for (std::size_t c = 0; c < dec_.class_count; ++c)
    vals[c] = static_cast<double>(c + 1);
  return Tensor::column(std::move(vals));
}

// ---------------------------------------------------------------- enums

const char* to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}
const char* to_string(DecoderKind k) {
  switch (k) {
    case DecoderKind::mlp_gaussian: return "mlp_gaussian";
    case DecoderKind::linear_ppca: return "linear_ppca";
    case DecoderKind::categorical: return "categorical";
  }
  return "?";
}
const char* to_string(VarianceSharing v) {
  return v == VarianceSharing::per_feature ? "per_feature" : "shared_scalar";
}
const char* to_string(MissingKind k) {
  switch (k) {
    case MissingKind::fixed: return "fixed";
    case MissingKind::self_masking: return "self_masking";
    case MissingKind::self_masking_known: return "self_masking_known";
    case MissingKind::agnostic: return "agnostic";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation: " + s);
}
DecoderKind decoder_kind_from_string(const std::string& s) {
  if (s == "mlp_gaussian") return DecoderKind::mlp_gaussian;
  if (s == "linear_ppca") return DecoderKind::linear_ppca;
  if (s == "categorical") return DecoderKind::categorical;
  throw ConfigError("unknown decoder kind: " + s);
}
VarianceSharing variance_from_string(const std::string& s) {
  if (s == "per_feature") return VarianceSharing::per_feature;
  if (s == "shared_scalar") return VarianceSharing::shared_scalar;
  throw ConfigError("unknown variance sharing: " + s);
}
MissingKind missing_kind_from_string(const std::string& s) {
  if (s == "fixed") return MissingKind::fixed;
  if (s == "self_masking") return MissingKind::self_masking;
  if (s == "self_masking_known") return MissingKind::self_masking_known;
  if (s == "agnostic") return MissingKind::agnostic;
  throw ConfigError("unknown missing-model kind: " + s);
}

// ------------------------------------------------------------ checkpoint

namespace {

json encoder_to_json(const EncoderConfig& c) {
  return json{{"input_dim", c.input_dim},
              {"hidden", c.hidden},
              {"activation", to_string(c.activation)},
              {"latent_dim", c.latent_dim},
              {"std_floor", c.std_floor}};
}
EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.activation = activation_from_string(j.at("activation").get<std::string>());
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.std_floor = j.at("std_floor").get<double>();
  return c;
}

json decoder_to_json(const DecoderConfig& c) {
  return json{{"kind", to_string(c.kind)},
              {"latent_dim", c.latent_dim},
              {"data_dim", c.data_dim},
              {"hidden", c.hidden},
              {"activation", to_string(c.activation)},
              {"variance", to_string(c.variance)},
              {"class_count", c.class_count},
              {"temperature", c.temperature},
              {"std_floor", c.std_floor}};
}
DecoderConfig decoder_from_json(const json& j) {
  DecoderConfig c;
  c.kind = decoder_kind_from_string(j.at("kind").get<std::string>());
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.data_dim = j.at("data_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.activation = activation_from_string(j.at("activation").get<std::string>());
  c.variance = variance_from_string(j.at("variance").get<std::string>());
  c.class_count = j.at("class_count").get<std::size_t>();
  c.temperature = j.at("temperature").get<double>();
  c.std_floor = j.at("std_floor").get<double>();
  return c;
}

json missing_to_json(const MissingModelSpec& c) {
  return json{{"kind", to_string(c.kind)},
              {"fixed_w", c.fixed_w},
              {"fixed_b", c.fixed_b},
              {"known_signs", c.known_signs}};
}
MissingModelSpec missing_from_json(const json& j) {
  MissingModelSpec c;
  c.kind = missing_kind_from_string(j.at("kind").get<std::string>());
  c.fixed_w = j.at("fixed_w").get<double>();
  c.fixed_b = j.at("fixed_b").get<double>();
  c.known_signs = j.at("known_signs").get<std::vector<int>>();
  return c;
}

json collection_to_json(const std::vector<Tensor>& ts) {
  json arr = json::array();
  for (const Tensor& t : ts) {
    arr.push_back(json{{"rows", t.rows()},
                       {"cols", t.cols()},
                       {"values", t.values()}});
  }
  return arr;
}

void collection_from_json(const json& arr, std::vector<Tensor>& ts,
                          const char* name) {
  if (arr.size() != ts.size())
    throw IoError(std::string("checkpoint: ") + name + " has " +
                  std::to_string(arr.size()) + " tensors, model expects " +
                  std::to_string(ts.size()));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const json& tj = arr[i];
    const auto rows = tj.at("rows").get<std::size_t>();
    const auto cols = tj.at("cols").get<std::size_t>();
    auto values = tj.at("values").get<std::vector<double>>();
    if (rows != ts[i].rows() || cols != ts[i].cols())
      throw IoError(std::string("checkpoint: ") + name + "[" +
                    std::to_string(i) + "] shape mismatch");
    std::copy(values.begin(), values.end(), ts[i].data());
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const CheckpointStats& stats) {
  json j{{"format_version", 1},
         {"encoder", encoder_to_json(model.encoder_config())},
         {"decoder", decoder_to_json(model.decoder_config())},
         {"missing_model", missing_to_json(model.missing_spec())},
         {"params",
          json{{"theta", collection_to_json(model.params().theta)},
               {"phi", collection_to_json(model.params().phi)},
               {"gamma", collection_to_json(model.params().gamma)}}},
         {"standardization",
          json{{"means", stats.means},
               {"stds", stats.stds},
               {"mode", stats.standardize_mode}}}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

Model load_checkpoint(const std::string& path, CheckpointStats* stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.at("format_version").get<int>() != 1)
    throw IoError("unsupported checkpoint version in " + path);
  Model model(encoder_from_json(j.at("encoder")),
              decoder_from_json(j.at("decoder")),
              missing_from_json(j.at("missing_model")));
  const json& params = j.at("params");
  collection_from_json(params.at("theta"), model.params().theta, "theta");
  collection_from_json(params.at("phi"), model.params().phi, "phi");
  collection_from_json(params.at("gamma"), model.params().gamma, "gamma");
  if (stats) {
    const json& s = j.at("standardization");
    stats->means = s.at("means").get<std::vector<double>>();
    stats->stds = s.at("stds").get<std::vector<double>>();
    stats->standardize_mode = s.at("mode").get<std::string>();
  }
  return model;
}

}  // namespace notmiwae
