#include "notmiwae/config.hpp"

#include <fstream>

#include <json.hpp>

namespace notmiwae {

using nlohmann::json;

const char* to_string(ObjectiveKind k) {
  return k == ObjectiveKind::not_miwae ? "not_miwae" : "miwae";
}

ObjectiveKind objective_from_string(const std::string& s) {
  if (s == "not_miwae") return ObjectiveKind::not_miwae;
  if (s == "miwae") return ObjectiveKind::miwae;
  throw ConfigError("unknown objective kind: " + s);
}

namespace {

json matrix_to_json(const Matrix& m) {
  json arr = json::array();
  for (const auto& row : m) arr.push_back(row);
  return arr;
}
Matrix matrix_from_json(const json& j) {
  Matrix m;
  for (const auto& row : j) m.push_back(row.get<std::vector<double>>());
  return m;
}

json to_json(const SyntheticSpec& s) {
  return json{{"kind", s.kind},
              {"n", s.n},
              {"p", s.p},
              {"mean", s.mean},
              {"cov", matrix_to_json(s.cov)},
              {"loadings", matrix_to_json(s.loadings)},
              {"noise_std", s.noise_std},
              {"squash_scale", s.squash_scale},
              {"squash_offset", s.squash_offset}};
}
SyntheticSpec synthetic_from_json(const json& j) {
  SyntheticSpec s;
  s.kind = j.value("kind", s.kind);
  s.n = j.value("n", s.n);
  s.p = j.value("p", s.p);
  s.mean = j.value("mean", s.mean);
  if (j.contains("cov")) s.cov = matrix_from_json(j.at("cov"));
  if (j.contains("loadings")) s.loadings = matrix_from_json(j.at("loadings"));
  s.noise_std = j.value("noise_std", s.noise_std);
  s.squash_scale = j.value("squash_scale", s.squash_scale);
  s.squash_offset = j.value("squash_offset", s.squash_offset);
  return s;
}

json to_json(const DataConfig& d) {
  return json{{"source", d.source},
              {"csv_path", d.csv_path},
              {"csv_header", d.csv_header},
              {"synthetic", to_json(d.synthetic)},
              {"standardize", d.standardize}};
}
DataConfig data_from_json(const json& j) {
  DataConfig d;
  d.source = j.value("source", d.source);
  d.csv_path = j.value("csv_path", d.csv_path);
  d.csv_header = j.value("csv_header", d.csv_header);
  if (j.contains("synthetic")) d.synthetic = synthetic_from_json(j.at("synthetic"));
  d.standardize = j.value("standardize", d.standardize);
  return d;
}

json to_json(const MechanismConfig& m) {
  return json{{"kind", m.kind},   {"offset", m.offset}, {"affected", m.affected},
              {"w", m.w},         {"b", m.b},           {"rate", m.rate}};
}
MechanismConfig mechanism_from_json(const json& j) {
  MechanismConfig m;
  m.kind = j.value("kind", m.kind);
  m.offset = j.value("offset", m.offset);
  m.affected = j.value("affected", m.affected);
  m.w = j.value("w", m.w);
  m.b = j.value("b", m.b);
  m.rate = j.value("rate", m.rate);
  return m;
}

json to_json(const EncoderConfig& c) {
  return json{{"input_dim", c.input_dim},
              {"hidden", c.hidden},
              {"activation", to_string(c.activation)},
              {"latent_dim", c.latent_dim},
              {"std_floor", c.std_floor}};
}
EncoderConfig encoder_cfg_from_json(const json& j) {
  EncoderConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.activation = activation_from_string(j.value("activation", "tanh"));
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.std_floor = j.value("std_floor", c.std_floor);
  return c;
}

json to_json(const DecoderConfig& c) {
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
DecoderConfig decoder_cfg_from_json(const json& j) {
  DecoderConfig c;
  c.kind = decoder_kind_from_string(j.value("kind", "linear_ppca"));
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.data_dim = j.value("data_dim", c.data_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.activation = activation_from_string(j.value("activation", "tanh"));
  c.variance = variance_from_string(j.value("variance", "per_feature"));
  c.class_count = j.value("class_count", c.class_count);
  c.temperature = j.value("temperature", c.temperature);
  c.std_floor = j.value("std_floor", c.std_floor);
  return c;
}

json to_json(const MissingModelSpec& c) {
  return json{{"kind", to_string(c.kind)},
              {"fixed_w", c.fixed_w},
              {"fixed_b", c.fixed_b},
              {"known_signs", c.known_signs}};
}
MissingModelSpec missing_spec_from_json(const json& j) {
  MissingModelSpec c;
  c.kind = missing_kind_from_string(j.value("kind", "self_masking"));
  c.fixed_w = j.value("fixed_w", c.fixed_w);
  c.fixed_b = j.value("fixed_b", c.fixed_b);
  c.known_signs = j.value("known_signs", c.known_signs);
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"K", c.K},
              {"batch_size", c.batch_size},
              {"iterations", c.iterations},
              {"learning_rate", c.learning_rate},
              {"seed", c.seed},
              {"objective", to_string(c.objective)}};
}
TrainConfig training_from_json(const json& j) {
  TrainConfig c;
  c.K = j.value("K", c.K);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.iterations = j.value("iterations", c.iterations);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.objective = objective_from_string(j.value("objective", "not_miwae"));
  return c;
}

json to_json(const ImputeConfig& c) {
  return json{{"K", c.K},
              {"estimator", c.estimator},
              {"draws", c.draws},
              {"histogram_bins", c.histogram_bins}};
}
ImputeConfig impute_from_json(const json& j) {
  ImputeConfig c;
  c.K = j.value("K", c.K);
  c.estimator = j.value("estimator", c.estimator);
  c.draws = j.value("draws", c.draws);
  c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
  return c;
}

json to_json(const EvalConfig& c) {
  return json{{"refit_encoder", c.refit_encoder},
              {"test_loglik_L", c.test_loglik_L}};
}
EvalConfig eval_from_json(const json& j) {
  EvalConfig c;
  c.refit_encoder = j.value("refit_encoder", c.refit_encoder);
  c.test_loglik_L = j.value("test_loglik_L", c.test_loglik_L);
  return c;
}

json to_json(const SweepConfig& c) {
  return json{{"offsets", c.offsets}, {"models", c.models}, {"seeds", c.seeds}};
}
SweepConfig sweep_from_json(const json& j) {
  SweepConfig c;
  c.offsets = j.value("offsets", c.offsets);
  c.models = j.value("models", c.models);
  c.seeds = j.value("seeds", c.seeds);
  return c;
}

json to_json(const ExperimentConfig& c) {
  return json{{"data", to_json(c.data)},
              {"mechanism", to_json(c.mechanism)},
              {"model",
               json{{"encoder", to_json(c.model.encoder)},
                    {"decoder", to_json(c.model.decoder)},
                    {"missing", to_json(c.model.missing)}}},
              {"training", to_json(c.training)},
              {"imputation", to_json(c.imputation)},
              {"evaluation", to_json(c.evaluation)},
              {"sweep", to_json(c.sweep)},
              {"out_dir", c.out_dir},
              {"seed", c.seed}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("data")) c.data = data_from_json(j.at("data"));
  if (j.contains("mechanism")) c.mechanism = mechanism_from_json(j.at("mechanism"));
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("encoder")) c.model.encoder = encoder_cfg_from_json(m.at("encoder"));
    if (m.contains("decoder")) c.model.decoder = decoder_cfg_from_json(m.at("decoder"));
    if (m.contains("missing")) c.model.missing = missing_spec_from_json(m.at("missing"));
  }
  if (j.contains("training")) c.training = training_from_json(j.at("training"));
  if (j.contains("imputation")) c.imputation = impute_from_json(j.at("imputation"));
  if (j.contains("evaluation")) c.evaluation = eval_from_json(j.at("evaluation"));
  if (j.contains("sweep")) c.sweep = sweep_from_json(j.at("sweep"));
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  return c;
}

Matrix low_rank_cov(const Matrix& loadings, double noise_var) {
  const std::size_t r = loadings.size();
  const std::size_t p = loadings.front().size();
  Matrix cov(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      double s = i == j ? noise_var : 0.0;
      for (std::size_t k = 0; k < r; ++k) s += loadings[k][i] * loadings[k][j];
      cov[i][j] = s;
    }
  }
  return cov;
}

}  // namespace

std::string config_to_json_string(const ExperimentConfig& config) {
  return to_json(config).dump(2) + "\n";
}

ExperimentConfig config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json_string(text);
}

void save_config(const std::string& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path);
  out << config_to_json_string(config);
}

void resolve_model_dims(ExperimentConfig& config, std::size_t p) {
  auto& enc = config.model.encoder;
  auto& dec = config.model.decoder;
  if (enc.input_dim == 0) enc.input_dim = p;
  if (dec.data_dim == 0) dec.data_dim = p;
  if (enc.latent_dim == 0) enc.latent_dim = p > 1 ? p - 1 : 1;
  if (dec.latent_dim == 0) dec.latent_dim = enc.latent_dim;
  if (config.model.missing.kind == MissingKind::self_masking_known &&
      config.model.missing.known_signs.empty())
    config.model.missing.known_signs.assign(p, -1);
}

std::vector<std::string> preset_names() {
  return {"fig1b", "ppca", "uci", "clipping"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "fig1b") {
    c.data.synthetic.kind = "gaussian";
    c.data.synthetic.n = 2000;
    c.data.synthetic.p = 2;
    c.data.synthetic.mean = {1.0, -0.5};
    c.data.synthetic.cov = {{1.0, 0.7}, {0.7, 1.0}};
    c.data.standardize = "complete";
    c.mechanism.kind = "threshold";
    c.mechanism.offset = 0.0;
    c.mechanism.affected = {0};
    c.model.encoder.hidden = {64};
    c.model.decoder.kind = DecoderKind::linear_ppca;
    c.model.missing.kind = MissingKind::self_masking_known;
    c.training.iterations = 10000;
    c.imputation.K = 10000;
  } else if (name == "ppca" || name == "uci") {
    // Banknote-scale synthetic stand-in: 4 correlated features from two
    // latent factors, threshold self-masking in the first half.
    c.data.synthetic.kind = "gaussian";
    c.data.synthetic.n = 1372;
    c.data.synthetic.p = 4;
    c.data.synthetic.mean = {0.0, 0.0, 0.0, 0.0};
    c.data.synthetic.cov = low_rank_cov(
        {{0.9, 0.5, -0.6, 0.8}, {0.3, -0.7, 0.5, 0.4}}, 0.3);
    c.data.standardize = "complete";
    c.mechanism.kind = "threshold";
    c.mechanism.offset = 0.0;
    c.model.missing.kind = MissingKind::self_masking_known;
    c.training.iterations = 20000;
    c.imputation.K = 10000;
    if (name == "ppca") {
      c.model.encoder.hidden = {64};
      c.model.decoder.kind = DecoderKind::linear_ppca;
    } else {
      c.model.encoder.hidden = {128, 128};
      c.model.decoder.kind = DecoderKind::mlp_gaussian;
      c.model.decoder.hidden = {128, 128};
    }
  } else if (name == "clipping") {
    c.data.synthetic.kind = "squashed_gaussian";
    c.data.synthetic.n = 3000;
    c.data.synthetic.p = 8;
    c.data.synthetic.loadings = {{0.9, -0.6, 0.7, 0.5, -0.8, 0.6, 0.4, -0.5},
                                 {0.3, 0.7, -0.4, 0.6, 0.2, -0.5, 0.8, 0.6}};
    c.data.synthetic.noise_std = 0.8;
    c.data.synthetic.squash_scale = 0.5;
    c.data.synthetic.squash_offset = 0.4;
    c.data.standardize = "none";
    c.mechanism.kind = "logistic";
    c.mechanism.w = -50.0;
    c.mechanism.b = 0.75;
    c.model.encoder.hidden = {64, 64};
    c.model.decoder.kind = DecoderKind::mlp_gaussian;
    c.model.decoder.hidden = {64, 64};
    c.model.encoder.latent_dim = 4;
    c.model.decoder.latent_dim = 4;
    c.model.missing.kind = MissingKind::fixed;
    c.model.missing.fixed_w = -50.0;
    c.model.missing.fixed_b = 0.75;
    c.training.iterations = 20000;
    c.imputation.K = 2000;
  } else {
    throw ConfigError("unknown preset: " + name +
                      " (available: fig1b, ppca, uci, clipping)");
  }
  return c;
}

}  // namespace notmiwae
