// Experiment driver: simulate datasets, train models, impute, evaluate and
// sweep grids. Every command is a pure function of (config, input files,
// seed); re-running overwrites outputs with identical bytes (the wall_ms
// column of trace.csv is the one timing exception).
//
// Exit codes: 0 ok, 2 config error, 3 numerical abort, 4 I/O error.
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "notmiwae/config.hpp"
#include "notmiwae/evaluation.hpp"
#include "notmiwae/imputation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace notmiwae;

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

struct DatasetInfo {
  MaskedDataset data;
  std::vector<std::size_t> affected;
  std::string mechanism_kind;
  std::vector<double> raw_means, raw_stds;
  std::string standardize_mode;
};

std::vector<std::size_t> resolve_affected(const MechanismConfig& m, std::size_t p) {
  if (m.kind == "threshold" && m.affected.empty()) return first_half_features(p);
  return m.affected;
}

// ------------------------------------------------------------------ simulate

Matrix build_synthetic(const SyntheticSpec& spec, RngStream& rng) {
  if (spec.kind == "gaussian") {
    std::vector<double> mean = spec.mean;
    if (mean.empty()) mean.assign(spec.p, 0.0);
    Matrix cov = spec.cov;
    if (cov.empty()) {
      cov.assign(spec.p, std::vector<double>(spec.p, 0.0));
      for (std::size_t j = 0; j < spec.p; ++j) cov[j][j] = 1.0;
    }
    if (mean.size() != spec.p)
      throw ConfigError("synthetic mean length does not match p");
    return sample_mvn(spec.n, mean, cov, rng);
  }
  if (spec.kind == "squashed_gaussian") {
    if (spec.loadings.empty())
      throw ConfigError("squashed_gaussian needs a loadings matrix");
    const std::size_t r = spec.loadings.size();
    const std::size_t p = spec.loadings.front().size();
    if (p != spec.p) throw ConfigError("loadings width does not match p");
    Matrix out(spec.n, std::vector<double>(p, 0.0));
    std::vector<double> z(r), eps(p);
    for (std::size_t i = 0; i < spec.n; ++i) {
      rng.fill_normal(z.data(), r);
      rng.fill_normal(eps.data(), p);
      for (std::size_t j = 0; j < p; ++j) {
        double u = 0.0;
        for (std::size_t k = 0; k < r; ++k) u += z[k] * spec.loadings[k][j];
        const double a = spec.squash_scale * u + spec.squash_offset +
                         spec.noise_std * eps[j];
        const double e = std::exp(-std::fabs(a));
        out[i][j] = a >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      }
    }
    return out;
  }
  throw ConfigError("unknown synthetic kind: " + spec.kind);
}

void cmd_simulate(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  RngStream rng(cfg.seed);

  MaskedDataset d;
  bool have_truth = false;
  if (cfg.data.source == "synthetic") {
    Matrix x = build_synthetic(cfg.data.synthetic, rng);
    Matrix ones(x.size(), std::vector<double>(x.front().size(), 1.0));
    d = make_masked(std::move(x), std::move(ones), true);
    have_truth = true;
  } else if (cfg.data.source == "csv") {
    CsvData csv = load_csv(cfg.data.csv_path, cfg.data.csv_header);
    const bool complete = [&] {
      for (const auto& row : csv.mask)
        for (double m : row)
          if (m == 0.0) return false;
      return true;
    }();
    if (cfg.mechanism.kind != "none" && !complete)
      throw ConfigError(
          "cannot apply a simulated mechanism to a CSV that already has "
          "missing cells");
    d = make_masked(std::move(csv.values), std::move(csv.mask), complete);
    have_truth = complete;
  } else {
    throw ConfigError("unknown data source: " + cfg.data.source);
  }

  if (cfg.data.standardize == "complete") {
    standardize(d, StatsSource::complete_data);
  } else if (cfg.data.standardize == "observed_only") {
    standardize(d, StatsSource::observed_only);
  } else if (cfg.data.standardize != "none") {
    throw ConfigError("unknown standardize mode: " + cfg.data.standardize);
  }

  const std::size_t p = d.p();
  std::vector<std::size_t> affected = resolve_affected(cfg.mechanism, p);
  if (cfg.mechanism.kind != "none") {
    if (!d.x_full)
      throw ConfigError("mechanism simulation needs complete data");
    Matrix mask;
    if (cfg.mechanism.kind == "threshold") {
      mask = mnar_threshold_mask(*d.x_full, affected, cfg.mechanism.offset);
    } else if (cfg.mechanism.kind == "logistic") {
      mask = mnar_logistic_mask(*d.x_full, cfg.mechanism.w, cfg.mechanism.b, rng);
    } else if (cfg.mechanism.kind == "mcar") {
      mask = mcar_mask(d.n(), p, cfg.mechanism.rate, rng);
    } else {
      throw ConfigError("unknown mechanism kind: " + cfg.mechanism.kind);
    }
    MaskedDataset masked = make_masked(*d.x_full, std::move(mask), true);
    masked.feature_means = d.feature_means;
    masked.feature_stds = d.feature_stds;
    masked.standardized = d.standardized;
    d = std::move(masked);
  }

  const fs::path out(cfg.out_dir);
  write_csv((out / "data.csv").string(), d.x_obs, &d.mask);
  write_csv((out / "mask.csv").string(), d.mask);
  if (have_truth) write_csv((out / "truth.csv").string(), *d.x_full);

  json stats{{"n", d.n()},
             {"p", p},
             {"feature_means", d.feature_means},
             {"feature_stds", d.feature_stds},
             {"standardized", d.standardized},
             {"standardize_mode", cfg.data.standardize},
             {"mechanism",
              json{{"kind", cfg.mechanism.kind},
                   {"offset", cfg.mechanism.offset},
                   {"w", cfg.mechanism.w},
                   {"b", cfg.mechanism.b},
                   {"rate", cfg.mechanism.rate},
                   {"affected", affected}}},
             {"has_truth", have_truth},
             {"seed", cfg.seed}};
  write_text(out / "stats.json", stats.dump(2) + "\n");
}

// ----------------------------------------------------------------- loading

DatasetInfo load_dataset_dir(const std::string& dir, bool with_truth) {
  const fs::path base(dir);
  CsvData data = load_csv((base / "data.csv").string(), false);
  CsvData mask = load_csv((base / "mask.csv").string(), false);
  DatasetInfo info;
  info.data.x_obs = std::move(data.values);
  info.data.mask = std::move(mask.values);
  for (std::size_t i = 0; i < info.data.n(); ++i)
    for (std::size_t j = 0; j < info.data.p(); ++j)
      if (info.data.mask[i][j] == 0.0 && data.mask[i][j] == 1.0)
        throw IoError("data.csv and mask.csv disagree at row " +
                      std::to_string(i));
  const json stats = read_json(base / "stats.json");
  info.data.feature_means = stats.value("feature_means", std::vector<double>{});
  info.data.feature_stds = stats.value("feature_stds", std::vector<double>{});
  info.data.standardized = stats.value("standardized", false);
  info.standardize_mode = stats.value("standardize_mode", "none");
  if (stats.contains("mechanism")) {
    info.mechanism_kind = stats["mechanism"].value("kind", "none");
    info.affected =
        stats["mechanism"].value("affected", std::vector<std::size_t>{});
  }
  if (with_truth) {
    if (!stats.value("has_truth", false))
      throw IoError("dataset at " + dir + " carries no ground truth");
    CsvData truth = load_csv((base / "truth.csv").string(), false);
    info.data.x_full = std::move(truth.values);
  }
  info.data.validate();
  return info;
}

CheckpointStats stats_for_checkpoint(const DatasetInfo& info) {
  CheckpointStats s;
  s.means = info.data.feature_means;
  s.stds = info.data.feature_stds;
  s.standardize_mode = info.standardize_mode;
  return s;
}

// ------------------------------------------------------------------- train

void cmd_train(ExperimentConfig cfg, bool resume) {
  DatasetInfo info = load_dataset_dir(cfg.out_dir, false);
  resolve_model_dims(cfg, info.data.p());
  const fs::path ckpt = fs::path(cfg.out_dir) / "checkpoint.json";
  RngStream rng(cfg.training.seed);
  Model model = [&] {
    if (resume) {
      if (!fs::exists(ckpt))
        throw IoError("--resume needs an existing checkpoint at " + ckpt.string());
      return load_checkpoint(ckpt.string());
    }
    Model fresh(cfg.model.encoder, cfg.model.decoder, cfg.model.missing);
    fresh.init_params(rng);
    return fresh;
  }();
  TrainResult result = train(model, info.data, cfg.training, rng);

  const fs::path out(cfg.out_dir);
  save_checkpoint(ckpt.string(), model, stats_for_checkpoint(info));
  (void)out;
  std::string trace = "iteration,bound,wall_ms\n";
  for (const TraceRow& r : result.trace) {
    trace += std::to_string(r.iteration);
    trace += ",";
    trace += fmt(r.bound);
    trace += ",";
    trace += fmt(r.wall_ms);
    trace += "\n";
  }
  write_text(out / "trace.csv", trace);
  write_text(out / "config_echo.json", config_to_json_string(cfg));
}

// ------------------------------------------------------------------ impute

void write_histogram(const fs::path& path, const std::vector<double>& values,
                     std::size_t bins) {
  std::string csv = "bin_lo,bin_hi,count\n";
  if (values.empty()) {
    write_text(path, csv);
    return;
  }
  double lo = values.front(), hi = values.front();
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) hi = lo + 1.0;  // all imputations identical
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= bins) b = bins - 1;
    ++counts[b];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    csv += fmt(lo + width * static_cast<double>(b));
    csv += ",";
    csv += fmt(lo + width * static_cast<double>(b + 1));
    csv += ",";
    csv += std::to_string(counts[b]);
    csv += "\n";
  }
  write_text(path, csv);
}

void cmd_impute(ExperimentConfig cfg) {
  DatasetInfo info = load_dataset_dir(cfg.out_dir, false);
  const fs::path out(cfg.out_dir);
  CheckpointStats stats;
  Model model = load_checkpoint((out / "checkpoint.json").string(), &stats);

  const PointEstimator estimator = estimator_from_string(cfg.imputation.estimator);
  ImputationResult res =
      impute_dataset(info.data, model, cfg.imputation.K, estimator,
                     cfg.training.objective, cfg.seed);
  write_csv((out / "imputed.csv").string(), res.point_estimates);

  if (info.data.standardized) {
    Matrix raw = res.point_estimates;
    for (auto& row : raw)
      for (std::size_t j = 0; j < row.size(); ++j)
        row[j] = destandardize_value(info.data, j, row[j]);
    write_csv((out / "imputed_raw.csv").string(), raw);
  }

  std::vector<double> missing_values;
  for (std::size_t i = 0; i < info.data.n(); ++i)
    for (std::size_t j = 0; j < info.data.p(); ++j)
      if (info.data.mask[i][j] == 0.0)
        missing_values.push_back(res.point_estimates[i][j]);
  write_histogram(out / "histogram.csv", missing_values,
                  cfg.imputation.histogram_bins);

  if (cfg.imputation.draws > 0) {
    auto draws = multiple_impute_dataset(info.data, model, cfg.imputation.K,
                                         cfg.imputation.draws,
                                         cfg.training.objective, cfg.seed);
    for (std::size_t didx = 0; didx < draws.size(); ++didx) {
      std::string csv;
      for (std::size_t i = 0; i < draws[didx].size(); ++i) {
        csv += std::to_string(didx);
        for (double v : draws[didx][i]) {
          csv += ",";
          csv += fmt(v);
        }
        csv += "\n";
      }
      char name[32];
      std::snprintf(name, sizeof(name), "imputed_draw_%03zu.csv", didx);
      write_text(out / name, "draw," + [&] {
        std::string head;
        for (std::size_t j = 0; j < info.data.p(); ++j)
          head += (j ? ",x" : "x") + std::to_string(j);
        return head;
      }() + "\n" + csv);
    }
  }
}

// ---------------------------------------------------------------- evaluate

json evaluate_to_json(ExperimentConfig cfg) {
  DatasetInfo info = load_dataset_dir(cfg.out_dir, true);
  const fs::path out(cfg.out_dir);
  CheckpointStats stats;
  Model model = load_checkpoint((out / "checkpoint.json").string(), &stats);

  Matrix imputed;
  if (fs::exists(out / "imputed.csv")) {
    imputed = load_csv((out / "imputed.csv").string(), false).values;
  } else {
    const PointEstimator estimator =
        estimator_from_string(cfg.imputation.estimator);
    imputed = impute_dataset(info.data, model, cfg.imputation.K, estimator,
                             cfg.training.objective, cfg.seed)
                  .point_estimates;
  }

  const double rmse = imputation_rmse(imputed, *info.data.x_full, info.data.mask);
  const double mse = imputation_mse(imputed, *info.data.x_full, info.data.mask);
  const double acc =
      mask_accuracy(model, *info.data.x_full, info.data.mask, info.affected);
  const double mean_rmse = imputation_rmse(mean_impute_baseline(info.data),
                                           *info.data.x_full, info.data.mask);

  json report{{"imputation_rmse", rmse},
              {"imputation_mse", mse},
              {"mask_accuracy", acc},
              {"mean_baseline_rmse", mean_rmse},
              {"n_missing_cells", info.data.missing_cells()},
              {"seed", cfg.seed},
              {"config", json::parse(config_to_json_string(cfg))}};
  if (cfg.evaluation.test_loglik_L > 0) {
    if (cfg.evaluation.refit_encoder) {
      RngStream rng(mix_seed(cfg.seed, 0x7e57));
      refit_encoder(model, *info.data.x_full, cfg.training.iterations / 4,
                    cfg.training.K, cfg.training.batch_size,
                    cfg.training.learning_rate, rng);
    }
    report["test_loglik"] = test_loglik_is(model, *info.data.x_full,
                                           cfg.evaluation.test_loglik_L,
                                           mix_seed(cfg.seed, 0x11c));
  }
  return report;
}

void cmd_evaluate(ExperimentConfig cfg) {
  json report = evaluate_to_json(cfg);
  write_text(fs::path(cfg.out_dir) / "eval.json", report.dump(2) + "\n");
}

// ------------------------------------------------------------------- sweep

void apply_model_choice(ExperimentConfig& cfg, const std::string& name) {
  if (name == "miwae") {
    cfg.training.objective = ObjectiveKind::miwae;
    cfg.model.missing.kind = MissingKind::fixed;  // no parameters, term unused
    cfg.model.missing.fixed_w = 0.0;
    cfg.model.missing.fixed_b = 0.0;
  } else {
    cfg.training.objective = ObjectiveKind::not_miwae;
    cfg.model.missing.kind = missing_kind_from_string(name);
    cfg.model.missing.known_signs.clear();
  }
}

void cmd_sweep(const ExperimentConfig& base) {
  fs::create_directories(base.out_dir);
  std::string results =
      "dataset,mechanism,offset,model,missing_model,seed,rmse,mask_acc,loglik\n";
  const std::string dataset_name = base.data.source == "csv"
                                       ? fs::path(base.data.csv_path).stem().string()
                                       : base.data.synthetic.kind;
  for (double offset : base.sweep.offsets) {
    for (const std::string& model_name : base.sweep.models) {
      for (std::uint64_t seed : base.sweep.seeds) {
        ExperimentConfig run = base;
        run.mechanism.offset = offset;
        run.seed = seed;
        run.training.seed = seed;
        apply_model_choice(run, model_name);
        char tag[96];
        std::snprintf(tag, sizeof(tag), "run_off%g_%s_seed%llu", offset,
                      model_name.c_str(),
                      static_cast<unsigned long long>(seed));
        run.out_dir = (fs::path(base.out_dir) / tag).string();
        cmd_simulate(run);
        cmd_train(run, false);
        cmd_impute(run);
        json report = evaluate_to_json(run);
        write_text(fs::path(run.out_dir) / "eval.json", report.dump(2) + "\n");

        results += dataset_name + "," + base.mechanism.kind + "," + fmt(offset) +
                   "," + to_string(run.training.objective) + "," +
                   (run.training.objective == ObjectiveKind::miwae
                        ? "-"
                        : to_string(run.model.missing.kind)) +
                   "," + std::to_string(seed) + "," +
                   fmt(report["imputation_rmse"].get<double>()) + "," +
                   fmt(report["mask_accuracy"].get<double>()) + "," +
                   (report.contains("test_loglik")
                        ? fmt(report["test_loglik"].get<double>())
                        : "") +
                   "\n";
      }
    }
  }
  write_text(fs::path(base.out_dir) / "results.csv", results);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"not-MIWAE: deep latent variable models under MNAR missingness"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir;
  std::optional<std::uint64_t> seed;
  bool resume = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON");
    sub->add_option("--preset", preset_name,
                    "named preset: fig1b, ppca, uci, clipping");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the output directory");
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate dataset files");
  CLI::App* trn = app.add_subcommand("train", "train a model on a dataset dir");
  CLI::App* imp = app.add_subcommand("impute", "impute missing values");
  CLI::App* evl = app.add_subcommand("evaluate", "metrics against ground truth");
  CLI::App* swp = app.add_subcommand("sweep", "offset x model x seed grid");
  for (CLI::App* sub : {sim, trn, imp, evl, swp}) add_common(sub);
  trn->add_flag("--resume", resume,
                "continue from the checkpoint in the output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (!preset_name.empty() && !config_path.empty())
      throw ConfigError("--preset and --config are mutually exclusive");
    if (!preset_name.empty())
      cfg = preset(preset_name);
    else if (!config_path.empty())
      cfg = load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.training.seed = *seed;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (sim->parsed()) cmd_simulate(cfg);
    if (trn->parsed()) cmd_train(cfg, resume);
    if (imp->parsed()) cmd_impute(cfg);
    if (evl->parsed()) cmd_evaluate(cfg);
    if (swp->parsed()) cmd_sweep(cfg);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValueError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
