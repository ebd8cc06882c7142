#include "wavectl/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "wavectl/dataset.hpp"
#include "wavectl/errors.hpp"
#include "wavectl/io_util.hpp"
#include "wavectl/random.hpp"
#include "wavectl/svg_plot.hpp"

namespace wavectl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log(const CommandOptions& opt, const std::string& msg) {
  if (!opt.quiet) std::fprintf(stderr, "%s\n", msg.c_str());
}

fs::path out_dir(const CommandOptions& opt, const RunConfig& cfg) {
  const fs::path dir = opt.out ? fs::path(*opt.out) : fs::path(cfg.output_dir);
  io::ensure_dir(dir);
  return dir;
}

void write_run_record(const fs::path& dir, const std::string& command, const RunConfig& cfg, const json& extra) {
  json j = {{"command", command}, {"config", config_to_json(cfg)}, {"config_hash", env_hash(cfg.env)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = *it;
  io::write_text(dir / "run.json", j.dump(2) + "\n");
}

const std::string& require(const std::optional<std::string>& v, const char* flag) {
  if (!v) throw ConfigError(std::string("missing required flag ") + flag);
  return *v;
}

// Lists the env keys that differ between two hashed configs.
std::string env_diff(const EnvConfig& a, const EnvConfig& b) {
  std::string out;
  for (const auto& op : json::diff(env_to_json(a), env_to_json(b))) {
    if (!out.empty()) out += ", ";
    out += op.at("path").get<std::string>();
  }
  return out.empty() ? "(no visible difference)" : out;
}

void require_compatible(const std::string& what, const std::string& hash_a, const std::string& hash_b,
                        const EnvConfig& a, const EnvConfig& b) {
  if (hash_a != hash_b) {
    throw ConfigError(what + " config hash mismatch (" + hash_a + " vs " + hash_b + "); differing keys: " +
                      env_diff(a, b));
  }
}

std::vector<double> steps_axis(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
  return x;
}

struct Loaded {
  SurrogateModel model;
  std::vector<EpisodeRecord> episodes;
};

Loaded load_model_and_dataset(const CommandOptions& opt) {
  const fs::path ck = require(opt.checkpoint, "--checkpoint");
  const fs::path ds = require(opt.dataset, "--dataset");
  Loaded l{load_checkpoint(ck), load_dataset(ds)};
  if (l.episodes.empty()) throw ConfigError("dataset has no episodes");
  const std::string ds_hash = env_hash(l.episodes.front().config);
  if (l.model.env_hash != ds_hash) {
    throw ConfigError("checkpoint/dataset config hash mismatch (" + l.model.env_hash + " vs " + ds_hash + ")");
  }
  if (opt.no_pml) l.model.no_pml = true;
  return l;
}

const EpisodeRecord& pick_episode(const std::vector<EpisodeRecord>& eps, int index) {
  if (index < 0 || index >= static_cast<int>(eps.size())) {
    throw ConfigError("--episode " + std::to_string(index) + " out of range (dataset has " +
                      std::to_string(eps.size()) + " episodes)");
  }
  return eps[index];
}

}  // namespace

RunConfig resolve_config(const CommandOptions& opt) {
  RunConfig cfg = opt.config_path ? load_config(*opt.config_path) : RunConfig{};
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.train.seed = *opt.seed;
    cfg.mpc.seed = *opt.seed;
  }
  if (opt.no_pml) cfg.train.no_pml = true;
  cfg.validate();
  return cfg;
}

void cmd_collect(const CommandOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const int n = opt.episodes.value_or(12);
  if (n < 1) throw ConfigError("--episodes must be >= 1");
  const fs::path dir = out_dir(opt, cfg);
  std::vector<EpisodeRecord> eps(n);
  parallel_for(n, cfg.train.n_threads, [&](int i) {
    eps[i] = run_random_episode(cfg.env, derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    log(opt, "collect: episode " + std::to_string(i + 1) + "/" + std::to_string(n) + " done");
  });
  save_dataset(dir, eps);
  write_run_record(dir, "collect", cfg, {{"episodes", n}});
}

void cmd_train(const CommandOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const fs::path ds = require(opt.dataset, "--dataset");
  const auto eps = load_dataset(ds);
  if (eps.empty()) throw ConfigError("dataset has no episodes");
  require_compatible("dataset", env_hash(eps.front().config), env_hash(cfg.env), eps.front().config, cfg.env);
  const fs::path dir = out_dir(opt, cfg);
  const int total = cfg.train.max_epochs * cfg.train.batches_per_epoch;
  auto res = train(eps, cfg.latent, cfg.train, [&](const TrainLogEntry& e) {
    const int k = e.epoch * cfg.train.batches_per_epoch + e.batch + 1;
    log(opt, "train: batch " + std::to_string(k) + "/" + std::to_string(total) +
                 (e.skipped ? " skipped (blow-up)" : " loss " + io::format_number(e.loss)));
  });
  save_checkpoint(res.model, dir / "checkpoint");
  io::CsvWriter csv({"epoch", "batch", "loss", "skipped"});
  plot::Series s{"loss", {}, {}};
  for (std::size_t i = 0; i < res.log.size(); ++i) {
    const auto& e = res.log[i];
    csv.row({std::to_string(e.epoch), std::to_string(e.batch), io::format_number(e.loss), e.skipped ? "1" : "0"});
    s.x.push_back(static_cast<double>(i + 1));
    s.y.push_back(e.loss);
  }
  csv.save(dir / "loss_curve.csv");
  plot::save_line_chart(dir / "loss_curve.svg", {"Training loss", "batch", "loss", true}, {s});
  write_run_record(dir, "train", cfg, {{"skipped_batches", res.skipped_batches}, {"no_pml", res.model.no_pml}});
}

void cmd_eval_horizon(const CommandOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const auto l = load_model_and_dataset(opt);
  const int hold = std::min<int>(std::max(cfg.train.holdout_episodes, 0), static_cast<int>(l.episodes.size()));
  const std::vector<EpisodeRecord> eval_eps =
      hold > 0 ? std::vector<EpisodeRecord>(l.episodes.end() - hold, l.episodes.end()) : l.episodes;
  const fs::path dir = out_dir(opt, cfg);
  const auto stats =
      evaluate_horizon(l.model, eval_eps, default_horizons(), cfg.train.eval_batch, cfg.seed, cfg.train.n_threads);
  io::CsvWriter csv({"horizon", "mse_mean", "mse_std", "samples"});
  plot::Series s{l.model.no_pml ? "no PML" : "with PML", {}, {}};
  for (const auto& st : stats) {
    csv.row(std::vector<double>{static_cast<double>(st.horizon), st.mean, st.stddev, static_cast<double>(st.samples)});
    s.x.push_back(st.horizon);
    s.y.push_back(st.mean);
  }
  csv.save(dir / "eval_horizon.csv");
  plot::save_line_chart(dir / "eval_horizon.svg", {"sigma_sc MSE by horizon", "horizon (actions)", "MSE", true}, {s});
  write_run_record(dir, "eval-horizon", cfg, {{"no_pml", l.model.no_pml}, {"eval_episodes", hold > 0 ? hold : 0}});
}

void cmd_predict(const CommandOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const auto l = load_model_and_dataset(opt);
  const auto& ep = pick_episode(l.episodes, opt.episode);
  const fs::path dir = out_dir(opt, cfg);
  const Window w = make_window(ep, 0, ep.n_actions(), l.model.sigma_scale);
  const auto r = predict_window(l.model, w, LossWeights{});
  io::CsvWriter csv({"step", "time", "sigma_sc", "sigma_hat_sc", "sigma_tot", "sigma_hat_tot", "sigma_inc",
                     "sigma_hat_inc"});
  for (std::size_t k = 0; k < r.pred.sc.size(); ++k) {
    csv.row(std::vector<double>{static_cast<double>(k + 1), (k + 1) * ep.config.dt, w.target.sc[k], r.pred.sc[k],
                                w.target.tot[k], r.pred.tot[k], w.target.inc[k], r.pred.inc[k]});
  }
  csv.save(dir / "predict.csv");
  const auto x = steps_axis(r.pred.sc.size());
  plot::save_line_chart(dir / "predict.svg", {"Scattered energy: measured vs predicted", "step", "sigma_sc (normalized)"},
                        {{"measured", x, w.target.sc}, {"predicted", x, r.pred.sc}});
  write_run_record(dir, "predict", cfg,
                   {{"episode", opt.episode}, {"no_pml", l.model.no_pml}, {"mse_sc", r.loss.mse_sc},
                    {"steps", r.pred.sc.size()}});
}

void cmd_latent_field(const CommandOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const auto l = load_model_and_dataset(opt);
  const auto& ep = pick_episode(l.episodes, opt.episode);
  const fs::path dir = out_dir(opt, cfg);
  const int horizon = std::min(100, ep.n_actions());
  const Window w = make_window(ep, 0, horizon, l.model.sigma_scale);
  const auto wave = l.model.encode_wave(w.obs, w.t0);
  const auto design = l.model.encode_design_window(w.radii, w.t0);
  const int stride = std::max(1, ep.steps_per_action / 10);
  const auto r = rollout(wave.conds, design.speed, horizon, ep.steps_per_action, ep.config.dt, {stride});
  io::write_f32(dir / "latent_field.f32", std::span<const double>(r.usc2_field));
  const json meta = {{"file", "latent_field.f32"},
                     {"dtype", "float32"},
                     {"byte_order", "little"},
                     {"shape", {r.field_rows, l.model.latent_grid().n_cells}},
                     {"row_stride_steps", stride},
                     {"dt", ep.config.dt},
                     {"latent_length", l.model.latent_grid().length},
                     {"quantity", "u_sc^2 = (u_tot - u_inc)^2"}};
  io::write_text(dir / "latent_field.json", meta.dump(2) + "\n");
  io::CsvWriter csv({"step", "sigma_hat_sc", "sigma_hat_tot", "sigma_hat_inc"});
  for (std::size_t k = 0; k < r.sigma_sc.size(); ++k) {
    csv.row(std::vector<double>{static_cast<double>(k + 1), r.sigma_sc[k], r.sigma_tot[k], r.sigma_inc[k]});
  }
  csv.save(dir / "latent_sigma.csv");
  const auto x = steps_axis(r.sigma_tot.size());
  plot::save_line_chart(dir / "latent_sigma.svg", {"Latent energy", "step", "sigma_hat"},
                        {{"total", x, r.sigma_tot}, {"scattered", x, r.sigma_sc}});
  write_run_record(dir, "latent-field", cfg, {{"episode", opt.episode}, {"no_pml", l.model.no_pml}});
}

void cmd_control(const CommandOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  SurrogateModel model = load_checkpoint(require(opt.checkpoint, "--checkpoint"));
  if (opt.no_pml) model.no_pml = true;
  if (model.env_hash != env_hash(cfg.env)) {
    throw ConfigError("checkpoint/config hash mismatch (" + model.env_hash + " vs " + env_hash(cfg.env) + ")");
  }
  const int n = opt.episodes.value_or(6);
  if (n < 1) throw ConfigError("--episodes must be >= 1");
  const double beta = cfg.mpc.beta >= 0.0 ? cfg.mpc.beta : model.beta;
  const fs::path dir = out_dir(opt, cfg);
  const ModelPredictor predictor(model);

  io::CsvWriter steps({"episode", "seed", "policy", "step", "sigma_sc"});
  io::CsvWriter summary({"episode", "seed", "random_mean_sigma_sc", "mpc_mean_sigma_sc", "relative_reduction"});
  double sum_random = 0.0, sum_mpc = 0.0, sum_reduction = 0.0;
  std::vector<plot::Series> curves;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(i));
    const auto rnd = run_random_episode(cfg.env, seed);
    const auto mpc = control_episode(cfg.env, predictor, cfg.mpc, beta, seed);
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return v.empty() ? 0.0 : s / v.size();
    };
    const double mr = mean(rnd.sigma_sc), mm = mean(mpc.sigma_sc);
    for (const auto* rec : {&rnd, &mpc}) {
      const char* label = rec == &rnd ? "random" : "mpc";
      for (std::size_t k = 0; k < rec->sigma_sc.size(); ++k) {
        steps.row({std::to_string(i), std::to_string(seed), label, std::to_string(k + 1),
                   io::format_number(rec->sigma_sc[k])});
      }
    }
    const double red = mr > 0.0 ? (mr - mm) / mr : 0.0;
    summary.row({std::to_string(i), std::to_string(seed), io::format_number(mr), io::format_number(mm),
                 io::format_number(red)});
    sum_random += mr;
    sum_mpc += mm;
    sum_reduction += red;
    if (i == 0) {
      const auto x = steps_axis(rnd.sigma_sc.size());
      curves.push_back({"random", x, rnd.sigma_sc});
      curves.push_back({"mpc", x, mpc.sigma_sc});
    }
    log(opt, "control: episode " + std::to_string(i + 1) + "/" + std::to_string(n) + " random " +
                 io::format_number(mr) + " mpc " + io::format_number(mm));
  }
  steps.save(dir / "control_steps.csv");
  summary.save(dir / "control_summary.csv");
  plot::save_line_chart(dir / "control.svg", {"Scattered energy, episode 0", "step", "sigma_sc"}, curves);
  const double pooled = sum_random > 0.0 ? (sum_random - sum_mpc) / sum_random : 0.0;
  write_run_record(dir, "control", cfg,
                   {{"episodes", n},
                    {"beta", beta},
                    {"mean_random_sigma_sc", sum_random / n},
                    {"mean_mpc_sigma_sc", sum_mpc / n},
                    {"pooled_relative_reduction", pooled},
                    {"mean_paired_relative_reduction", sum_reduction / n}});
}

int run_command(const std::string& name, const CommandOptions& opt) {
  try {
    if (name == "collect") {
      cmd_collect(opt);
    } else if (name == "train") {
      cmd_train(opt);
    } else if (name == "eval-horizon") {
      cmd_eval_horizon(opt);
    } else if (name == "predict") {
      cmd_predict(opt);
    } else if (name == "control") {
      cmd_control(opt);
    } else if (name == "latent-field") {
      cmd_latent_field(opt);
    } else {
      std::fprintf(stderr, "unknown command: %s\n", name.c_str());
      return kExitFailure;
    }
    return kExitOk;
  } catch (const ConfigError& ex) {
    std::fprintf(stderr, "config error: %s\n", ex.what());
    return kExitConfig;
  } catch (const BlowUpError& ex) {
    std::fprintf(stderr, "numerical blow-up: %s\n", ex.what());
    return kExitBlowUp;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitFailure;
  }
}

}  // namespace wavectl
