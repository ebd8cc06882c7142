// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
//   wavectl_acceptance [--only 1,2,...] [--work-dir DIR] [--cli PATH] [--report FILE]

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "model_fixtures.hpp"
#include "wave_scenarios.hpp"
#include "wavectl/acoustic_env.hpp"
#include "wavectl/config.hpp"
#include "wavectl/io_util.hpp"
#include "wavectl/latent_dynamics.hpp"
#include "wavectl/mpc.hpp"
#include "wavectl/training.hpp"

namespace fs = std::filesystem;
using namespace wavectl;
using namespace wavectl::fixtures;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1-5: solver properties

Outcome pml_absorption() {
  const EnvConfig env;
  const auto absorbed = run_reflection_test(env.nx, env.pml_cells, env.pml_strength, 3.0, true);
  const auto wall = run_reflection_test(env.nx, env.pml_cells, env.pml_strength, 3.0, false);
  return {absorbed.ratio() < 0.01 && wall.ratio() > 0.5,
          "returned/outgoing with PML " + fmt("%.2e", absorbed.ratio()) + " (< 1e-2), hard wall " +
              fmt("%.3f", wall.ratio()) + " (> 0.5)"};
}

Outcome energy_conservation() {
  const auto d = run_energy_drift(128, 15.0, 1531.0, 0.5, 1000);
  return {d.max_rel_drift < 1e-3, "max relative drift over 1000 steps at CFL 0.5: " + fmt("%.2e", d.max_rel_drift)};
}

Outcome rk4_order() {
  const int n = 64;
  const double dx = 15.0 / (n - 1);
  const int coarse = 200;
  const double ratio = rk4_order_ratio(n, 15.0, 1531.0, coarse * 0.5 * dx / 1531.0, coarse);
  return {ratio >= 12.0 && ratio <= 20.0, "error ratio for dt -> dt/2: " + fmt("%.2f", ratio) + " (in [12, 20])"};
}

Outcome zero_scatterer_identity() {
  EnvConfig env;
  env.design.centers.clear();
  env.actions_per_episode = 20;
  const auto rec = run_random_episode(env, 1);
  double worst = 0.0;
  bool ok = rec.sigma_sc.size() == 2000u;
  for (std::size_t k = 0; k < rec.sigma_sc.size(); ++k) {
    if (rec.sigma_sc[k] > 1e-10 * rec.sigma_tot[k]) ok = false;
    if (rec.sigma_tot[k] > 0.0) worst = std::max(worst, rec.sigma_sc[k] / rec.sigma_tot[k]);
  }
  return {ok, "max sigma_sc/sigma_tot over 2000 steps: " + fmt("%.2e", worst) + " (<= 1e-10)"};
}

double latent_standing_wave_error() {
  // Production rollout chained one action at a time, compared at chunk ends.
  const EnvConfig env;
  const int n = 1024;
  const double length = 4.0 * std::hypot(env.length_x, env.length_y);
  const double c = env.medium.c_ambient;
  const Grid1D g = Grid1D::make(n, length);
  const double period = 2.0 * length / c;
  const int chunks = 100, steps = 50;
  const double dt = period / (chunks * steps);
  LatentConditions lc;
  lc.initial = LatentState(g);
  for (int i = 1; i < n - 1; ++i) {
    lc.initial.u_tot[i] = std::sin(std::numbers::pi * i / (n - 1));
  }
  lc.initial.u_inc = lc.initial.u_tot;
  lc.f_z.assign(n, 0.0);
  lc.sigma_z.assign(n, 0.0);
  lc.c_ambient = c;
  const std::vector<double> mode = lc.initial.u_tot;
  double err2 = 0.0, ref2 = 0.0;
  for (int k = 0; k < chunks; ++k) {
    const double t0 = lc.initial.t;
    LatentSpeedInterp speed{{std::vector<double>(n, c), std::vector<double>(n, c)}, {t0, t0 + steps * dt}};
    const auto r = rollout(lc, speed, 1, steps, dt);
    lc.initial = r.final_state;
    const double phase = std::cos(std::numbers::pi * c * r.final_state.t / length);
    for (int i = 0; i < n; ++i) {
      const double ref = mode[i] * phase;
      err2 += (r.final_state.u_tot[i] - ref) * (r.final_state.u_tot[i] - ref);
      ref2 += ref * ref;
    }
  }
  return std::sqrt(err2 / ref2);
}

Outcome analytic_oracles() {
  const double e1 = latent_standing_wave_error();
  const double e2 = run_standing_wave_2d(128, 15.0, 1531.0, 400).rel_l2;
  return {e1 < 0.01 && e2 < 0.01,
          "relative L2 over one period: 1D latent " + fmt("%.2e", e1) + ", 2D " + fmt("%.2e", e2) + " (< 1e-2)"};
}

// ---------------------------------------------------------------------------
// 6-7: surrogate properties

Outcome adjoint_exactness() {
  EnvConfig env;
  env.actions_per_episode = 4;
  const auto eps = record_episodes(env, 1, 21);
  LatentConfig latent;
  latent.n_cells = 64;
  latent.n_freq = 16;
  latent.n_pml = 16;
  SurrogateModel model = model_for(eps, latent, 5);
  const Window w = make_window(eps[0], 2, 2, model.sigma_scale);
  auto probes = probe_gradients(model, w, LossWeights{}, 3);
  // Extra probes on the head outputs that become the latent absorption parameters.
  nn::ParamStore grads = model.params.zeros_like();
  window_gradients(model, w, LossWeights{}, grads);
  const int head_b = model.params.find("wave.head.bias");
  const int base = 5 * latent.n_freq;
  for (int k : {0, 3, 8, 15}) {
    auto& data = model.params[head_b].data;
    const std::size_t idx = base + k;
    const double keep = data[idx];
    data[idx] = keep + 1e-6;
    const double fp = predict_window(model, w, LossWeights{}).loss.total;
    data[idx] = keep - 1e-6;
    const double fm = predict_window(model, w, LossWeights{}).loss.total;
    data[idx] = keep;
    GradientProbe p{"wave.head.bias(pml)", idx, grads[head_b].data[idx], (fp - fm) / 2e-6, false};
    p.ok = std::abs(p.analytic - p.numeric) <= 1e-7 + 1e-4 * std::abs(p.numeric);
    probes.push_back(p);
  }
  std::set<std::string> tensors;
  int bad = 0;
  double worst = 0.0;
  for (const auto& p : probes) {
    tensors.insert(p.tensor);
    if (!p.ok) {
      ++bad;
      std::fprintf(stderr, "  gradient mismatch %s[%zu]: adjoint %.9e fd %.9e\n", p.tensor.c_str(), p.index,
                   p.analytic, p.numeric);
    }
    worst = std::max(worst, std::abs(p.analytic - p.numeric) / (1e-7 + 1e-4 * std::abs(p.numeric)));
  }
  const bool all_tensors = static_cast<int>(tensors.size()) == model.params.count() + 1;
  return {bad == 0 && probes.size() >= 20 && all_tensors,
          std::to_string(probes.size()) + " coordinates over " + std::to_string(model.params.count()) +
              " tensors + absorption outputs, " + std::to_string(bad) + " outside 1e-4 rel / 1e-7 abs; worst error " +
              fmt("%.2f", worst) + " of tolerance"};
}

Outcome latent_energy_buildup() {
  const EnvConfig env;
  const int n = 1024;
  const double length = 4.0 * std::hypot(env.length_x, env.length_y);
  const double c = env.medium.c_ambient;
  const Grid1D g = Grid1D::make(n, length);
  auto quarters = [&](bool absorbing) {
    LatentConditions lc;
    lc.initial = LatentState(g);
    lc.c_ambient = c;
    lc.omega = env.source.omega;
    lc.f_z.assign(n, 0.0);
    // Forcing narrower than the wavelength so that it radiates.
    for (int i = 0; i < n; ++i) lc.f_z[i] = std::exp(-std::pow(g.coord(i) + 3.0, 2) / (2.0 * 0.3 * 0.3));
    lc.sigma_z.assign(n, 0.0);
    if (absorbing) {
      const int thickness = n / 8;
      lc.sigma_z = build_ramp(g, thickness, pml_scale_from_strength(20.0, c, thickness, g.dx())).sigma;
    }
    const int actions = env.actions_per_episode;
    const double t1 = actions * env.action_dt();
    LatentSpeedInterp speed{{std::vector<double>(n, c), std::vector<double>(n, c)}, {0.0, t1}};
    const auto r = rollout(lc, speed, actions, env.steps_per_action, env.dt);
    std::array<double, 4> q{};
    const std::size_t len = r.sigma_tot.size() / 4;
    for (std::size_t k = 0; k < 4 * len; ++k) q[k / len] += r.sigma_tot[k] / len;
    return q;
  };
  const auto ramp = quarters(true);
  const auto none = quarters(false);
  const bool stable = ramp[3] <= 2.0 * ramp[1];
  const bool grows = none[0] < none[1] && none[1] < none[2] && none[2] < none[3] && none[3] >= 2.0 * none[0];
  return {stable && grows, "20000 steps; ramp last/second quarter " + fmt("%.3f", ramp[3] / ramp[1]) +
                               " (<= 2), no absorption quarters " + fmt("%.3g", none[0]) + " < " +
                               fmt("%.3g", none[1]) + " < " + fmt("%.3g", none[2]) + " < " + fmt("%.3g", none[3]) +
                               ", growth " + fmt("%.1f", none[3] / none[0]) + "x (>= 2)"};
}

// ---------------------------------------------------------------------------
// 8-9: trained surrogate. Desk-scale settings chosen for the one-hour budgets.

constexpr int kEpisodes = 12;  // 10 for training, 2 held out
constexpr std::uint64_t kSeed = 1;

// Latent domain of twice the real diagonal, absorbing prior starting at the
// real half-width from the centre.
LatentConfig acceptance_latent_config() {
  const EnvConfig env;
  LatentConfig l;
  l.length = 2.0 * std::hypot(env.length_x, env.length_y);
  l.pml_init_fraction = (0.5 * l.length - 0.5 * env.length_x) / l.length;
  return l;
}

TrainConfig acceptance_train_config(bool no_pml) {
  TrainConfig t;
  t.batch_size = 8;
  t.batches_per_epoch = 20;
  t.max_epochs = 25;
  t.learning_rate = 3e-3;
  t.seed = kSeed;
  t.no_pml = no_pml;
  return t;
}

MpcConfig acceptance_mpc_config() {
  MpcConfig m;
  m.n_shots = 64;
  m.horizon = 10;
  m.seed = kSeed;
  return m;
}

constexpr int kControlActions = 60;

struct SharedModels {
  std::vector<EpisodeRecord> episodes;
  std::optional<SurrogateModel> with_pml;
  std::optional<SurrogateModel> without_pml;
  double collect_seconds = 0.0;
};

SharedModels& shared() {
  static SharedModels s;
  return s;
}

const std::vector<EpisodeRecord>& dataset() {
  auto& s = shared();
  if (s.episodes.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    s.episodes.resize(kEpisodes);
    parallel_for(kEpisodes, 0, [&](int i) {
      s.episodes[i] = run_random_episode(EnvConfig{}, derive_seed(kSeed, static_cast<std::uint64_t>(i)));
    });
    s.collect_seconds = seconds_since(t0);
    std::fprintf(stderr, "  collected %d episodes in %.0f s\n", kEpisodes, s.collect_seconds);
  }
  return s.episodes;
}

const SurrogateModel& trained(bool no_pml) {
  auto& slot = no_pml ? shared().without_pml : shared().with_pml;
  if (!slot) {
    const auto t0 = std::chrono::steady_clock::now();
    auto res = train(dataset(), acceptance_latent_config(), acceptance_train_config(no_pml));
    std::fprintf(stderr, "  trained %s model in %.0f s (%d skipped batches)\n", no_pml ? "no-PML" : "PML",
                 seconds_since(t0), res.skipped_batches);
    slot = std::move(res.model);
  }
  return *slot;
}

Outcome temporal_generalization() {
  const auto& eps = dataset();
  const std::vector<EpisodeRecord> held(eps.end() - 2, eps.end());
  auto ratio = [&](bool no_pml, double& m20, double& m200) {
    const auto stats = evaluate_horizon(trained(no_pml), held, {20, 200}, 8, kSeed, 0);
    m20 = stats[0].mean;
    m200 = stats[1].mean;
    return m200 / m20;
  };
  double a20, a200, b20, b200;
  const double with = ratio(false, a20, a200);
  const double without = ratio(true, b20, b200);
  return {with <= 3.0 && without >= 10.0,
          "MSE(200)/MSE(20): with PML " + fmt("%.3g", with) + " (" + fmt("%.3g", a200) + "/" + fmt("%.3g", a20) +
              ", <= 3), no PML " + fmt("%.3g", without) + " (" + fmt("%.3g", b200) + "/" + fmt("%.3g", b20) +
              ", >= 10)"};
}

Outcome control_improvement() {
  const SurrogateModel& model = trained(false);
  EnvConfig env;
  env.actions_per_episode = kControlActions;
  const ModelPredictor predictor(model);
  double sum_random = 0.0, sum_mpc = 0.0;
  for (int i = 0; i < 6; ++i) {
    const std::uint64_t seed = derive_seed(kSeed, 1000 + static_cast<std::uint64_t>(i));
    const auto rnd = run_random_episode(env, seed);
    const auto mpc = control_episode(env, predictor, acceptance_mpc_config(), model.beta, seed);
    double mr = 0.0, mm = 0.0;
    for (double v : rnd.sigma_sc) mr += v / rnd.sigma_sc.size();
    for (double v : mpc.sigma_sc) mm += v / mpc.sigma_sc.size();
    std::fprintf(stderr, "  pair %d: random %.4g mpc %.4g (%.1f%%)\n", i, mr, mm, 100.0 * (mr - mm) / mr);
    sum_random += mr;
    sum_mpc += mm;
  }
  const double reduction = (sum_random - sum_mpc) / sum_random;
  return {reduction >= 0.10, "6 paired episodes of " + std::to_string(kControlActions) +
                                 " actions: mean sigma_sc random " + fmt("%.4g", sum_random / 6) + ", MPC " +
                                 fmt("%.4g", sum_mpc / 6) + ", reduction " + fmt("%.1f", 100.0 * reduction) +
                                 "% (>= 10%)"};
}

// ---------------------------------------------------------------------------
// 10: determinism of every command

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  RunConfig rc;
  rc.env.nx = rc.env.ny = 64;
  rc.env.obs_nx = rc.env.obs_ny = 32;
  rc.env.pml_cells = 8;
  rc.env.actions_per_episode = 12;
  rc.env.steps_per_action = 25;
  rc.env.dt = 4e-5;
  rc.latent = small_latent_config(128);
  rc.train.horizon_actions = 2;
  rc.train.batch_size = 2;
  rc.train.batches_per_epoch = 3;
  rc.train.max_epochs = 1;
  rc.train.eval_batch = 2;
  rc.mpc.n_shots = 4;
  rc.mpc.horizon = 2;
  const fs::path cfg = work / "determinism.json";
  fs::create_directories(work);
  io::write_text(cfg, config_to_json(rc).dump(2));

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"collect", "collect --episodes 3"},
      {"train", "train --dataset {run}/collect"},
      {"train_nopml", "train --no-pml --dataset {run}/collect"},
      {"eval", "eval-horizon --dataset {run}/collect --checkpoint {run}/train/checkpoint"},
      {"predict", "predict --dataset {run}/collect --checkpoint {run}/train/checkpoint --episode 1"},
      {"field", "latent-field --dataset {run}/collect --checkpoint {run}/train/checkpoint"},
      {"control", "control --episodes 1 --checkpoint {run}/train/checkpoint"},
  };
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* run : {"run_a", "run_b"}) {
    const fs::path dir = work / run;
    fs::remove_all(dir);
    for (const auto& [name, args] : commands) {
      std::string a = args;
      for (std::size_t p; (p = a.find("{run}")) != std::string::npos;) a.replace(p, 5, dir.string());
      const std::string cmd =
          cli + " " + a + " --quiet --seed 3 --config " + cfg.string() + " --out " + (dir / name).string();
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
    }
    runs.push_back(snapshot(dir));
  }
  int differing = 0;
  for (const auto& [file, bytes] : runs[0]) {
    auto it = runs[1].find(file);
    if (it == runs[1].end() || it->second != bytes) {
      ++differing;
      std::fprintf(stderr, "  differs: %s\n", file.c_str());
    }
  }
  const bool same_set = runs[0].size() == runs[1].size();
  return {differing == 0 && same_set && !runs[0].empty(),
          std::to_string(commands.size()) + " commands run twice, " + std::to_string(runs[0].size()) +
              " output files, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavectl acceptance checks"};
  std::vector<int> only;
  std::string work = (fs::temp_directory_path() / "wavectl_acceptance").string();
  std::string cli = WAVECTL_CLI;
  std::string report;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--work-dir", work, "scratch directory for command outputs");
  app.add_option("--cli", cli, "path of the wavectl executable");
  app.add_option("--report", report, "also write the PASS/FAIL lines to this file");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "PML absorption", 10.0, pml_absorption},
      {2, "Energy conservation", 10.0, energy_conservation},
      {3, "RK4 order", 30.0, rk4_order},
      {4, "Zero-scatterer identity", 30.0, zero_scatterer_identity},
      {5, "Analytic standing waves", 10.0, analytic_oracles},
      {6, "Adjoint exactness", 60.0, adjoint_exactness},
      {7, "Latent energy buildup", 60.0, latent_energy_buildup},
      {8, "Temporal generalization", 3600.0, temporal_generalization},
      {9, "Control improvement", 3600.0, control_improvement},
      {10, "Determinism", 600.0, [&] { return determinism(cli, work); }},
  };

  std::ofstream report_out;
  if (!report.empty()) report_out.open(report);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double elapsed = seconds_since(t0);
    const bool in_time = elapsed <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    char line[1024];
    std::snprintf(line, sizeof line, "%s criterion %d (%s): %s; %.1f s (budget %.0f s)%s", pass ? "PASS" : "FAIL",
                  c.id, c.name, o.detail.c_str(), elapsed, c.budget_s, in_time ? "" : " OVER BUDGET");
    std::printf("%s\n", line);
    std::fflush(stdout);
    if (report_out) report_out << line << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
