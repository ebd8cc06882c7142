#include "wavectl/mpc.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "wavectl/errors.hpp"
#include "wavectl/random.hpp"
#include "wavectl/training.hpp"

namespace wavectl {

double cost(std::span<const double> sigma_sc, const std::vector<std::vector<double>>& actions, double beta,
            double dt) {
  if (actions.empty()) throw DimensionError("cost needs at least one action");
  if (sigma_sc.size() % actions.size() != 0) throw DimensionError("sigma series does not cover whole intervals");
  const std::size_t per = sigma_sc.size() / actions.size();
  double total = 0.0;
  for (std::size_t a = 0; a < actions.size(); ++a) {
    double integral = 0.0;
    for (std::size_t k = 0; k < per; ++k) integral += sigma_sc[a * per + k];
    double norm2 = 0.0;
    for (double v : actions[a]) norm2 += v * v;
    total += dt * integral + beta * norm2;
  }
  return total;
}

namespace {

class ModelSession : public PredictorSession {
 public:
  ModelSession(const SurrogateModel& model, const PolicyContext& ctx, int horizon)
      : model_(model), horizon_(horizon), radii0_(ctx.env.design().radii), t0_(ctx.env.time()) {
    const auto wave = model.encode_wave(ctx.observation, t0_);
    conds_ = wave.conds;
    const auto& info = model.env_info();
    const int n = model.latent_grid().n_cells;
    const int steps = horizon * info.steps_per_action;
    // Incident pair at ambient speed, shared by all shots.
    LatentPairStepper inc(model.latent_grid(), conds_.f_z, conds_.sigma_z, conds_.omega);
    std::vector<double> y(2 * n);
    std::copy(conds_.initial.u_inc.begin(), conds_.initial.u_inc.end(), y.begin());
    std::copy(conds_.initial.v_inc.begin(), conds_.initial.v_inc.end(), y.begin() + n);
    const double c2a = info.c_ambient * info.c_ambient;
    u_inc_.resize(static_cast<std::size_t>(steps) * n);
    for (int k = 0; k < steps; ++k) {
      inc.step(y, t0_ + k * info.dt, info.dt, [&](double, std::span<double> out) {
        std::fill(out.begin(), out.end(), c2a);
      });
      std::copy(y.begin(), y.begin() + n, u_inc_.begin() + static_cast<std::size_t>(k) * n);
    }
  }

  std::vector<double> predict(const std::vector<std::vector<double>>& actions) const override {
    if (static_cast<int>(actions.size()) != horizon_) throw DimensionError("action sequence length != horizon");
    const auto& info = model_.env_info();
    const int n = model_.latent_grid().n_cells;
    LatentSpeedInterp speed;
    std::vector<double> radii = radii0_;
    speed.c_frames.push_back(model_.speed_frame(radii));
    speed.t_knots.push_back(t0_);
    for (int a = 0; a < horizon_; ++a) {
      for (std::size_t k = 0; k < radii.size(); ++k) radii[k] += actions[a][k];
      speed.c_frames.push_back(model_.speed_frame(radii));
      speed.t_knots.push_back(t0_ + (a + 1) * info.action_dt());
    }
    LatentPairStepper tot(model_.latent_grid(), conds_.f_z, conds_.sigma_z, conds_.omega);
    std::vector<double> y(2 * n);
    std::copy(conds_.initial.u_tot.begin(), conds_.initial.u_tot.end(), y.begin());
    std::copy(conds_.initial.v_tot.begin(), conds_.initial.v_tot.end(), y.begin() + n);
    const int steps = horizon_ * info.steps_per_action;
    const double dx = model_.latent_grid().dx();
    std::vector<double> out(steps);
    for (int k = 0; k < steps; ++k) {
      const double t = t0_ + k * info.dt;
      tot.step(y, t, info.dt, [&](double ts, std::span<double> c2) {
        speed.c_at(ts, c2);
        for (auto& v : c2) v *= v;
      });
      const double* ui = u_inc_.data() + static_cast<std::size_t>(k) * n;
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += (y[i] - ui[i]) * (y[i] - ui[i]);
      s *= dx;
      if (!std::isfinite(s)) throw BlowUpError("u_tot", "planning rollout step " + std::to_string(k + 1));
      out[k] = s;
    }
    return out;
  }

 private:
  const SurrogateModel& model_;
  int horizon_;
  std::vector<double> radii0_;
  double t0_;
  LatentConditions conds_;
  std::vector<double> u_inc_;
};

class OracleSession : public PredictorSession {
 public:
  OracleSession(const AcousticEnv& env, int horizon, double scale) : env_(env), horizon_(horizon), scale_(scale) {}

  std::vector<double> predict(const std::vector<std::vector<double>>& actions) const override {
    if (static_cast<int>(actions.size()) != horizon_) throw DimensionError("action sequence length != horizon");
    AcousticEnv sim = env_;
    std::vector<double> out;
    for (const auto& a : actions) {
      const auto r = sim.step_action(a);
      for (double v : r.sigma_sc) out.push_back(v / scale_);
    }
    return out;
  }

 private:
  AcousticEnv env_;
  int horizon_;
  double scale_;
};

}  // namespace

std::unique_ptr<PredictorSession> ModelPredictor::begin(const PolicyContext& ctx, int horizon) const {
  return std::make_unique<ModelSession>(model_, ctx, horizon);
}

std::unique_ptr<PredictorSession> OraclePredictor::begin(const PolicyContext& ctx, int horizon) const {
  return std::make_unique<OracleSession>(ctx.env, horizon, sigma_scale_);
}

std::vector<ActionSequence> sample_candidates(const AcousticEnv& env, const MpcConfig& config,
                                              std::uint64_t step_seed) {
  if (config.n_shots < 1 || config.horizon < 1) throw ParameterError("n_shots and horizon must be >= 1");
  const auto& cfg = env.config();
  const double dmax = cfg.max_radius_delta();
  const double amp = config.action_scale * dmax;
  std::vector<ActionSequence> shots(config.n_shots);
  for (int s = 0; s < config.n_shots; ++s) {
    Rng rng(derive_seed(step_seed, static_cast<std::uint64_t>(s)));
    std::vector<double> radii = env.design().radii;
    auto& seq = shots[s];
    for (int a = 0; a < config.horizon; ++a) {
      std::vector<double> raw(radii.size());
      for (auto& v : raw) v = uniform(rng, -amp, amp);
      auto applied = clamp_action(raw, radii, cfg.design.r_min, cfg.design.r_max, dmax);
      for (std::size_t k = 0; k < radii.size(); ++k) radii[k] += applied[k];
      seq.push_back(std::move(applied));
    }
  }
  return shots;
}

PlanResult plan_candidates(const PolicyContext& ctx, const Predictor& predictor,
                           const std::vector<ActionSequence>& candidates, double beta, int n_threads) {
  if (candidates.empty()) throw ParameterError("no candidate action sequences");
  const int horizon = static_cast<int>(candidates.front().size());
  const auto session = predictor.begin(ctx, horizon);
  const double dt = ctx.env.config().dt;
  PlanResult r;
  r.costs.assign(candidates.size(), std::numeric_limits<double>::infinity());
  parallel_for(static_cast<int>(candidates.size()), n_threads, [&](int s) {
    try {
      r.costs[s] = cost(session->predict(candidates[s]), candidates[s], beta, dt);
    } catch (const BlowUpError&) {
      r.costs[s] = std::numeric_limits<double>::infinity();
    }
  });
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    if (!std::isfinite(r.costs[s])) {
      ++r.discarded;
      continue;
    }
    if (r.best_shot < 0 || r.costs[s] < r.best_cost) {
      r.best_shot = static_cast<int>(s);
      r.best_cost = r.costs[s];
    }
  }
  if (r.best_shot < 0) {
    std::fprintf(stderr, "mpc: all %zu shots blew up, applying the zero action\n", candidates.size());
    r.action.assign(ctx.env.design().radii.size(), 0.0);
  } else {
    r.action = candidates[r.best_shot].front();
  }
  return r;
}

PlanResult plan(const PolicyContext& ctx, const Predictor& predictor, const MpcConfig& config, double beta) {
  const std::uint64_t step_seed = derive_seed(config.seed, static_cast<std::uint64_t>(ctx.env.action_index()));
  return plan_candidates(ctx, predictor, sample_candidates(ctx.env, config, step_seed), beta, config.n_threads);
}

Policy mpc_policy(const Predictor& predictor, const MpcConfig& config, double beta) {
  if (beta < 0.0) throw ParameterError("beta must be >= 0");
  return [&predictor, config, beta](const PolicyContext& ctx) { return plan(ctx, predictor, config, beta).action; };
}

EpisodeRecord control_episode(const EnvConfig& env, const Predictor& predictor, const MpcConfig& config,
                              double beta, std::uint64_t episode_seed) {
  MpcConfig per_episode = config;
  per_episode.seed = derive_seed(config.seed, episode_seed);
  return run_episode(env, mpc_policy(predictor, per_episode, beta), episode_seed);
}

}  // namespace wavectl
