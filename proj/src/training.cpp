#include "wavectl/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "wavectl/config.hpp"
#include "wavectl/errors.hpp"
#include "wavectl/random.hpp"

namespace wavectl {

void parallel_for(int n, int n_threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int threads = n_threads > 0 ? n_threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  std::vector<std::exception_ptr> errors(n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  // Rethrow the failure with the lowest index so errors are reproducible.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

LossReport loss(const SigmaSeries& pred, const SigmaSeries& target, const LossWeights& w) {
  auto mse = [](const std::vector<double>& a, const std::vector<double>& b, const char* name) {
    if (a.size() != b.size()) throw DimensionError(std::string("loss: length mismatch in ") + name);
    if (a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
  };
  LossReport r;
  r.mse_sc = mse(pred.sc, target.sc, "sigma_sc");
  r.mse_tot = mse(pred.tot, target.tot, "sigma_tot");
  r.mse_inc = mse(pred.inc, target.inc, "sigma_inc");
  r.total = w.sc * r.mse_sc + w.tot * r.mse_tot + w.inc * r.mse_inc;
  return r;
}

Window make_window(const EpisodeRecord& rec, int tau, int horizon, double sigma_scale) {
  if (horizon < 1 || tau < 0 || tau + horizon > rec.n_actions()) {
    throw ParameterError("window [" + std::to_string(tau) + ", " + std::to_string(tau + horizon) +
                         ") does not fit an episode of " + std::to_string(rec.n_actions()) + " actions");
  }
  Window w;
  w.obs = observation_at(rec, tau);
  w.radii.assign(rec.radii.begin() + tau, rec.radii.begin() + tau + horizon + 1);
  const std::size_t spa = static_cast<std::size_t>(rec.steps_per_action);
  const std::size_t a = tau * spa, b = (tau + horizon) * spa;
  const double inv = 1.0 / sigma_scale;
  auto slice = [&](const std::vector<double>& s) {
    std::vector<double> out(s.begin() + a, s.begin() + b);
    for (auto& x : out) x *= inv;
    return out;
  };
  w.target.sc = slice(rec.sigma_sc);
  w.target.tot = slice(rec.sigma_tot);
  w.target.inc = slice(rec.sigma_inc);
  w.t0 = tau * rec.config.action_dt();
  w.horizon = horizon;
  return w;
}

WindowResult predict_window(const SurrogateModel& model, const Window& w, const LossWeights& weights) {
  const auto wave = model.encode_wave(w.obs, w.t0);
  const auto design = model.encode_design_window(w.radii, w.t0);
  const auto& info = model.env_info();
  const auto r = rollout(wave.conds, design.speed, w.horizon, info.steps_per_action, info.dt);
  WindowResult out;
  out.pred.sc = r.sigma_sc;
  out.pred.tot = r.sigma_tot;
  out.pred.inc = r.sigma_inc;
  out.loss = loss(out.pred, w.target, weights);
  return out;
}

LossReport window_gradients(const SurrogateModel& model, const Window& w, const LossWeights& weights,
                            nn::ParamStore& grads) {
  const auto wave = model.encode_wave(w.obs, w.t0);
  const auto design = model.encode_design_window(w.radii, w.t0);
  const auto& info = model.env_info();
  LossReport rep;
  std::vector<double> d_sc, d_tot, d_inc;
  auto cotangents = [&](const RolloutResult& r) {
    const SigmaSeries pred{r.sigma_sc, r.sigma_tot, r.sigma_inc};
    rep = loss(pred, w.target, weights);
    const double n = static_cast<double>(pred.sc.size());
    auto cot = [&](const std::vector<double>& p, const std::vector<double>& t, double weight) {
      std::vector<double> d;
      if (weight == 0.0) return d;
      d.resize(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) d[i] = weight * 2.0 * (p[i] - t[i]) / n;
      return d;
    };
    d_sc = cot(pred.sc, w.target.sc, weights.sc);
    d_tot = cot(pred.tot, w.target.tot, weights.tot);
    d_inc = cot(pred.inc, w.target.inc, weights.inc);
    return SigmaCotangents{d_sc, d_tot, d_inc};
  };
  RolloutResult forward;
  const auto g =
      rollout_with_vjp(wave.conds, design.speed, w.horizon, info.steps_per_action, info.dt, cotangents, forward);
  model.backward_wave(wave, g, grads);
  model.backward_design(design, g.c_frames, grads);
  return rep;
}

LossReport batch_gradients(const SurrogateModel& model, const std::vector<Window>& batch, const LossWeights& weights,
                           nn::ParamStore& grads, int n_threads) {
  if (batch.empty()) throw DimensionError("empty batch");
  const int b = static_cast<int>(batch.size());
  std::vector<nn::ParamStore> parts(b, model.params.zeros_like());
  std::vector<LossReport> reports(b);
  parallel_for(b, n_threads, [&](int i) { reports[i] = window_gradients(model, batch[i], weights, parts[i]); });
  nn::ParamStore sum = nn::tree_sum(std::move(parts));
  sum.check_finite("batch gradient");
  grads.add_scaled(sum, 1.0 / b);
  LossReport mean;
  for (const auto& r : reports) {
    mean.mse_sc += r.mse_sc / b;
    mean.mse_tot += r.mse_tot / b;
    mean.mse_inc += r.mse_inc / b;
    mean.total += r.total / b;
  }
  return mean;
}

double dataset_frame_scale(const std::vector<EpisodeRecord>& episodes) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& e : episodes) {
    for (float f : e.frames) s += static_cast<double>(f) * f;
    n += e.frames.size();
  }
  const double rms = n ? std::sqrt(s / n) : 0.0;
  return rms > 0.0 ? rms : 1.0;
}

double dataset_sigma_scale(const std::vector<EpisodeRecord>& episodes) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& e : episodes) {
    for (double v : e.sigma_tot) s += v;
    n += e.sigma_tot.size();
  }
  const double mean = n ? s / n : 0.0;
  return mean > 0.0 ? mean : 1.0;
}

double calibrate_beta(const std::vector<EpisodeRecord>& episodes, double sigma_scale) {
  double s = 0.0;
  std::size_t intervals = 0;
  for (const auto& e : episodes) {
    const double dt = e.config.dt;
    for (double v : e.sigma_sc) s += dt * v / sigma_scale;
    intervals += e.actions.size();
  }
  return intervals ? 0.1 * s / intervals : 0.0;
}

TrainResult train(const std::vector<EpisodeRecord>& episodes, const LatentConfig& latent, const TrainConfig& config,
                  const TrainProgress& progress) {
  const int n_total = static_cast<int>(episodes.size());
  const int n_train = n_total - std::max(0, config.holdout_episodes);
  if (n_train < 1) throw ParameterError("no training episodes left after the hold-out split");
  const std::vector<EpisodeRecord> train_eps(episodes.begin(), episodes.begin() + n_train);
  for (const auto& e : train_eps) {
    if (e.n_actions() < config.horizon_actions) throw ParameterError("episode shorter than the training horizon");
  }
  if (config.batch_size < 1 || config.max_epochs < 0 || config.batches_per_epoch < 1) {
    throw ParameterError("batch_size and batches_per_epoch must be >= 1");
  }

  TrainResult result{SurrogateModel(latent, ModelEnvInfo::from(train_eps.front().config), config.seed), {}, 0};
  SurrogateModel& model = result.model;
  model.no_pml = config.no_pml;
  model.frame_scale = dataset_frame_scale(train_eps);
  model.sigma_scale = dataset_sigma_scale(train_eps);
  model.beta = calibrate_beta(train_eps, model.sigma_scale);
  model.env_hash = env_hash(train_eps.front().config);

  const LossWeights weights{config.weight_sc, config.weight_tot, config.weight_inc};
  nn::Adam adam(model.params, config.learning_rate, config.beta1, config.beta2);
  Rng rng(derive_seed(config.seed, 7));
  const int h = config.horizon_actions;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (int bi = 0; bi < config.batches_per_epoch; ++bi) {
      std::vector<Window> batch;
      batch.reserve(config.batch_size);
      for (int k = 0; k < config.batch_size; ++k) {
        const auto& ep = train_eps[uniform_index(rng, train_eps.size())];
        const bool from_start = uniform01(rng) < config.start_window_fraction;
        const int tau =
            from_start ? 0 : static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ep.n_actions() - h + 1)));
        batch.push_back(make_window(ep, tau, h, model.sigma_scale));
      }
      TrainLogEntry entry{epoch, bi, 0.0, false};
      try {
        nn::ParamStore grads = model.params.zeros_like();
        entry.loss = batch_gradients(model, batch, weights, grads, config.n_threads).total;
        adam.step(model.params, grads);
      } catch (const BlowUpError&) {
        entry.skipped = true;
        entry.loss = std::numeric_limits<double>::quiet_NaN();
        ++result.skipped_batches;
      }
      result.log.push_back(entry);
      if (progress) progress(entry);
    }
  }
  return result;
}

std::vector<int> default_horizons() {
  std::vector<int> h;
  for (int k = 20; k <= 200; k += 10) h.push_back(k);
  return h;
}

std::vector<HorizonStat> evaluate_horizon(const SurrogateModel& model, const std::vector<EpisodeRecord>& episodes,
                                          const std::vector<int>& horizons, int batch, std::uint64_t seed,
                                          int n_threads) {
  if (batch < 1) throw ParameterError("evaluation batch must be >= 1");
  std::vector<HorizonStat> out;
  const LossWeights weights{1.0, 0.0, 0.0};
  for (int h : horizons) {
    std::vector<const EpisodeRecord*> usable;
    for (const auto& e : episodes) {
      if (e.n_actions() >= h) usable.push_back(&e);
    }
    HorizonStat st;
    st.horizon = h;
    if (usable.empty()) {
      out.push_back(st);
      continue;
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(h)));
    std::vector<Window> windows;
    for (int k = 0; k < batch; ++k) {
      const auto& ep = *usable[uniform_index(rng, usable.size())];
      const int tau = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ep.n_actions() - h + 1)));
      windows.push_back(make_window(ep, tau, h, model.sigma_scale));
    }
    std::vector<double> mse(batch);
    parallel_for(batch, n_threads, [&](int i) {
      try {
        mse[i] = predict_window(model, windows[i], weights).loss.mse_sc;
      } catch (const BlowUpError&) {
        mse[i] = std::numeric_limits<double>::infinity();
      }
    });
    double s = 0.0;
    for (double v : mse) s += v;
    st.mean = s / batch;
    double var = 0.0;
    for (double v : mse) var += (v - st.mean) * (v - st.mean);
    st.stddev = batch > 1 ? std::sqrt(var / (batch - 1)) : 0.0;
    st.samples = batch;
    out.push_back(st);
  }
  return out;
}

}  // namespace wavectl
