#pragma once

// Small surrogate models over short recorded episodes, plus a finite-difference
// probe of the training gradient.

#include <cmath>
#include <string>
#include <vector>

#include "wavectl/acoustic_env.hpp"
#include "wavectl/model.hpp"
#include "wavectl/random.hpp"
#include "wavectl/training.hpp"

namespace wavectl::fixtures {

inline LatentConfig small_latent_config(int n_cells = 64) {
  LatentConfig c;
  c.n_cells = n_cells;
  c.n_freq = 8;
  c.n_pml = 8;
  c.wave_channels1 = 2;
  c.wave_channels2 = 2;
  c.wave_channels3 = 2;
  c.wave_hidden = 4;
  c.design_hidden = 8;
  return c;
}

inline std::vector<EpisodeRecord> record_episodes(const EnvConfig& env, int n, std::uint64_t seed) {
  std::vector<EpisodeRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(run_random_episode(env, derive_seed(seed, static_cast<std::uint64_t>(i))));
  return out;
}

inline SurrogateModel model_for(const std::vector<EpisodeRecord>& eps, const LatentConfig& latent,
                                std::uint64_t seed) {
  SurrogateModel m(latent, ModelEnvInfo::from(eps.front().config), seed);
  m.frame_scale = dataset_frame_scale(eps);
  m.sigma_scale = dataset_sigma_scale(eps);
  m.beta = calibrate_beta(eps, m.sigma_scale);
  return m;
}

struct GradientProbe {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool ok = false;
};

// Central differences of the window loss for `per_tensor` evenly spread
// coordinates of every parameter tensor.
inline std::vector<GradientProbe> probe_gradients(SurrogateModel& model, const Window& w, const LossWeights& weights,
                                                  int per_tensor, double rel_tol = 1e-4, double abs_tol = 1e-7,
                                                  double eps = 1e-6) {
  nn::ParamStore grads = model.params.zeros_like();
  window_gradients(model, w, weights, grads);
  std::vector<GradientProbe> out;
  for (int t = 0; t < model.params.count(); ++t) {
    auto& data = model.params[t].data;
    const std::size_t n = data.size();
    const int count = std::min<int>(per_tensor, static_cast<int>(n));
    for (int s = 0; s < count; ++s) {
      const std::size_t k = (count == 1) ? n / 2 : (s * (n - 1)) / (count - 1);
      const double keep = data[k];
      data[k] = keep + eps;
      const double fp = predict_window(model, w, weights).loss.total;
      data[k] = keep - eps;
      const double fm = predict_window(model, w, weights).loss.total;
      data[k] = keep;
      GradientProbe p{model.params[t].name, k, grads[t].data[k], (fp - fm) / (2 * eps), false};
      p.ok = std::abs(p.analytic - p.numeric) <= abs_tol + rel_tol * std::abs(p.numeric);
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace wavectl::fixtures
