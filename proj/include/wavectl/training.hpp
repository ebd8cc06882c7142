#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wavectl/acoustic_env.hpp"
#include "wavectl/model.hpp"
#include "wavectl/nn.hpp"

namespace wavectl {

struct TrainConfig {
  int horizon_actions = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int max_epochs = 20;
  int batches_per_epoch = 10;
  std::uint64_t seed = 0;
  double weight_sc = 1.0;
  double weight_tot = 0.5;
  double weight_inc = 0.5;
  double start_window_fraction = 0.5;  // share of training windows anchored at tau = 0
  int holdout_episodes = 2;  // the last episodes of a dataset, never trained on
  int eval_batch = 8;        // windows per horizon in evaluate_horizon
  int n_threads = 0;         // 0: hardware concurrency
  bool no_pml = false;
};

struct LossWeights {
  double sc = 1.0;
  double tot = 0.5;
  double inc = 0.5;
};

struct SigmaSeries {
  std::vector<double> sc, tot, inc;
};

struct LossReport {
  double mse_sc = 0.0;
  double mse_tot = 0.0;
  double mse_inc = 0.0;
  double total = 0.0;
};

/// Mean squared error per series, combined with the weights.
LossReport loss(const SigmaSeries& pred, const SigmaSeries& target, const LossWeights& w);

/// One training window: observation at action tau, the design states over the
/// window and the normalized measured sigma series.
struct Window {
  Observation obs;
  std::vector<std::vector<double>> radii;  // horizon + 1 states
  SigmaSeries target;                      // already divided by sigma_scale
  double t0 = 0.0;
  int horizon = 0;
};

Window make_window(const EpisodeRecord& rec, int tau, int horizon, double sigma_scale);

struct WindowResult {
  LossReport loss;
  SigmaSeries pred;
};

/// Forward pass through encoders and latent rollout.
WindowResult predict_window(const SurrogateModel& model, const Window& w, const LossWeights& weights);

/// Loss and exact gradients for one window (discrete adjoint through the
/// rollout, then the encoders). grads must have the model's layout; gradients
/// are accumulated into it.
LossReport window_gradients(const SurrogateModel& model, const Window& w, const LossWeights& weights,
                            nn::ParamStore& grads);

/// Mean loss and gradient over a batch. Windows are processed in parallel and
/// reduced pairwise, so the result does not depend on the thread count.
LossReport batch_gradients(const SurrogateModel& model, const std::vector<Window>& batch, const LossWeights& weights,
                           nn::ParamStore& grads, int n_threads);

/// Data-dependent normalization constants.
double dataset_frame_scale(const std::vector<EpisodeRecord>& episodes);
double dataset_sigma_scale(const std::vector<EpisodeRecord>& episodes);
/// Mean per-action-interval integral of normalized sigma_sc, scaled by 0.1.
double calibrate_beta(const std::vector<EpisodeRecord>& episodes, double sigma_scale);

struct TrainLogEntry {
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;
  bool skipped = false;
};

struct TrainResult {
  SurrogateModel model;
  std::vector<TrainLogEntry> log;
  int skipped_batches = 0;
};

using TrainProgress = std::function<void(const TrainLogEntry&)>;

/// Trains a freshly initialized model on all but the held-out episodes.
TrainResult train(const std::vector<EpisodeRecord>& episodes, const LatentConfig& latent, const TrainConfig& config,
                  const TrainProgress& progress = {});

struct HorizonStat {
  int horizon = 0;
  double mean = 0.0;
  double stddev = 0.0;
  int samples = 0;
};

/// sigma_sc MSE (normalized units) per horizon over windows sampled from the
/// given episodes.
std::vector<HorizonStat> evaluate_horizon(const SurrogateModel& model, const std::vector<EpisodeRecord>& episodes,
                                          const std::vector<int>& horizons, int batch, std::uint64_t seed,
                                          int n_threads);

/// 20, 30, ..., 200.
std::vector<int> default_horizons();

/// Runs fn(i) for i in [0, n) on up to n_threads threads (0: hardware concurrency).
void parallel_for(int n, int n_threads, const std::function<void(int)>& fn);

}  // namespace wavectl
