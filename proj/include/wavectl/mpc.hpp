#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "wavectl/acoustic_env.hpp"
#include "wavectl/model.hpp"

namespace wavectl {

struct MpcConfig {
  int n_shots = 256;
  int horizon = 10;
  double beta = -1.0;          // negative: use the checkpoint's calibrated value
  double action_scale = 1.0;   // samples are uniform on +-action_scale * max delta
  std::uint64_t seed = 0;
  int n_threads = 0;
};

/// Sum over action intervals of dt * sum(sigma_sc) plus beta * |a|^2.
double cost(std::span<const double> sigma_sc, const std::vector<std::vector<double>>& actions, double beta,
            double dt);

/// Predicted sigma_sc series (one value per integration step) for candidate
/// action sequences starting from one environment state. predict() must be
/// safe to call concurrently.
class PredictorSession {
 public:
  virtual ~PredictorSession() = default;
  virtual std::vector<double> predict(const std::vector<std::vector<double>>& actions) const = 0;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::unique_ptr<PredictorSession> begin(const PolicyContext& ctx, int horizon) const = 0;
};

/// Uses the surrogate: encodes the observation once, shares the incident
/// latent trajectory across shots and rolls out only the total pair per shot.
class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(const SurrogateModel& model) : model_(model) {}
  std::unique_ptr<PredictorSession> begin(const PolicyContext& ctx, int horizon) const override;

 private:
  const SurrogateModel& model_;
};

/// Runs copies of the real environment; sigma values are divided by sigma_scale.
class OraclePredictor : public Predictor {
 public:
  explicit OraclePredictor(double sigma_scale = 1.0) : sigma_scale_(sigma_scale) {}
  std::unique_ptr<PredictorSession> begin(const PolicyContext& ctx, int horizon) const override;

 private:
  double sigma_scale_;
};

/// Clamped action sequences (rate limit, then bounds along the sequence).
using ActionSequence = std::vector<std::vector<double>>;

std::vector<ActionSequence> sample_candidates(const AcousticEnv& env, const MpcConfig& config,
                                              std::uint64_t step_seed);

struct PlanResult {
  std::vector<double> action;
  int best_shot = -1;
  double best_cost = 0.0;
  int discarded = 0;
  std::vector<double> costs;  // +inf for discarded shots
};

/// Scores given candidates; ties go to the lowest index. If every shot blows
/// up the zero action is returned with best_shot = -1.
PlanResult plan_candidates(const PolicyContext& ctx, const Predictor& predictor,
                           const std::vector<ActionSequence>& candidates, double beta, int n_threads);

PlanResult plan(const PolicyContext& ctx, const Predictor& predictor, const MpcConfig& config, double beta);

Policy mpc_policy(const Predictor& predictor, const MpcConfig& config, double beta);

/// Closed-loop episode (observe, plan, apply first action) with the episode's
/// initial radii drawn from episode_seed.
EpisodeRecord control_episode(const EnvConfig& env, const Predictor& predictor, const MpcConfig& config,
                              double beta, std::uint64_t episode_seed);

}  // namespace wavectl
