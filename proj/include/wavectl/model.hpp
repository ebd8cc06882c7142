#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wavectl/acoustic_env.hpp"
#include "wavectl/encoders.hpp"
#include "wavectl/latent_dynamics.hpp"
#include "wavectl/nn.hpp"
#include "wavectl/pml.hpp"

namespace wavectl {

struct LatentConfig {
  int n_cells = 1024;
  double length = 0.0;  // 0 selects 4x the real-domain diagonal
  int n_freq = 64;
  int n_pml = 64;
  double pml_scale = 200.0;
  /// Initial latent absorption: a cubic ramp covering this fraction of the
  /// latent domain at each end, with the given dimensionless strength.
  double pml_init_fraction = 0.125;
  double pml_init_strength = 20.0;
  /// Speed frames are c_amb * (1 + speed_gain * embedding).
  double speed_gain = 0.25;
  double c_min_fraction = 0.2;
  int wave_channels1 = 6;
  int wave_channels2 = 6;
  int wave_channels3 = 4;
  int wave_hidden = 12;
  int design_hidden = 64;
};

/// Facts about the real environment that the surrogate depends on.
struct ModelEnvInfo {
  double c_ambient = 1531.0;
  double omega = 1000.0;
  double dt = 1e-5;
  int steps_per_action = 100;
  int n_scatterers = 4;
  double r_min = 0.2;
  double r_max = 1.0;
  int obs_nx = 128;
  int obs_ny = 128;
  double domain_diagonal = 0.0;
  double max_radius_delta = 0.5;

  static ModelEnvInfo from(const EnvConfig& env);
  double action_dt() const { return dt * steps_per_action; }
};

/// Wave encoder + design encoder mapping observations and radii windows to
/// latent conditions.
class SurrogateModel {
 public:
  struct WaveOutput {
    LatentConditions conds;
    LatentPmlParams pml;
    WaveEncoder::Cache cache;
  };
  struct DesignOutput {
    LatentSpeedInterp speed;
    std::vector<DesignEncoder::Cache> caches;
    std::vector<std::vector<unsigned char>> free;  // 1 where the frame is not clamped
  };

  SurrogateModel() = default;
  SurrogateModel(const LatentConfig& latent, const ModelEnvInfo& env, std::uint64_t seed);

  /// Latent initial state, source and absorption at latent time t0.
  WaveOutput encode_wave(const Observation& obs, double t0) const;
  /// One speed frame per design state, knots every action interval from t0.
  DesignOutput encode_design_window(const std::vector<std::vector<double>>& radii_seq, double t0) const;
  /// Single speed frame for one radii vector.
  std::vector<double> speed_frame(const std::vector<double>& radii, DesignEncoder::Cache* cache = nullptr,
                                  std::vector<unsigned char>* free = nullptr) const;

  /// Chain latent gradients back to encoder parameters.
  void backward_wave(const WaveOutput& out, const LatentGradients& g, nn::ParamStore& grads) const;
  void backward_design(const DesignOutput& out, const std::vector<std::vector<double>>& g_frames,
                       nn::ParamStore& grads) const;

  const LatentConfig& latent_config() const { return latent_; }
  const ModelEnvInfo& env_info() const { return env_; }
  const Grid1D& latent_grid() const { return grid_; }
  const SineBasis& basis() const { return basis_; }
  double c_min() const { return latent_.c_min_fraction * env_.c_ambient; }
  double c_max() const { return 0.5 * grid_.dx() / env_.dt; }
  std::uint64_t seed() const { return seed_; }

  /// Initial bias of the absorption head, the raw values of the ramp prior.
  std::vector<double> pml_prior_raw() const;

  nn::ParamStore params;
  double frame_scale = 1.0;  // observation frames are divided by this
  double sigma_scale = 1.0;  // measured sigma series are divided by this
  double beta = 0.0;         // calibrated action-penalty weight
  bool no_pml = false;       // sigma_z forced to zero
  std::string env_hash;

 private:
  LatentConfig latent_;
  ModelEnvInfo env_;
  std::uint64_t seed_ = 0;
  Grid1D grid_;
  SineBasis basis_;
  WaveEncoder wave_;
  DesignEncoder design_;
};

/// Directory holding manifest.json and params.f32.
void save_checkpoint(const SurrogateModel& model, const std::filesystem::path& dir);
SurrogateModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace wavectl
