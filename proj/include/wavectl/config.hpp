#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "wavectl/acoustic_env.hpp"
#include "wavectl/model.hpp"
#include "wavectl/mpc.hpp"
#include "wavectl/training.hpp"

namespace wavectl {

struct RunConfig {
  EnvConfig env;
  LatentConfig latent;
  TrainConfig train;
  MpcConfig mpc;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  /// Throws ConfigError when any block is inconsistent (CFL for both
  /// simulators, horizon vs episode length, ...).
  void validate() const;
};

/// Every block is optional; unknown keys raise ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json env_to_json(const EnvConfig& e);
EnvConfig env_from_json(const nlohmann::json& j);
nlohmann::json latent_to_json(const LatentConfig& l);
LatentConfig latent_from_json(const nlohmann::json& j);
nlohmann::json train_to_json(const TrainConfig& t);
TrainConfig train_from_json(const nlohmann::json& j);
nlohmann::json mpc_to_json(const MpcConfig& m);
MpcConfig mpc_from_json(const nlohmann::json& j);

/// FNV-1a hash of the canonical JSON text of the environment block, leaving
/// out episode length and initial radii.
std::string env_hash(const EnvConfig& e);

}  // namespace wavectl
