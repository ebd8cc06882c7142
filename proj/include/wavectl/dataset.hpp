#pragma once

#include <filesystem>
#include <vector>

#include "wavectl/acoustic_env.hpp"

namespace wavectl {

/// Writes manifest.json, per-episode float32 frame and sigma files, and CSVs of
/// actions and radii into dir. All episodes must share one environment config.
void save_dataset(const std::filesystem::path& dir, const std::vector<EpisodeRecord>& episodes);

/// Inverse of save_dataset. Frames and sigma series come back at float32
/// precision; actions and radii are exact.
std::vector<EpisodeRecord> load_dataset(const std::filesystem::path& dir);

/// Config hash recorded in a dataset manifest.
std::string dataset_env_hash(const std::filesystem::path& dir);

}  // namespace wavectl
