#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "wavectl/config.hpp"

namespace wavectl {

struct CommandOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> episodes;
  std::optional<std::string> checkpoint;
  std::optional<std::string> dataset;
  bool no_pml = false;
  int episode = 0;
  bool quiet = false;
};

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitBlowUp = 3 };

/// Config file (or defaults) with command-line overrides applied and validated.
RunConfig resolve_config(const CommandOptions& opt);

/// Each command writes its outputs (CSV, float32 arrays, SVG, run.json) into
/// the output directory. They throw on failure; run_command maps exceptions
/// to exit codes.
void cmd_collect(const CommandOptions& opt);
void cmd_train(const CommandOptions& opt);
void cmd_eval_horizon(const CommandOptions& opt);
void cmd_predict(const CommandOptions& opt);
void cmd_control(const CommandOptions& opt);
void cmd_latent_field(const CommandOptions& opt);

int run_command(const std::string& name, const CommandOptions& opt);

}  // namespace wavectl
