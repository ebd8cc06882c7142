#pragma once

// Reduced configurations that keep unit tests fast.

#include "wavectl/acoustic_env.hpp"

namespace wavectl::fixtures {

inline EnvConfig small_env_config() {
  EnvConfig c;
  c.nx = 48;
  c.ny = 48;
  c.dt = 2e-5;
  c.steps_per_action = 20;
  c.actions_per_episode = 10;
  c.obs_nx = 16;
  c.obs_ny = 16;
  c.pml_cells = 6;
  c.source.omega = 2500.0;
  return c;
}

}  // namespace wavectl::fixtures
