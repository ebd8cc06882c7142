#pragma once

#include <vector>

#include "wavectl/field_grid.hpp"

namespace wavectl {

/// Absorption profile along one axis. sigma is a damping rate in 1/s.
struct PmlProfile1D {
  Grid1D grid;
  std::vector<double> sigma;
  int thickness_cells = 0;
  double scale = 0.0;
};

/// Cubic ramp: sigma(d) = scale * ((T - d) / T)^3 for depth d < T from either end,
/// zero deeper inside. Requires 0 < T < n_cells / 2 and scale > 0.
PmlProfile1D build_ramp(const Grid1D& grid, int thickness_cells, double scale);

/// All-zero profile (no absorption) on the given grid.
PmlProfile1D zero_profile(const Grid1D& grid);

/// Converts a dimensionless layer strength S = sigma_max * layer_width / c into
/// the ramp scale in 1/s. The round-trip amplitude attenuation of the cubic
/// ramp in the continuum limit is exp(-S / 2).
double pml_scale_from_strength(double strength, double wave_speed, int thickness_cells, double dx);

/// Trainable latent absorption: raw control values interpolated onto the grid
/// and mapped through scale * softplus(.), which is nonnegative everywhere.
struct LatentPmlParams {
  std::vector<double> raw;
  Grid1D grid;
  double scale = 1.0;
};

double softplus(double z);
double sigmoid(double z);

Field1D realize_latent_pml(const LatentPmlParams& params);

/// Vector-Jacobian product: given dL/dsigma on the grid, returns dL/draw.
std::vector<double> realize_latent_pml_vjp(const LatentPmlParams& params, const std::vector<double>& grad_sigma);

}  // namespace wavectl
