#include "wavectl/pml.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wavectl/errors.hpp"

namespace wavectl {

PmlProfile1D build_ramp(const Grid1D& grid, int thickness_cells, double scale) {
  if (thickness_cells <= 0 || 2 * thickness_cells >= grid.n_cells) {
    throw ParameterError("PML thickness " + std::to_string(thickness_cells) + " outside (0, " +
                         std::to_string(grid.n_cells) + "/2)");
  }
  if (!(scale > 0.0)) throw ParameterError("PML scale must be positive");
  PmlProfile1D p{grid, std::vector<double>(grid.n_cells, 0.0), thickness_cells, scale};
  const double t = thickness_cells;
  for (int i = 0; i < grid.n_cells; ++i) {
    const int depth = std::min(i, grid.n_cells - 1 - i);
    if (depth < thickness_cells) {
      const double r = (t - depth) / t;
      p.sigma[i] = scale * r * r * r;
    }
  }
  return p;
}

PmlProfile1D zero_profile(const Grid1D& grid) {
  return PmlProfile1D{grid, std::vector<double>(grid.n_cells, 0.0), 0, 0.0};
}

double pml_scale_from_strength(double strength, double wave_speed, int thickness_cells, double dx) {
  if (!(strength > 0.0) || !(wave_speed > 0.0) || thickness_cells <= 0 || !(dx > 0.0)) {
    throw ParameterError("pml strength, wave speed, thickness and dx must be positive");
  }
  return strength * wave_speed / (thickness_cells * dx);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// Position of grid cell i in raw-parameter index space, split into the left
// control index and the fractional weight of the right one.
struct InterpWeight {
  int left;
  double frac;
};

InterpWeight interp_weight(int i, int n_cells, int n_raw) {
  if (n_raw == 1) return {0, 0.0};
  const double pos = static_cast<double>(i) * (n_raw - 1) / (n_cells - 1);
  int left = std::min(static_cast<int>(std::floor(pos)), n_raw - 2);
  return {left, pos - left};
}

}  // namespace

Field1D realize_latent_pml(const LatentPmlParams& params) {
  const int n_raw = static_cast<int>(params.raw.size());
  if (n_raw < 1) throw ParameterError("latent PML needs at least one raw parameter");
  Field1D out(params.grid);
  for (int i = 0; i < params.grid.n_cells; ++i) {
    const auto w = interp_weight(i, params.grid.n_cells, n_raw);
    double z = params.raw[w.left];
    if (n_raw > 1) z = (1.0 - w.frac) * params.raw[w.left] + w.frac * params.raw[w.left + 1];
    out[i] = params.scale * softplus(z);
  }
  return out;
}

std::vector<double> realize_latent_pml_vjp(const LatentPmlParams& params, const std::vector<double>& grad_sigma) {
  const int n_raw = static_cast<int>(params.raw.size());
  std::vector<double> g(n_raw, 0.0);
  for (int i = 0; i < params.grid.n_cells; ++i) {
    const auto w = interp_weight(i, params.grid.n_cells, n_raw);
    if (n_raw == 1) {
      g[0] += grad_sigma[i] * params.scale * sigmoid(params.raw[0]);
      continue;
    }
    const double z = (1.0 - w.frac) * params.raw[w.left] + w.frac * params.raw[w.left + 1];
    const double dz = grad_sigma[i] * params.scale * sigmoid(z);
    g[w.left] += (1.0 - w.frac) * dz;
    g[w.left + 1] += w.frac * dz;
  }
  return g;
}

}  // namespace wavectl
