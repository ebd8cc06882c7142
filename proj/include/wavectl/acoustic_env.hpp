#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wavectl/field_grid.hpp"
#include "wavectl/pml.hpp"
#include "wavectl/random.hpp"
#include "wavectl/rk4.hpp"

namespace wavectl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct MediumParams {
  double c_ambient = 1531.0;
  double c_scatterer = 1032.0;
  bool operator==(const MediumParams&) const = default;
};

/// Cylindrical scatterers. Only the radii actuate.
struct Design {
  std::vector<Vec2> centers;
  std::vector<double> radii;
  double r_min = 0.2;
  double r_max = 1.0;

  std::size_t size() const { return centers.size(); }
};

/// Linear interpolation of radii between two designs over [t0, t1].
class DesignInterpolation {
 public:
  /// Throws ParameterError if any radius would move faster than actuation_rate (m/s)
  /// or if t1 <= t0.
  static DesignInterpolation make(Design start, Design end, double t0, double t1, double actuation_rate);

  double radius_at(std::size_t k, double t) const;
  std::vector<double> radii_at(double t) const;

  const Design& start() const { return start_; }
  const Design& end() const { return end_; }
  double t0() const { return t0_; }
  double t1() const { return t1_; }

 private:
  Design start_;
  Design end_;
  double t0_ = 0.0;
  double t1_ = 0.0;
};

/// Sound speed per cell at time t: c_scatterer inside any interpolated disk
/// (cell centre strictly inside), c_ambient elsewhere.
Field2D speed_field(const DesignInterpolation& interp, double t, const MediumParams& medium, const Grid2D& grid);

/// Oscillating source: forcing term shape * sin(2*pi*omega*t) inside the velocity gradients.
struct SourceSpec {
  Field2D shape;
  double omega = 0.0;
};

/// Isotropic Gaussian bump exp(-r^2 / (2 w^2)), w = width_cells * dx, zeroed inside the PML.
SourceSpec gaussian_source(const Grid2D& grid, Vec2 center, double width_cells, double amplitude, double omega,
                           int pml_cells);

/// Six-field state [u, v_x, v_y, psi_x, psi_y, gamma] stored contiguously.
class RealState {
 public:
  enum Component : int { U = 0, VX = 1, VY = 2, PSI_X = 3, PSI_Y = 4, GAMMA = 5 };
  static constexpr int kComponents = 6;
  static constexpr std::array<const char*, 6> kNames = {"u", "v_x", "v_y", "psi_x", "psi_y", "gamma"};

  RealState() = default;
  explicit RealState(const Grid2D& grid, double t = 0.0) : grid_(grid), data_(6 * grid.size(), 0.0), t_(t) {}

  const Grid2D& grid() const { return grid_; }
  double t() const { return t_; }
  void set_t(double t) { t_ = t; }

  std::span<double> component(int k) { return std::span<double>(data_).subspan(k * grid_.size(), grid_.size()); }
  std::span<const double> component(int k) const {
    return std::span<const double>(data_).subspan(k * grid_.size(), grid_.size());
  }
  Field2D field(int k) const;
  void set_field(int k, const Field2D& f);

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Throws BlowUpError naming the first component with a NaN or Inf.
  void check_finite(const std::string& where) const;

 private:
  Grid2D grid_;
  std::vector<double> data_;
  double t_ = 0.0;
};

/// Right-hand side of the PML-transformed split-field system on a fixed grid.
/// The outer ring of u is held fixed (u' = 0), which terminates the PML with a
/// reflecting wall; with pml profiles of zero the same wall is the hard-wall case.
class WaveSolver2D {
 public:
  WaveSolver2D(const Grid2D& grid, const SourceSpec& source, const PmlProfile1D& pml_x, const PmlProfile1D& pml_y);

  /// dydt = N(y, t) given squared sound speed per cell.
  void eval(std::span<const double> y, std::span<const double> c2, double t, std::span<double> dydt);

  /// One RK4 step. c2_at(t) must return the squared speed field at time t.
  /// Stage combinations are fused into the row sweep of the stencil.
  template <class C2At>
  void step(RealState& s, double dt, C2At&& c2_at) {
    const std::size_t n = grid_.size();
    const std::size_t m = 6 * n;
    stage_a_.resize(m);
    stage_b_.resize(m);
    acc_.resize(m);
    double* y = s.data().data();
    double* sa = stage_a_.data();
    double* sb = stage_b_.data();
    double* acc = acc_.data();
    const double t = s.t();
    const double h = dt;
    const int nx = grid_.nx;
    auto stage = [&](const double* in, double ts, double w_acc, double w_next, double* next, bool first) {
      kernel(in, c2_at(ts).data(), ts, [&](std::size_t off, const double* const* k) {
        for (int c = 0; c < 6; ++c) {
          const double* __restrict kc = k[c];
          const double* __restrict yc = y + c * n + off;
          double* __restrict ac = acc + c * n + off;
          double* __restrict nc = next + c * n + off;
          if (first) {
            for (int i = 0; i < nx; ++i) ac[i] = yc[i] + w_acc * kc[i];
          } else {
            for (int i = 0; i < nx; ++i) ac[i] += w_acc * kc[i];
          }
          for (int i = 0; i < nx; ++i) nc[i] = yc[i] + w_next * kc[i];
        }
      });
    };
    stage(y, t, h / 6.0, 0.5 * h, sa, true);
    stage(sa, t + 0.5 * h, h / 3.0, 0.5 * h, sb, false);
    stage(sb, t + 0.5 * h, h / 3.0, h, sa, false);
    kernel(sa, c2_at(t + h).data(), t + h, [&](std::size_t off, const double* const* k) {
      for (int c = 0; c < 6; ++c) {
        const double* __restrict kc = k[c];
        const double* __restrict ac = acc + c * n + off;
        double* __restrict yc = y + c * n + off;
        for (int i = 0; i < nx; ++i) yc[i] = ac[i] + (h / 6.0) * kc[i];
      }
    });
    s.set_t(t + dt);
  }

  const Grid2D& grid() const { return grid_; }

 private:
  Grid2D grid_;
  std::vector<double> sigma_x_;  // per column
  std::vector<double> sigma_y_;  // per row
  std::vector<double> dfdx_;
  std::vector<double> dfdy_;
  double omega_;
  std::vector<double> stage_a_;
  std::vector<double> stage_b_;
  std::vector<double> acc_;
  mutable std::vector<double> rows_;

  // Evaluates the right-hand side row by row and hands the six derivative
  // rows starting at flat offset `off` to sink(off, rows).
  template <class Sink>
  void kernel(const double* y, const double* cc, double t, Sink&& sink) const;
};

template <class Sink>
void WaveSolver2D::kernel(const double* y, const double* cc, double t, Sink&& sink) const {
  const int nx = grid_.nx;
  const int ny = grid_.ny;
  const std::size_t n = grid_.size();
  const double* u = y;
  const double* vx = u + n;
  const double* vy = u + 2 * n;
  const double* px = u + 3 * n;
  const double* py = u + 4 * n;
  const double* g = u + 5 * n;
  const double s = std::sin(2.0 * 3.14159265358979323846 * omega_ * t);
  const double hx = 0.5 / grid_.dx();
  const double hy = 0.5 / grid_.dy();
  const double* sxp = sigma_x_.data();

  rows_.resize(8 * static_cast<std::size_t>(nx));
  double* __restrict k0 = rows_.data();
  double* __restrict k1 = k0 + nx;
  double* __restrict k2 = k1 + nx;
  double* __restrict k3 = k2 + nx;
  double* __restrict k4 = k3 + nx;
  double* __restrict k5 = k4 + nx;
  double* __restrict da = k5 + nx;  // d vx / dx
  double* __restrict db = da + nx;  // d vy / dy
  const double* const rows[6] = {k0, k1, k2, k3, k4, k5};

  for (int j = 0; j < ny; ++j) {
    const std::size_t off = static_cast<std::size_t>(j) * nx;
    const double sy = sigma_y_[j];
    const double* uj = u + off;
    const double* vxj = vx + off;
    // x-derivatives along the row (k1 holds du/dx).
    k1[0] = (-3.0 * uj[0] + 4.0 * uj[1] - uj[2]) * hx;
    da[0] = (-3.0 * vxj[0] + 4.0 * vxj[1] - vxj[2]) * hx;
    for (int i = 1; i < nx - 1; ++i) {
      k1[i] = (uj[i + 1] - uj[i - 1]) * hx;
      da[i] = (vxj[i + 1] - vxj[i - 1]) * hx;
    }
    k1[nx - 1] = (3.0 * uj[nx - 1] - 4.0 * uj[nx - 2] + uj[nx - 3]) * hx;
    da[nx - 1] = (3.0 * vxj[nx - 1] - 4.0 * vxj[nx - 2] + vxj[nx - 3]) * hx;
    // y-derivatives (k2 holds du/dy).
    if (j == 0) {
      for (int i = 0; i < nx; ++i) {
        k2[i] = (-3.0 * u[i] + 4.0 * u[nx + i] - u[2 * nx + i]) * hy;
        db[i] = (-3.0 * vy[i] + 4.0 * vy[nx + i] - vy[2 * nx + i]) * hy;
      }
    } else if (j == ny - 1) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t q = off + i;
        k2[i] = (3.0 * u[q] - 4.0 * u[q - nx] + u[q - 2 * nx]) * hy;
        db[i] = (3.0 * vy[q] - 4.0 * vy[q - nx] + vy[q - 2 * nx]) * hy;
      }
    } else {
      for (int i = 0; i < nx; ++i) {
        const std::size_t q = off + i;
        k2[i] = (u[q + nx] - u[q - nx]) * hy;
        db[i] = (vy[q + nx] - vy[q - nx]) * hy;
      }
    }
    const double* fxj = dfdx_.data() + off;
    const double* fyj = dfdy_.data() + off;
    const double* ccj = cc + off;
    const double* pxj = px + off;
    const double* pyj = py + off;
    const double* gj = g + off;
    const double* vyj = vy + off;
    for (int i = 0; i < nx; ++i) {
      const double sx = sxp[i];
      k0[i] = ccj[i] * (da[i] + db[i]) + pxj[i] + pyj[i] - (sx + sy) * uj[i] - gj[i];
      k1[i] = k1[i] + s * fxj[i] - sx * vxj[i];
      k2[i] = k2[i] + s * fyj[i] - sy * vyj[i];
      k3[i] = ccj[i] * sx * db[i];
      k4[i] = ccj[i] * sy * da[i];
      k5[i] = sx * sy * uj[i];
    }
    // Reflecting outer wall: u is held at its boundary value.
    if (j == 0 || j == ny - 1) {
      for (int i = 0; i < nx; ++i) k0[i] = 0.0;
    } else {
      k0[0] = 0.0;
      k0[nx - 1] = 0.0;
    }
    sink(off, rows);
  }
}

/// Time derivative of all six fields. Throws BlowUpError on non-finite input.
RealState rhs(const RealState& state, const Field2D& c, const SourceSpec& source, const PmlProfile1D& pml_x,
              const PmlProfile1D& pml_y, double t);

/// Classical RK4 step with a time-independent speed field.
RealState rk4_step(const RealState& state, const Field2D& c, const SourceSpec& source, const PmlProfile1D& pml_x,
                   const PmlProfile1D& pml_y, double dt);

/// Discrete energy of (u^2 + c^2 (v_x^2 + v_y^2)) over the whole grid, trapezoidal
/// weights (edge nodes count half).
double wave_energy(const RealState& state, const Field2D& c);

/// Integral of (u_tot - u_inc)^2 over cells at least `pml_cells` away from every edge.
double scattered_energy(const Field2D& u_tot, const Field2D& u_inc, int pml_cells);

// ---------------------------------------------------------------------------
// Environment

struct SourceConfig {
  Vec2 center{-2.5, 0.0};
  double width_cells = 2.0;
  double amplitude = 1.0;
  double omega = 1000.0;
};

struct DesignConfig {
  std::vector<Vec2> centers{{0.3, -1.2}, {0.3, 1.2}, {2.7, -1.2}, {2.7, 1.2}};
  std::optional<std::vector<double>> initial_radii;  // random in bounds when empty
  double r_min = 0.2;
  double r_max = 1.0;
  double actuation_rate = 500.0;
};

struct EnvConfig {
  int nx = 128;
  int ny = 128;
  double length_x = 15.0;
  double length_y = 15.0;
  double dt = 1e-5;
  int steps_per_action = 100;
  int actions_per_episode = 200;
  int obs_nx = 128;
  int obs_ny = 128;
  MediumParams medium;
  int pml_cells = 16;
  double pml_strength = 30.0;
  SourceConfig source;
  DesignConfig design;

  Grid2D grid() const { return Grid2D::make(nx, ny, length_x, length_y); }
  double action_dt() const { return dt * steps_per_action; }
  double max_radius_delta() const { return design.actuation_rate * action_dt(); }
  std::size_t n_scatterers() const { return design.centers.size(); }

  /// Throws ConfigError on CFL violation (c_max dt / min(dx, dy) > 0.5) or
  /// inconsistent fields.
  void validate() const;
};

/// Rate limit first (|a| <= max_delta), then radius bounds. Returns the applied deltas.
std::vector<double> clamp_action(std::span<const double> action, std::span<const double> radii, double r_min,
                                 double r_max, double max_delta);

/// Three reduced-resolution frames of the total displacement, oldest first.
struct Observation {
  int nx = 0;
  int ny = 0;
  std::vector<float> frames;  // 3 * ny * nx
  std::vector<double> design_radii;

  std::span<const float> frame(int k) const {
    return std::span<const float>(frames).subspan(static_cast<std::size_t>(k) * nx * ny, static_cast<std::size_t>(nx) * ny);
  }
};

struct ActionResult {
  std::vector<double> applied_action;
  std::vector<double> sigma_sc;
  std::vector<double> sigma_tot;
  std::vector<double> sigma_inc;
};

/// Total and incident simulations advanced in lockstep. The incident copy uses
/// a uniform ambient medium with the same source and initial conditions.
class AcousticEnv {
 public:
  explicit AcousticEnv(const EnvConfig& config);

  /// Quiescent state at t = 0 with the given radii.
  void reset(const std::vector<double>& initial_radii);

  /// Clamps the action, interpolates the design over one action interval and
  /// advances steps_per_action RK4 steps of both simulations.
  ActionResult step_action(std::span<const double> action);

  Observation observe() const;

  const EnvConfig& config() const { return config_; }
  const Design& design() const { return design_; }
  const RealState& total() const { return total_; }
  const RealState& incident() const { return incident_; }
  int action_index() const { return action_index_; }
  double time() const { return total_.t(); }

  /// Speed field for the current design (static radii).
  Field2D current_speed() const;

  /// Reduced-resolution copy of the current total displacement.
  std::vector<float> current_frame() const;

 private:
  void fill_c2(const DesignInterpolation& interp, double t);
  double interior_integral_sq(std::span<const double> a, std::span<const double> b) const;

  struct CellDistance {
    std::size_t cell;
    double distance;
  };

  EnvConfig config_;
  Grid2D grid_;
  Design design_;
  SourceSpec source_;
  PmlProfile1D pml_x_;
  PmlProfile1D pml_y_;
  WaveSolver2D solver_total_;
  WaveSolver2D solver_incident_;
  RealState total_;
  RealState incident_;
  std::vector<std::vector<CellDistance>> near_cells_;  // per scatterer, cells within r_max
  std::vector<double> c2_;
  std::vector<double> c2_ambient_;
  std::array<std::vector<float>, 3> frame_history_;
  int action_index_ = 0;
};

/// One environment rollout. frames[k] is the observation frame at action
/// boundary k (k = 0..n_actions); sigma series hold one value per integration step.
struct EpisodeRecord {
  EnvConfig config;
  std::uint64_t seed = 0;
  int obs_nx = 0;
  int obs_ny = 0;
  int steps_per_action = 0;
  std::vector<float> frames;
  std::vector<std::vector<double>> radii;
  std::vector<std::vector<double>> actions;
  std::vector<double> sigma_sc;
  std::vector<double> sigma_tot;
  std::vector<double> sigma_inc;

  int n_actions() const { return static_cast<int>(actions.size()); }
  std::span<const float> frame(int k) const;
};

/// Observation at action boundary tau: frames tau-2, tau-1, tau. Frames before
/// the episode start are zero, which is the exact quiescent state.
Observation observation_at(const EpisodeRecord& record, int tau);

struct PolicyContext {
  const AcousticEnv& env;
  const Observation& observation;
  const std::vector<std::vector<double>>& radii_history;
};

using Policy = std::function<std::vector<double>(const PolicyContext&)>;

/// Uniform radius deltas in [-max_delta, max_delta] per scatterer.
Policy random_policy(std::uint64_t seed, double max_delta);

/// Initial radii for an episode: the configured ones, or uniform in bounds from the seed.
std::vector<double> initial_radii_for(const EnvConfig& config, std::uint64_t seed);

/// Deterministic given (config, policy, seed).
EpisodeRecord run_episode(const EnvConfig& config, const Policy& policy, std::uint64_t seed);

EpisodeRecord run_random_episode(const EnvConfig& config, std::uint64_t seed);

}  // namespace wavectl
