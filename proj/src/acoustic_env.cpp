#include "wavectl/acoustic_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <memory>
#include <sstream>

#include "wavectl/errors.hpp"

namespace wavectl {

// ---------------------------------------------------------------------------
// Design interpolation and speed field

DesignInterpolation DesignInterpolation::make(Design start, Design end, double t0, double t1, double actuation_rate) {
  if (!(t1 > t0)) throw ParameterError("design interpolation needs t1 > t0");
  if (start.radii.size() != end.radii.size() || start.centers.size() != start.radii.size()) {
    throw DimensionError("design interpolation endpoints have different scatterer counts");
  }
  const double limit = actuation_rate * (t1 - t0);
  for (std::size_t k = 0; k < start.radii.size(); ++k) {
    const double delta = std::abs(end.radii[k] - start.radii[k]);
    if (delta > limit * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "scatterer " << k << " radius change " << delta << " m over " << (t1 - t0) << " s needs "
          << delta / (t1 - t0) << " m/s, above the actuation rate " << actuation_rate << " m/s";
      throw ParameterError(msg.str());
    }
  }
  DesignInterpolation d;
  d.start_ = std::move(start);
  d.end_ = std::move(end);
  d.t0_ = t0;
  d.t1_ = t1;
  return d;
}

double DesignInterpolation::radius_at(std::size_t k, double t) const {
  const double span = t1_ - t0_;
  const double tol = 1e-9 * span;
  if (t < t0_ - tol || t > t1_ + tol) throw ParameterError("time outside design interpolation interval");
  const double a = std::clamp((t - t0_) / span, 0.0, 1.0);
  return (1.0 - a) * start_.radii[k] + a * end_.radii[k];
}

std::vector<double> DesignInterpolation::radii_at(double t) const {
  std::vector<double> r(start_.radii.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = radius_at(k, t);
  return r;
}

Field2D speed_field(const DesignInterpolation& interp, double t, const MediumParams& medium, const Grid2D& grid) {
  const auto radii = interp.radii_at(t);
  const auto& centers = interp.start().centers;
  Field2D c(grid, medium.c_ambient);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      for (std::size_t k = 0; k < centers.size(); ++k) {
        const double dx = grid.x(i) - centers[k].x;
        const double dy = grid.y(j) - centers[k].y;
        if (std::sqrt(dx * dx + dy * dy) < radii[k]) {
          c.at(i, j) = medium.c_scatterer;
          break;
        }
      }
    }
  }
  return c;
}

SourceSpec gaussian_source(const Grid2D& grid, Vec2 center, double width_cells, double amplitude, double omega,
                           int pml_cells) {
  if (!(width_cells > 0.0)) throw ParameterError("source width must be positive");
  const double w = width_cells * grid.dx();
  SourceSpec s{Field2D(grid), omega};
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const int depth = std::min({i, j, grid.nx - 1 - i, grid.ny - 1 - j});
      if (depth < pml_cells) continue;
      const double dx = grid.x(i) - center.x;
      const double dy = grid.y(j) - center.y;
      s.shape.at(i, j) = amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * w * w));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// State

Field2D RealState::field(int k) const {
  auto c = component(k);
  return Field2D(grid_, std::vector<double>(c.begin(), c.end()));
}

void RealState::set_field(int k, const Field2D& f) {
  if (!(f.grid == grid_)) throw DimensionError("field grid does not match state grid");
  std::copy(f.values.begin(), f.values.end(), component(k).begin());
}

void RealState::check_finite(const std::string& where) const {
  for (int k = 0; k < kComponents; ++k) {
    for (double v : component(k)) {
      if (!std::isfinite(v)) throw BlowUpError(kNames[k], where);
    }
  }
}

// ---------------------------------------------------------------------------
// Right-hand side

WaveSolver2D::WaveSolver2D(const Grid2D& grid, const SourceSpec& source, const PmlProfile1D& pml_x,
                           const PmlProfile1D& pml_y)
    : grid_(grid),
      sigma_x_(pml_x.sigma),
      sigma_y_(pml_y.sigma),
      dfdx_(grid.size()),
      dfdy_(grid.size()),
      omega_(source.omega) {
  if (!(source.shape.grid == grid)) throw DimensionError("source grid does not match simulation grid");
  if (sigma_x_.size() != static_cast<std::size_t>(grid.nx) || sigma_y_.size() != static_cast<std::size_t>(grid.ny)) {
    throw DimensionError("PML profile length does not match grid");
  }
  stencil::ddx_2d(source.shape.values, grid.nx, grid.ny, grid.dx(), dfdx_);
  stencil::ddy_2d(source.shape.values, grid.nx, grid.ny, grid.dy(), dfdy_);
}

void WaveSolver2D::eval(std::span<const double> y, std::span<const double> c2, double t, std::span<double> dydt) {
  const std::size_t n = grid_.size();
  double* d = dydt.data();
  const int nx = grid_.nx;
  kernel(y.data(), c2.data(), t, [&](std::size_t off, const double* const* k) {
    for (int c = 0; c < 6; ++c) std::copy(k[c], k[c] + nx, d + c * n + off);
  });
}

RealState rhs(const RealState& state, const Field2D& c, const SourceSpec& source, const PmlProfile1D& pml_x,
              const PmlProfile1D& pml_y, double t) {
  state.check_finite("rhs input");
  if (!(c.grid == state.grid())) throw DimensionError("speed field grid does not match state grid");
  for (double v : c.values) {
    if (!std::isfinite(v)) throw BlowUpError("c", "rhs input");
  }
  WaveSolver2D solver(state.grid(), source, pml_x, pml_y);
  std::vector<double> c2(c.values.size());
  for (std::size_t q = 0; q < c2.size(); ++q) c2[q] = c.values[q] * c.values[q];
  RealState out(state.grid(), t);
  solver.eval(state.data(), c2, t, out.data());
  return out;
}

RealState rk4_step(const RealState& state, const Field2D& c, const SourceSpec& source, const PmlProfile1D& pml_x,
                   const PmlProfile1D& pml_y, double dt) {
  if (!(c.grid == state.grid())) throw DimensionError("speed field grid does not match state grid");
  WaveSolver2D solver(state.grid(), source, pml_x, pml_y);
  std::vector<double> c2(c.values.size());
  for (std::size_t q = 0; q < c2.size(); ++q) c2[q] = c.values[q] * c.values[q];
  RealState next = state;
  solver.step(next, dt, [&](double) { return std::span<const double>(c2); });
  return next;
}

double wave_energy(const RealState& state, const Field2D& c) {
  const Grid2D& g = state.grid();
  const auto u = state.component(RealState::U);
  const auto vx = state.component(RealState::VX);
  const auto vy = state.component(RealState::VY);
  double e = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double wy = (j == 0 || j == g.ny - 1) ? 0.5 : 1.0;
    for (int i = 0; i < g.nx; ++i) {
      const double w = wy * ((i == 0 || i == g.nx - 1) ? 0.5 : 1.0);
      const std::size_t q = g.index(i, j);
      const double c2 = c.values[q] * c.values[q];
      e += w * (u[q] * u[q] + c2 * (vx[q] * vx[q] + vy[q] * vy[q]));
    }
  }
  return e * g.dx() * g.dy();
}

double scattered_energy(const Field2D& u_tot, const Field2D& u_inc, int pml_cells) {
  if (!(u_tot.grid == u_inc.grid)) throw DimensionError("scattered_energy: grid mismatch");
  const Grid2D& g = u_tot.grid;
  double s = 0.0;
  for (int j = pml_cells; j < g.ny - pml_cells; ++j) {
    for (int i = pml_cells; i < g.nx - pml_cells; ++i) {
      const double d = u_tot.at(i, j) - u_inc.at(i, j);
      s += d * d;
    }
  }
  return s * g.dx() * g.dy();
}

// ---------------------------------------------------------------------------
// Environment

void EnvConfig::validate() const {
  if (nx < 3 || ny < 3) throw ConfigError("env grid must be at least 3x3");
  if (!(length_x > 0.0) || !(length_y > 0.0)) throw ConfigError("env lengths must be positive");
  if (!(dt > 0.0)) throw ConfigError("env dt must be positive");
  if (steps_per_action < 1 || actions_per_episode < 1) throw ConfigError("steps_per_action and actions_per_episode must be >= 1");
  if (obs_nx < 1 || obs_ny < 1 || obs_nx > nx || obs_ny > ny) throw ConfigError("observation size must be within the grid size");
  if (!(medium.c_ambient > 0.0) || !(medium.c_scatterer > 0.0)) throw ConfigError("sound speeds must be positive");
  if (pml_cells < 0 || 2 * pml_cells >= std::min(nx, ny)) throw ConfigError("pml_cells out of range");
  if (pml_cells > 0 && !(pml_strength > 0.0)) throw ConfigError("pml_strength must be positive");
  if (!(design.r_min > 0.0) || design.r_max < design.r_min) throw ConfigError("radius bounds invalid");
  if (!(design.actuation_rate > 0.0)) throw ConfigError("actuation_rate must be positive");
  if (design.initial_radii && design.initial_radii->size() != design.centers.size()) {
    throw ConfigError("initial_radii length does not match the number of scatterer centers");
  }
  const double dx = length_x / (nx - 1);
  const double dy = length_y / (ny - 1);
  const double c_max = std::max(medium.c_ambient, medium.c_scatterer);
  const double cfl = c_max * dt / std::min(dx, dy);
  if (cfl > 0.5) {
    std::ostringstream msg;
    msg << "CFL number " << cfl << " exceeds 0.5 (c_max=" << c_max << ", dt=" << dt << ", h=" << std::min(dx, dy) << ")";
    throw ConfigError(msg.str());
  }
  const double x_lo = -0.5 * length_x + pml_cells * dx;
  const double y_lo = -0.5 * length_y + pml_cells * dy;
  for (const auto& c : design.centers) {
    if (c.x - design.r_max < x_lo || c.x + design.r_max > -x_lo || c.y - design.r_max < y_lo ||
        c.y + design.r_max > -y_lo) {
      throw ConfigError("scatterer at (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                        ") can reach the PML region");
    }
  }
}

std::vector<double> clamp_action(std::span<const double> action, std::span<const double> radii, double r_min,
                                 double r_max, double max_delta) {
  if (action.size() != radii.size()) throw DimensionError("action length does not match scatterer count");
  std::vector<double> applied(action.size());
  for (std::size_t k = 0; k < action.size(); ++k) {
    const double a = std::clamp(action[k], -max_delta, max_delta);
    const double r = std::clamp(radii[k] + a, r_min, r_max);
    applied[k] = r - radii[k];
  }
  return applied;
}

namespace {

PmlProfile1D axis_profile(int n, double length, int cells, double strength, double c) {
  const Grid1D g = Grid1D::make(n, length);
  if (cells == 0) return zero_profile(g);
  return build_ramp(g, cells, pml_scale_from_strength(strength, c, cells, g.dx()));
}

}  // namespace

AcousticEnv::AcousticEnv(const EnvConfig& config)
    : config_((config.validate(), config)),
      grid_(config.grid()),
      source_(gaussian_source(grid_, config.source.center, config.source.width_cells, config.source.amplitude,
                              config.source.omega, config.pml_cells)),
      pml_x_(axis_profile(config.nx, config.length_x, config.pml_cells, config.pml_strength, config.medium.c_ambient)),
      pml_y_(axis_profile(config.ny, config.length_y, config.pml_cells, config.pml_strength, config.medium.c_ambient)),
      solver_total_(grid_, source_, pml_x_, pml_y_),
      solver_incident_(grid_, source_, pml_x_, pml_y_),
      total_(grid_),
      incident_(grid_),
      c2_(grid_.size(), config.medium.c_ambient * config.medium.c_ambient),
      c2_ambient_(grid_.size(), config.medium.c_ambient * config.medium.c_ambient) {
  design_.centers = config.design.centers;
  design_.r_min = config.design.r_min;
  design_.r_max = config.design.r_max;
  near_cells_.resize(design_.centers.size());
  for (std::size_t k = 0; k < design_.centers.size(); ++k) {
    for (int j = 0; j < grid_.ny; ++j) {
      for (int i = 0; i < grid_.nx; ++i) {
        const double dx = grid_.x(i) - design_.centers[k].x;
        const double dy = grid_.y(j) - design_.centers[k].y;
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d < design_.r_max) near_cells_[k].push_back({grid_.index(i, j), d});
      }
    }
  }
  reset(std::vector<double>(design_.centers.size(), config.design.r_min));
}

void AcousticEnv::reset(const std::vector<double>& initial_radii) {
  if (initial_radii.size() != design_.centers.size()) throw DimensionError("initial radii length mismatch");
  for (double r : initial_radii) {
    if (r < design_.r_min || r > design_.r_max) throw ParameterError("initial radius outside bounds");
  }
  design_.radii = initial_radii;
  total_ = RealState(grid_);
  incident_ = RealState(grid_);
  action_index_ = 0;
  const auto zero = current_frame();
  frame_history_ = {zero, zero, zero};
}

void AcousticEnv::fill_c2(const DesignInterpolation& interp, double t) {
  const double amb = config_.medium.c_ambient * config_.medium.c_ambient;
  const double sc = config_.medium.c_scatterer * config_.medium.c_scatterer;
  for (const auto& cells : near_cells_) {
    for (const auto& cd : cells) c2_[cd.cell] = amb;
  }
  for (std::size_t k = 0; k < near_cells_.size(); ++k) {
    const double r = interp.radius_at(k, t);
    for (const auto& cd : near_cells_[k]) {
      if (cd.distance < r) c2_[cd.cell] = sc;
    }
  }
}

double AcousticEnv::interior_integral_sq(std::span<const double> a, std::span<const double> b) const {
  const int p = config_.pml_cells;
  double s = 0.0;
  for (int j = p; j < grid_.ny - p; ++j) {
    const std::size_t off = grid_.index(0, j);
    if (b.empty()) {
      for (int i = p; i < grid_.nx - p; ++i) s += a[off + i] * a[off + i];
    } else {
      for (int i = p; i < grid_.nx - p; ++i) {
        const double d = a[off + i] - b[off + i];
        s += d * d;
      }
    }
  }
  return s * grid_.dx() * grid_.dy();
}

ActionResult AcousticEnv::step_action(std::span<const double> action) {
  ActionResult result;
  result.applied_action =
      clamp_action(action, design_.radii, design_.r_min, design_.r_max, config_.max_radius_delta());
  Design next = design_;
  for (std::size_t k = 0; k < next.radii.size(); ++k) next.radii[k] = design_.radii[k] + result.applied_action[k];

  const double t0 = total_.t();
  const double t1 = t0 + config_.action_dt();
  const auto interp = DesignInterpolation::make(design_, next, t0, t1, config_.design.actuation_rate);

  const int steps = config_.steps_per_action;
  result.sigma_sc.reserve(steps);
  result.sigma_tot.reserve(steps);
  result.sigma_inc.reserve(steps);
  const std::span<const double> ambient(c2_ambient_);
  for (int s = 0; s < steps; ++s) {
    solver_total_.step(total_, config_.dt, [&](double t) {
      fill_c2(interp, t);
      return std::span<const double>(c2_);
    });
    solver_incident_.step(incident_, config_.dt, [&](double) { return ambient; });
    const auto ut = total_.component(RealState::U);
    const auto ui = incident_.component(RealState::U);
    const double sc = interior_integral_sq(ut, ui);
    const double st = interior_integral_sq(ut, {});
    const double si = interior_integral_sq(ui, {});
    if (!std::isfinite(sc) || !std::isfinite(st) || !std::isfinite(si)) {
      total_.check_finite("total simulation, action " + std::to_string(action_index_));
      incident_.check_finite("incident simulation, action " + std::to_string(action_index_));
      throw BlowUpError("u", "sigma integrals, action " + std::to_string(action_index_));
    }
    result.sigma_sc.push_back(sc);
    result.sigma_tot.push_back(st);
    result.sigma_inc.push_back(si);
  }
  // Pin the end time to the interval boundary so actions tile exactly.
  total_.set_t(t1);
  incident_.set_t(t1);
  total_.check_finite("total simulation, action " + std::to_string(action_index_));
  incident_.check_finite("incident simulation, action " + std::to_string(action_index_));

  design_ = std::move(next);
  ++action_index_;
  frame_history_[0] = std::move(frame_history_[1]);
  frame_history_[1] = std::move(frame_history_[2]);
  frame_history_[2] = current_frame();
  return result;
}

std::vector<float> AcousticEnv::current_frame() const {
  const auto u = total_.component(RealState::U);
  std::vector<float> out;
  if (config_.obs_nx == grid_.nx && config_.obs_ny == grid_.ny) {
    out.assign(u.begin(), u.end());
    return out;
  }
  const Field2D small = downsample(total_.field(RealState::U), config_.obs_nx, config_.obs_ny);
  out.assign(small.values.begin(), small.values.end());
  return out;
}

Observation AcousticEnv::observe() const {
  Observation obs;
  obs.nx = config_.obs_nx;
  obs.ny = config_.obs_ny;
  obs.frames.reserve(3 * frame_history_[0].size());
  for (const auto& f : frame_history_) obs.frames.insert(obs.frames.end(), f.begin(), f.end());
  obs.design_radii = design_.radii;
  return obs;
}

Field2D AcousticEnv::current_speed() const {
  Design same = design_;
  const auto interp = DesignInterpolation::make(design_, same, 0.0, 1.0, config_.design.actuation_rate);
  return speed_field(interp, 0.0, config_.medium, grid_);
}

// ---------------------------------------------------------------------------
// Episodes

std::span<const float> EpisodeRecord::frame(int k) const {
  const std::size_t n = static_cast<std::size_t>(obs_nx) * obs_ny;
  return std::span<const float>(frames).subspan(static_cast<std::size_t>(k) * n, n);
}

Observation observation_at(const EpisodeRecord& record, int tau) {
  if (tau < 0 || tau > record.n_actions()) throw ParameterError("observation index outside episode");
  Observation obs;
  obs.nx = record.obs_nx;
  obs.ny = record.obs_ny;
  const std::size_t n = static_cast<std::size_t>(obs.nx) * obs.ny;
  obs.frames.assign(3 * n, 0.0f);
  for (int k = 0; k < 3; ++k) {
    const int idx = tau - 2 + k;
    if (idx < 0) continue;
    const auto f = record.frame(idx);
    std::copy(f.begin(), f.end(), obs.frames.begin() + k * n);
  }
  obs.design_radii = record.radii[tau];
  return obs;
}

Policy random_policy(std::uint64_t seed, double max_delta) {
  auto rng = std::make_shared<Rng>(derive_seed(seed, 17));
  return [rng, max_delta](const PolicyContext& ctx) {
    std::vector<double> a(ctx.env.design().size());
    for (auto& v : a) v = uniform(*rng, -max_delta, max_delta);
    return a;
  };
}

std::vector<double> initial_radii_for(const EnvConfig& config, std::uint64_t seed) {
  if (config.design.initial_radii) return *config.design.initial_radii;
  Rng rng(derive_seed(seed, 3));
  std::vector<double> r(config.design.centers.size());
  for (auto& v : r) v = uniform(rng, config.design.r_min, config.design.r_max);
  return r;
}

EpisodeRecord run_episode(const EnvConfig& config, const Policy& policy, std::uint64_t seed) {
  AcousticEnv env(config);
  env.reset(initial_radii_for(config, seed));

  EpisodeRecord rec;
  rec.config = config;
  rec.seed = seed;
  rec.obs_nx = config.obs_nx;
  rec.obs_ny = config.obs_ny;
  rec.steps_per_action = config.steps_per_action;
  const std::size_t n_steps = static_cast<std::size_t>(config.actions_per_episode) * config.steps_per_action;
  rec.sigma_sc.reserve(n_steps);
  rec.sigma_tot.reserve(n_steps);
  rec.sigma_inc.reserve(n_steps);
  {
    const auto f0 = env.current_frame();
    rec.frames.insert(rec.frames.end(), f0.begin(), f0.end());
  }
  rec.radii.push_back(env.design().radii);

  for (int a = 0; a < config.actions_per_episode; ++a) {
    const Observation obs = env.observe();
    const auto action = policy(PolicyContext{env, obs, rec.radii});
    auto res = env.step_action(action);
    rec.actions.push_back(res.applied_action);
    rec.radii.push_back(env.design().radii);
    rec.sigma_sc.insert(rec.sigma_sc.end(), res.sigma_sc.begin(), res.sigma_sc.end());
    rec.sigma_tot.insert(rec.sigma_tot.end(), res.sigma_tot.begin(), res.sigma_tot.end());
    rec.sigma_inc.insert(rec.sigma_inc.end(), res.sigma_inc.begin(), res.sigma_inc.end());
    const auto f = env.current_frame();
    rec.frames.insert(rec.frames.end(), f.begin(), f.end());
  }
  return rec;
}

EpisodeRecord run_random_episode(const EnvConfig& config, std::uint64_t seed) {
  return run_episode(config, random_policy(seed, config.max_radius_delta()), seed);
}

}  // namespace wavectl
