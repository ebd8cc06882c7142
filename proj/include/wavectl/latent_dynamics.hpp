#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "wavectl/field_grid.hpp"

namespace wavectl {

/// Fixed-endpoint sine basis sum_n b_n sin(n*pi*xi/L) on a latent grid, with
/// xi = x + L/2. Endpoint values are exactly zero.
class SineBasis {
 public:
  SineBasis() = default;
  SineBasis(int n_freq, const Grid1D& grid);

  int n_freq() const { return n_freq_; }
  const Grid1D& grid() const { return grid_; }

  void embed(std::span<const double> coeffs, std::span<double> out) const;
  /// g_coeffs[n] = sum_i basis(n, i) * g_field[i]
  void embed_transpose(std::span<const double> g_field, std::span<double> g_coeffs) const;

 private:
  int n_freq_ = 0;
  Grid1D grid_;
  std::vector<double> table_;  // n_freq x n_cells
};

Field1D sinusoidal_embed(std::span<const double> coeffs, const Grid1D& grid);

/// Total pair (driven by c_z) and incident pair (ambient speed).
struct LatentState {
  Grid1D grid;
  std::vector<double> u_tot, v_tot, u_inc, v_inc;
  double t = 0.0;

  LatentState() = default;
  explicit LatentState(const Grid1D& g, double t0 = 0.0)
      : grid(g), u_tot(g.n_cells, 0.0), v_tot(g.n_cells, 0.0), u_inc(g.n_cells, 0.0), v_inc(g.n_cells, 0.0), t(t0) {}
};

struct LatentConditions {
  LatentState initial;
  std::vector<double> f_z;      // source shape
  std::vector<double> sigma_z;  // damping profile, >= 0
  double omega = 0.0;           // source frequency, Hz
  double c_ambient = 0.0;       // incident pair speed
};

/// Speed frames at knot times; c_z(x, t) is linear in t between knots.
struct LatentSpeedInterp {
  std::vector<std::vector<double>> c_frames;
  std::vector<double> t_knots;

  /// Segment index k and weight a such that c = (1-a) frame[k] + a frame[k+1].
  std::pair<int, double> locate(double t) const;
  void c_at(double t, std::span<double> out) const;
};

/// Time derivative of the latent system at time t for a given c_z(x).
/// Throws BlowUpError on non-finite input.
LatentState latent_rhs(const LatentState& state, std::span<const double> c_z, std::span<const double> f_z,
                       std::span<const double> sigma_z, double omega, double c_ambient, double t);

struct RolloutOptions {
  /// When > 0, store u_sc^2 every `field_stride` steps (rows of n_cells values).
  int field_stride = 0;
};

struct RolloutResult {
  std::vector<double> sigma_sc, sigma_tot, sigma_inc;  // one value per step, after the step
  std::vector<double> usc2_field;                      // optional space-time array
  int field_rows = 0;
  LatentState final_state;
};

/// RK4 rollout of both latent pairs over horizon_actions * steps_per_action steps.
RolloutResult rollout(const LatentConditions& conds, const LatentSpeedInterp& speed, int horizon_actions,
                      int steps_per_action, double dt, const RolloutOptions& options = {});

/// dL/d(sigma-hat) per step, each of length n_steps.
struct SigmaCotangents {
  std::span<const double> d_sc;
  std::span<const double> d_tot;
  std::span<const double> d_inc;
};

struct LatentGradients {
  std::vector<double> u_tot, v_tot, u_inc, v_inc;  // w.r.t. initial state
  std::vector<double> f_z;
  std::vector<double> sigma_z;
  std::vector<std::vector<double>> c_frames;
};

/// Discrete adjoint of `rollout`: exact reverse sweep through the RK4
/// recurrence with checkpoint-and-recompute (about sqrt(n_steps) stored states).
LatentGradients rollout_vjp(const LatentConditions& conds, const LatentSpeedInterp& speed, int horizon_actions,
                            int steps_per_action, double dt, const SigmaCotangents& cot);

/// `rollout` followed by `rollout_vjp`, sharing one forward sweep. The
/// callback sees the forward result and returns dL/d(sigma-hat); the spans
/// must stay valid until this function returns.
using CotangentFn = std::function<SigmaCotangents(const RolloutResult&)>;
LatentGradients rollout_with_vjp(const LatentConditions& conds, const LatentSpeedInterp& speed, int horizon_actions,
                                 int steps_per_action, double dt, const CotangentFn& cotangents,
                                 RolloutResult& forward);

/// Single-pair stepper used where the incident pair is shared across many
/// rollouts (planning). y = [u, v].
class LatentPairStepper {
 public:
  LatentPairStepper(const Grid1D& grid, std::span<const double> f_z, std::span<const double> sigma_z, double omega);

  /// Advance one RK4 step from time t; c2_at(t, out) fills squared speeds.
  template <class C2At>
  void step(std::vector<double>& y, double t, double h, C2At&& c2_at);

  const Grid1D& grid() const { return grid_; }

 private:
  void eval(const double* u, const double* v, const double* c2, double t, double* ku, double* kv) const;

  Grid1D grid_;
  std::vector<double> sigma_;
  std::vector<double> dfdx_;
  double omega_;
  std::vector<double> c2_, k_, st_, acc_;
};

template <class C2At>
void LatentPairStepper::step(std::vector<double>& y, double t, double h, C2At&& c2_at) {
  const int n = grid_.n_cells;
  k_.resize(2 * n);
  st_.resize(2 * n);
  acc_.resize(2 * n);
  c2_.resize(n);
  double* yp = y.data();
  const double ts[4] = {t, t + 0.5 * h, t + 0.5 * h, t + h};
  const double wa[4] = {h / 6.0, h / 3.0, h / 3.0, h / 6.0};
  const double wn[3] = {0.5 * h, 0.5 * h, h};
  for (int s = 0; s < 4; ++s) {
    const double* in = s == 0 ? yp : st_.data();
    c2_at(ts[s], std::span<double>(c2_));
    eval(in, in + n, c2_.data(), ts[s], k_.data(), k_.data() + n);
    for (int i = 0; i < 2 * n; ++i) acc_[i] = (s == 0 ? yp[i] : acc_[i]) + wa[s] * k_[i];
    if (s < 3) {
      for (int i = 0; i < 2 * n; ++i) st_[i] = yp[i] + wn[s] * k_[i];
    }
  }
  std::copy(acc_.begin(), acc_.end(), y.begin());
}

}  // namespace wavectl
