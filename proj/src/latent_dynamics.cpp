#include "wavectl/latent_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wavectl/errors.hpp"

namespace wavectl {

// ---------------------------------------------------------------------------
// Sine embedding

SineBasis::SineBasis(int n_freq, const Grid1D& grid) : n_freq_(n_freq), grid_(grid) {
  if (n_freq < 1) throw ParameterError("sine basis needs at least one frequency");
  const int n = grid.n_cells;
  table_.assign(static_cast<std::size_t>(n_freq) * n, 0.0);
  for (int f = 0; f < n_freq; ++f) {
    double* row = table_.data() + static_cast<std::size_t>(f) * n;
    // Interior only: the endpoints stay exactly zero.
    for (int i = 1; i < n - 1; ++i) {
      row[i] = std::sin((f + 1) * std::numbers::pi * static_cast<double>(i) / (n - 1));
    }
  }
}

void SineBasis::embed(std::span<const double> coeffs, std::span<double> out) const {
  if (static_cast<int>(coeffs.size()) != n_freq_) throw DimensionError("sine embedding: coefficient count mismatch");
  const int n = grid_.n_cells;
  std::fill(out.begin(), out.end(), 0.0);
  for (int f = 0; f < n_freq_; ++f) {
    const double b = coeffs[f];
    if (b == 0.0) continue;
    const double* row = table_.data() + static_cast<std::size_t>(f) * n;
    for (int i = 0; i < n; ++i) out[i] += b * row[i];
  }
}

void SineBasis::embed_transpose(std::span<const double> g_field, std::span<double> g_coeffs) const {
  const int n = grid_.n_cells;
  for (int f = 0; f < n_freq_; ++f) {
    const double* row = table_.data() + static_cast<std::size_t>(f) * n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += row[i] * g_field[i];
    g_coeffs[f] = acc;
  }
}

Field1D sinusoidal_embed(std::span<const double> coeffs, const Grid1D& grid) {
  SineBasis basis(static_cast<int>(coeffs.size()), grid);
  Field1D out(grid);
  basis.embed(coeffs, out.values);
  return out;
}

// ---------------------------------------------------------------------------
// Speed interpolation

std::pair<int, double> LatentSpeedInterp::locate(double t) const {
  const int n_knots = static_cast<int>(t_knots.size());
  if (n_knots < 2 || c_frames.size() != t_knots.size()) {
    throw DimensionError("latent speed interpolation needs >= 2 frames with matching knots");
  }
  const double span = t_knots.back() - t_knots.front();
  const double tol = 1e-9 * span;
  if (t < t_knots.front() - tol || t > t_knots.back() + tol) {
    throw ParameterError("time outside latent speed interpolation range");
  }
  int k = static_cast<int>(std::upper_bound(t_knots.begin(), t_knots.end(), t) - t_knots.begin()) - 1;
  k = std::clamp(k, 0, n_knots - 2);
  const double a = std::clamp((t - t_knots[k]) / (t_knots[k + 1] - t_knots[k]), 0.0, 1.0);
  return {k, a};
}

void LatentSpeedInterp::c_at(double t, std::span<double> out) const {
  const auto [k, a] = locate(t);
  const auto& lo = c_frames[k];
  const auto& hi = c_frames[k + 1];
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - a) * lo[i] + a * hi[i];
}

// ---------------------------------------------------------------------------
// Right-hand side

namespace {

double source_phase(double omega, double t) { return std::sin(2.0 * std::numbers::pi * omega * t); }

// k = F(u, v): u' = c2 D v - sigma u (u fixed at the endpoints), v' = D u + s D f - sigma v.
void pair_kernel(const double* __restrict u, const double* __restrict v, const double* __restrict c2,
                 const double* __restrict sig, const double* __restrict df, double s, double inv2h, int n,
                 double* __restrict ku, double* __restrict kv) {
  ku[0] = 0.0;
  ku[n - 1] = 0.0;
  kv[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) * inv2h + s * df[0] - sig[0] * v[0];
  for (int i = 1; i < n - 1; ++i) {
    ku[i] = c2[i] * ((v[i + 1] - v[i - 1]) * inv2h) - sig[i] * u[i];
    kv[i] = (u[i + 1] - u[i - 1]) * inv2h + s * df[i] - sig[i] * v[i];
  }
  kv[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) * inv2h + s * df[n - 1] - sig[n - 1] * v[n - 1];
}


// One RK4 stage for one pair: k = F(u, v) is folded into the accumulator
// (a = y + wa k on the first stage, a += wa k after) and, when Next, into the
// next stage input y + wn k. Outputs must not alias u or v.
template <bool First, bool Next>
void pair_stage(const double* __restrict u, const double* __restrict v, const double* __restrict c2,
                const double* __restrict sig, const double* __restrict df, double s, double inv2h, int n,
                const double* __restrict yu, const double* __restrict yv, double wa, double* __restrict au,
                double* __restrict av, double wn, double* __restrict nu, double* __restrict nv) {
  auto emit = [&](int i, double ku, double kv) {
    if constexpr (First) {
      au[i] = yu[i] + wa * ku;
      av[i] = yv[i] + wa * kv;
    } else {
      au[i] += wa * ku;
      av[i] += wa * kv;
    }
    if constexpr (Next) {
      nu[i] = yu[i] + wn * ku;
      nv[i] = yv[i] + wn * kv;
    }
  };
  emit(0, 0.0, (-3.0 * u[0] + 4.0 * u[1] - u[2]) * inv2h + s * df[0] - sig[0] * v[0]);
  for (int i = 1; i < n - 1; ++i) {
    emit(i, c2[i] * ((v[i + 1] - v[i - 1]) * inv2h) - sig[i] * u[i],
         (u[i + 1] - u[i - 1]) * inv2h + s * df[i] - sig[i] * v[i]);
  }
  emit(n - 1, 0.0, (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) * inv2h + s * df[n - 1] - sig[n - 1] * v[n - 1]);
}

}  // namespace

LatentPairStepper::LatentPairStepper(const Grid1D& grid, std::span<const double> f_z, std::span<const double> sigma_z,
                                     double omega)
    : grid_(grid), sigma_(sigma_z.begin(), sigma_z.end()), dfdx_(grid.n_cells), omega_(omega) {
  if (static_cast<int>(f_z.size()) != grid.n_cells || static_cast<int>(sigma_z.size()) != grid.n_cells) {
    throw DimensionError("latent pair: field length mismatch");
  }
  stencil::ddx_1d(f_z, grid.dx(), dfdx_);
}

void LatentPairStepper::eval(const double* u, const double* v, const double* c2, double t, double* ku,
                             double* kv) const {
  pair_kernel(u, v, c2, sigma_.data(), dfdx_.data(), source_phase(omega_, t), 0.5 / grid_.dx(), grid_.n_cells, ku,
              kv);
}

LatentState latent_rhs(const LatentState& state, std::span<const double> c_z, std::span<const double> f_z,
                       std::span<const double> sigma_z, double omega, double c_ambient, double t) {
  const int n = state.grid.n_cells;
  auto check = [&](std::span<const double> v, const char* name) {
    if (static_cast<int>(v.size()) != n) throw DimensionError(std::string("latent_rhs: length mismatch for ") + name);
    for (double x : v) {
      if (!std::isfinite(x)) throw BlowUpError(name, "latent_rhs input");
    }
  };
  check(state.u_tot, "u_tot");
  check(state.v_tot, "v_tot");
  check(state.u_inc, "u_inc");
  check(state.v_inc, "v_inc");
  check(c_z, "c_z");
  check(f_z, "f_z");
  check(sigma_z, "sigma_z");
  std::vector<double> dfdx(n), c2(n), c2_amb(n, c_ambient * c_ambient);
  stencil::ddx_1d(f_z, state.grid.dx(), dfdx);
  for (int i = 0; i < n; ++i) c2[i] = c_z[i] * c_z[i];
  LatentState d(state.grid, t);
  const double s = source_phase(omega, t);
  const double inv2h = 0.5 / state.grid.dx();
  pair_kernel(state.u_tot.data(), state.v_tot.data(), c2.data(), sigma_z.data(), dfdx.data(), s, inv2h, n,
              d.u_tot.data(), d.v_tot.data());
  pair_kernel(state.u_inc.data(), state.v_inc.data(), c2_amb.data(), sigma_z.data(), dfdx.data(), s, inv2h, n,
              d.u_inc.data(), d.v_inc.data());
  return d;
}

// ---------------------------------------------------------------------------
// Joint integrator with reverse sweep

namespace {

class JointIntegrator {
 public:
  JointIntegrator(const LatentConditions& conds, const LatentSpeedInterp& speed, double dt)
      : conds_(conds),
        speed_(speed),
        n_(conds.initial.grid.n_cells),
        h_(dt),
        dx_(conds.initial.grid.dx()),
        t0_(conds.initial.t),
        dfdx_(n_),
        c_(n_),
        c2_(n_),
        c2_amb_(n_, conds.c_ambient * conds.c_ambient) {
    auto need = [&](const std::vector<double>& v, const char* name) {
      if (static_cast<int>(v.size()) != n_) throw DimensionError(std::string("latent rollout: bad length for ") + name);
    };
    need(conds.initial.u_tot, "u_tot");
    need(conds.initial.v_tot, "v_tot");
    need(conds.initial.u_inc, "u_inc");
    need(conds.initial.v_inc, "v_inc");
    need(conds.f_z, "f_z");
    need(conds.sigma_z, "sigma_z");
    for (const auto& f : speed.c_frames) need(f, "c_frame");
    stencil::ddx_1d(conds.f_z, dx_, dfdx_);
    for (auto* v : {&stage_, &stage2_, &acc_}) v->resize(4 * n_);
  }

  int n() const { return n_; }
  double time(int step) const { return t0_ + step * h_; }

  std::vector<double> initial_vector() const {
    std::vector<double> y(4 * n_);
    const auto& s = conds_.initial;
    std::copy(s.u_tot.begin(), s.u_tot.end(), y.begin());
    std::copy(s.v_tot.begin(), s.v_tot.end(), y.begin() + n_);
    std::copy(s.u_inc.begin(), s.u_inc.end(), y.begin() + 2 * n_);
    std::copy(s.v_inc.begin(), s.v_inc.end(), y.begin() + 3 * n_);
    return y;
  }

  /// y_{step} -> y_{step+1}. When `stages` is given, the four stage inputs are
  /// written there (4 blocks of 4n values) for the reverse sweep.
  void step(std::vector<double>& y, int step_index, double* stages = nullptr) {
    const double t = time(step_index);
    const std::size_t m = 4 * static_cast<std::size_t>(n_);
    const double* yp = y.data();
    const double ts[4] = {t, t + 0.5 * h_, t + 0.5 * h_, t + h_};
    const double wa[4] = {h_ / 6.0, h_ / 3.0, h_ / 3.0, h_ / 6.0};
    const double wn[3] = {0.5 * h_, 0.5 * h_, h_};
    // Stage inputs alternate between two scratch blocks unless they are being recorded.
    double* in_buf[4] = {nullptr, stage_.data(), stage2_.data(), stage_.data()};
    if (stages) {
      std::copy(yp, yp + m, stages);
      for (int k = 1; k < 4; ++k) in_buf[k] = stages + k * m;
    }
    double* ac = acc_.data();
    for (int st = 0; st < 4; ++st) {
      const double* Y = st == 0 ? yp : in_buf[st];
      double* nxt = st < 3 ? in_buf[st + 1] : nullptr;
      stage(Y, ts[st], yp, wa[st], ac, st < 3 ? wn[st] : 0.0, nxt, st == 0);
    }
    y.swap(acc_);
  }

  /// Given lam = dL/dy_{step+1}, replaces it by the dynamics part of dL/dy_{step}
  /// and accumulates parameter gradients. `stages` as written by step().
  void step_backward(const double* stages, int step_index, std::vector<double>& lam, LatentGradients& g) {
    const double t = time(step_index);
    const int m = 4 * n_;
    const double ts[4] = {t, t + 0.5 * h_, t + 0.5 * h_, t + h_};
    const double wn[3] = {0.5 * h_, 0.5 * h_, h_};
    const double wk[4] = {h_ / 6.0, h_ / 3.0, h_ / 3.0, h_ / 6.0};

    gy_.assign(lam.begin(), lam.end());
    gk_.resize(m);
    gY_.resize(m);
    // Stage s cotangent: wk[s] * lam plus the contribution routed back from stage s+1.
    for (int i = 0; i < m; ++i) gk_[i] = wk[3] * lam[i];
    for (int s = 3; s >= 0; --s) {
      vjp(stages + static_cast<std::size_t>(s) * m, ts[s], gk_.data(), gY_.data(), g);
      double* __restrict gy = gy_.data();
      const double* __restrict gY = gY_.data();
      if (s > 0) {
        // Y_s = y + wn[s-1] * k_{s-1}
        double* __restrict gk = gk_.data();
        const double* __restrict l = lam.data();
        for (int i = 0; i < m; ++i) {
          gy[i] += gY[i];
          gk[i] = wk[s - 1] * l[i] + wn[s - 1] * gY[i];
        }
      } else {
        for (int i = 0; i < m; ++i) gy[i] += gY[i];
      }
    }
    lam.swap(gy_);
  }

 private:
  void stage(const double* Y, double t, const double* y, double wa, double* acc, double wn, double* next, bool first) {
    const double s = source_phase(conds_.omega, t);
    speed_at(t);
    const double* sig = conds_.sigma_z.data();
    const double* df = dfdx_.data();
    const double inv2h = 0.5 / dx_;
    const int n = n_;
    for (int p = 0; p < 2; ++p) {
      const double* c2 = p == 0 ? c2_.data() : c2_amb_.data();
      const std::size_t o = static_cast<std::size_t>(2 * p) * n;
      double* nu = next ? next + o : nullptr;
      double* nv = next ? next + o + n : nullptr;
      if (first) {
        pair_stage<true, true>(Y + o, Y + o + n, c2, sig, df, s, inv2h, n, y + o, y + o + n, wa, acc + o, acc + o + n,
                               wn, nu, nv);
      } else if (next) {
        pair_stage<false, true>(Y + o, Y + o + n, c2, sig, df, s, inv2h, n, y + o, y + o + n, wa, acc + o,
                                acc + o + n, wn, nu, nv);
      } else {
        pair_stage<false, false>(Y + o, Y + o + n, c2, sig, df, s, inv2h, n, y + o, y + o + n, wa, acc + o,
                                 acc + o + n, wn, nu, nv);
      }
    }
  }

  void speed_at(double t) {
    const auto [k, a] = speed_.locate(t);
    const double* __restrict lo = speed_.c_frames[k].data();
    const double* __restrict hi = speed_.c_frames[k + 1].data();
    double* __restrict c = c_.data();
    double* __restrict c2 = c2_.data();
    for (int i = 0; i < n_; ++i) {
      c[i] = (1.0 - a) * lo[i] + a * hi[i];
      c2[i] = c[i] * c[i];
    }
  }

  // Cotangent gk of k = F(Y, t) -> gY, plus parameter gradients.
  void vjp(const double* Y, double t, const double* gk, double* gY, LatentGradients& g) {
    const double s = source_phase(conds_.omega, t);
    const auto [seg, a] = speed_.locate(t);
    speed_at(t);
    double* lo = g.c_frames[seg].data();
    double* hi = g.c_frames[seg + 1].data();
    pair_vjp(Y, Y + n_, c2_.data(), s, gk, gk + n_, gY, gY + n_, g, c_.data(), a, lo, hi);
    pair_vjp(Y + 2 * n_, Y + 3 * n_, c2_amb_.data(), s, gk + 2 * n_, gk + 3 * n_, gY + 2 * n_, gY + 3 * n_, g,
             nullptr, 0.0, nullptr, nullptr);
  }

  void pair_vjp(const double* __restrict u, const double* __restrict v, const double* __restrict c2, double s,
                const double* __restrict gu, const double* __restrict gv, double* __restrict gU,
                double* __restrict gV, LatentGradients& g, const double* __restrict c, double a,
                double* __restrict c_lo, double* __restrict c_hi) {
    const int n = n_;
    const double* __restrict sig = conds_.sigma_z.data();
    const double inv2h = 0.5 / dx_;
    double* __restrict fbar = g.f_z.data();
    double* __restrict sbar = g.sigma_z.data();
    // u is pinned at both ends, so its cotangent there never reaches the state.
    auto w = [&](int i) { return (i == 0 || i == n - 1) ? 0.0 : gu[i]; };
    auto cw = [&](int i) { return c2[i] * w(i); };
    auto gvv = [&](int i) { return gv[i]; };
    // Column j of D^T x, with D the ddx_1d stencil (one-sided rows 0 and n-1).
    auto column = [&](auto&& x, int j) {
      double acc = 0.0;
      if (j <= n - 3) acc -= x(j + 1);
      if (j >= 2) acc += x(j - 1);
      if (j <= 2) acc += (j == 0 ? -3.0 : j == 1 ? 4.0 : -1.0) * x(0);
      if (j >= n - 3) acc += (j == n - 1 ? 3.0 : j == n - 2 ? -4.0 : 1.0) * x(n - 1);
      return acc * inv2h;
    };
    auto finish = [&](int j, double wj, double dtg, double dtc) {
      gU[j] = -sig[j] * wj + dtg;
      gV[j] = dtc - sig[j] * gv[j];
      fbar[j] += s * dtg;
      sbar[j] += -wj * u[j] - gv[j] * v[j];
    };
    const int lo = std::min(3, n), hi = std::max(lo, n - 3);
    for (int j = 0; j < lo; ++j) finish(j, w(j), column(gvv, j), column(cw, j));
    for (int j = lo; j < hi; ++j) {
      const double dtg = (gv[j - 1] - gv[j + 1]) * inv2h;
      const double dtc = (c2[j - 1] * gu[j - 1] - c2[j + 1] * gu[j + 1]) * inv2h;
      gU[j] = -sig[j] * gu[j] + dtg;
      gV[j] = dtc - sig[j] * gv[j];
      fbar[j] += s * dtg;
      sbar[j] += -gu[j] * u[j] - gv[j] * v[j];
    }
    for (int j = hi; j < n; ++j) finish(j, w(j), column(gvv, j), column(cw, j));
    if (c) {
      // d/dc2 = w * Dv on interior cells; chained to the two bracketing frames.
      for (int i = 1; i < n - 1; ++i) {
        const double dc = 2.0 * c[i] * gu[i] * ((v[i + 1] - v[i - 1]) * inv2h);
        c_lo[i] += (1.0 - a) * dc;
        c_hi[i] += a * dc;
      }
    }
  }

  const LatentConditions& conds_;
  const LatentSpeedInterp& speed_;
  int n_;
  double h_;
  double dx_;
  double t0_;
  std::vector<double> dfdx_, c_, c2_, c2_amb_;
  std::vector<double> stage_, stage2_, acc_;
  std::vector<double> gk_, gy_, gY_;
};

struct Sigmas {
  double sc, tot, inc;
};

Sigmas sigmas_of(const std::vector<double>& y, int n, double dx) {
  double sc = 0.0, tot = 0.0, inc = 0.0;
  const double* ut = y.data();
  const double* ui = y.data() + 2 * n;
  for (int i = 0; i < n; ++i) {
    const double d = ut[i] - ui[i];
    sc += d * d;
    tot += ut[i] * ut[i];
    inc += ui[i] * ui[i];
  }
  return {sc * dx, tot * dx, inc * dx};
}

void check_speed_covers(const LatentSpeedInterp& speed, double t0, double t1) {
  if (speed.t_knots.size() < 2) throw DimensionError("latent speed interpolation needs >= 2 frames");
  const double tol = 1e-9 * (t1 - t0 + 1e-300);
  if (speed.t_knots.front() > t0 + tol || speed.t_knots.back() < t1 - tol) {
    throw ParameterError("latent speed interpolation does not cover the rollout horizon");
  }
}

}  // namespace

namespace {

int checkpoint_stride(int n_steps) {
  return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_steps)))));
}

// Forward sweep; when `checkpoints` is given, the state before every K-th step is kept.
RolloutResult forward_sweep(JointIntegrator& integ, const LatentConditions& conds, int n_steps,
                            const RolloutOptions& options, int K, std::vector<std::vector<double>>* checkpoints) {
  const int n = integ.n();
  const double dx = conds.initial.grid.dx();
  std::vector<double> y = integ.initial_vector();

  RolloutResult r;
  r.sigma_sc.reserve(n_steps);
  r.sigma_tot.reserve(n_steps);
  r.sigma_inc.reserve(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    if (checkpoints && k % K == 0) checkpoints->push_back(y);
    integ.step(y, k);
    const auto s = sigmas_of(y, n, dx);
    if (!std::isfinite(s.sc) || !std::isfinite(s.tot) || !std::isfinite(s.inc)) {
      throw BlowUpError(std::isfinite(s.tot) ? "u_inc" : "u_tot", "latent rollout step " + std::to_string(k + 1));
    }
    r.sigma_sc.push_back(s.sc);
    r.sigma_tot.push_back(s.tot);
    r.sigma_inc.push_back(s.inc);
    if (options.field_stride > 0 && (k + 1) % options.field_stride == 0) {
      for (int i = 0; i < n; ++i) {
        const double d = y[i] - y[2 * n + i];
        r.usc2_field.push_back(d * d);
      }
      ++r.field_rows;
    }
  }
  r.final_state = LatentState(conds.initial.grid, integ.time(n_steps));
  std::copy(y.begin(), y.begin() + n, r.final_state.u_tot.begin());
  std::copy(y.begin() + n, y.begin() + 2 * n, r.final_state.v_tot.begin());
  std::copy(y.begin() + 2 * n, y.begin() + 3 * n, r.final_state.u_inc.begin());
  std::copy(y.begin() + 3 * n, y.end(), r.final_state.v_inc.begin());
  return r;
}

void check_cotangents(const SigmaCotangents& cot, int n_steps) {
  auto check_len = [&](std::span<const double> s, const char* name) {
    if (!s.empty() && static_cast<int>(s.size()) != n_steps) {
      throw DimensionError(std::string("rollout_vjp: cotangent length mismatch for ") + name);
    }
  };
  check_len(cot.d_sc, "sigma_sc");
  check_len(cot.d_tot, "sigma_tot");
  check_len(cot.d_inc, "sigma_inc");
}

// Reverse sweep segment by segment, recomputing the RK4 stages from each checkpoint.
LatentGradients backward_sweep(JointIntegrator& integ, const LatentConditions& conds, const LatentSpeedInterp& speed,
                               int n_steps, int K, const std::vector<std::vector<double>>& checkpoints,
                               const SigmaCotangents& cot) {
  const int n = integ.n();
  const double dx = conds.initial.grid.dx();

  LatentGradients g;
  g.u_tot.assign(n, 0.0);
  g.v_tot.assign(n, 0.0);
  g.u_inc.assign(n, 0.0);
  g.v_inc.assign(n, 0.0);
  g.f_z.assign(n, 0.0);
  g.sigma_z.assign(n, 0.0);
  g.c_frames.assign(speed.c_frames.size(), std::vector<double>(n, 0.0));

  std::vector<double> lam(4 * n, 0.0);
  const std::size_t stage_block = static_cast<std::size_t>(16) * n;
  std::vector<double> stages(static_cast<std::size_t>(K) * stage_block);
  std::vector<std::vector<double>> states(K + 1);
  const int n_segments = static_cast<int>(checkpoints.size());
  for (int sgi = n_segments - 1; sgi >= 0; --sgi) {
    const int s0 = sgi * K;
    const int s1 = std::min(s0 + K, n_steps);
    states[0] = checkpoints[sgi];
    for (int k = s0; k < s1; ++k) {
      states[k - s0 + 1] = states[k - s0];
      integ.step(states[k - s0 + 1], k, stages.data() + (k - s0) * stage_block);
    }
    for (int k = s1; k > s0; --k) {
      // Loss terms attached to y_k (sigma recorded after step k).
      const auto& yk = states[k - s0];
      const double a = cot.d_sc.empty() ? 0.0 : cot.d_sc[k - 1];
      const double b = cot.d_tot.empty() ? 0.0 : cot.d_tot[k - 1];
      const double c = cot.d_inc.empty() ? 0.0 : cot.d_inc[k - 1];
      if (a != 0.0 || b != 0.0 || c != 0.0) {
        const double* ut = yk.data();
        const double* ui = yk.data() + 2 * n;
        for (int i = 0; i < n; ++i) {
          const double d = ut[i] - ui[i];
          lam[i] += 2.0 * dx * (a * d + b * ut[i]);
          lam[2 * n + i] += 2.0 * dx * (-a * d + c * ui[i]);
        }
      }
      integ.step_backward(stages.data() + (k - 1 - s0) * stage_block, k - 1, lam, g);
    }
  }
  std::copy(lam.begin(), lam.begin() + n, g.u_tot.begin());
  std::copy(lam.begin() + n, lam.begin() + 2 * n, g.v_tot.begin());
  std::copy(lam.begin() + 2 * n, lam.begin() + 3 * n, g.u_inc.begin());
  std::copy(lam.begin() + 3 * n, lam.end(), g.v_inc.begin());
  return g;
}

}  // namespace

RolloutResult rollout(const LatentConditions& conds, const LatentSpeedInterp& speed, int horizon_actions,
                      int steps_per_action, double dt, const RolloutOptions& options) {
  const int n_steps = horizon_actions * steps_per_action;
  if (n_steps < 1) throw ParameterError("rollout needs at least one step");
  JointIntegrator integ(conds, speed, dt);
  check_speed_covers(speed, integ.time(0), integ.time(n_steps));
  return forward_sweep(integ, conds, n_steps, options, 0, nullptr);
}

LatentGradients rollout_vjp(const LatentConditions& conds, const LatentSpeedInterp& speed, int horizon_actions,
                            int steps_per_action, double dt, const SigmaCotangents& cot) {
  const int n_steps = horizon_actions * steps_per_action;
  if (n_steps < 1) throw ParameterError("rollout needs at least one step");
  check_cotangents(cot, n_steps);
  JointIntegrator integ(conds, speed, dt);
  check_speed_covers(speed, integ.time(0), integ.time(n_steps));
  const int K = checkpoint_stride(n_steps);
  std::vector<std::vector<double>> checkpoints;
  forward_sweep(integ, conds, n_steps, {}, K, &checkpoints);
  return backward_sweep(integ, conds, speed, n_steps, K, checkpoints, cot);
}

LatentGradients rollout_with_vjp(const LatentConditions& conds, const LatentSpeedInterp& speed, int horizon_actions,
                                 int steps_per_action, double dt, const CotangentFn& cotangents,
                                 RolloutResult& forward) {
  const int n_steps = horizon_actions * steps_per_action;
  if (n_steps < 1) throw ParameterError("rollout needs at least one step");
  JointIntegrator integ(conds, speed, dt);
  check_speed_covers(speed, integ.time(0), integ.time(n_steps));
  const int K = checkpoint_stride(n_steps);
  std::vector<std::vector<double>> checkpoints;
  forward = forward_sweep(integ, conds, n_steps, {}, K, &checkpoints);
  const SigmaCotangents cot = cotangents(forward);
  check_cotangents(cot, n_steps);
  return backward_sweep(integ, conds, speed, n_steps, K, checkpoints, cot);
}

}  // namespace wavectl
