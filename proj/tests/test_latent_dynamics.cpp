#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "wavectl/errors.hpp"
#include "wavectl/latent_dynamics.hpp"
#include "wavectl/random.hpp"
#include "wavectl/rk4.hpp"

using namespace wavectl;

namespace {

std::vector<double> fundamental(const Grid1D& g) {
  std::vector<double> u(g.n_cells);
  for (int i = 0; i < g.n_cells; ++i) u[i] = std::sin(std::numbers::pi * (g.coord(i) + 0.5 * g.length) / g.length);
  u.front() = 0.0;
  u.back() = 0.0;
  return u;
}

LatentSpeedInterp constant_speed(int n, double c, double t0, double t1, int n_frames = 2) {
  LatentSpeedInterp s;
  for (int k = 0; k < n_frames; ++k) {
    s.c_frames.emplace_back(n, c);
    s.t_knots.push_back(t0 + (t1 - t0) * k / (n_frames - 1));
  }
  return s;
}

LatentConditions quiet_conditions(const Grid1D& g, double c_amb) {
  LatentConditions lc;
  lc.initial = LatentState(g);
  lc.f_z.assign(g.n_cells, 0.0);
  lc.sigma_z.assign(g.n_cells, 0.0);
  lc.c_ambient = c_amb;
  return lc;
}

}  // namespace

TEST(LatentDynamics, EmbeddingExamples) {
  const Grid1D g = Grid1D::make(101, 7.0);
  const Field1D a = sinusoidal_embed(std::vector<double>{1.0, 0.0, 0.0}, g);
  EXPECT_NEAR(a[50], 1.0, 1e-15);
  const Field1D b = sinusoidal_embed(std::vector<double>{0.0, 1.0}, g);
  EXPECT_NEAR(b[25], 1.0, 1e-15);
  Rng rng(8);
  std::vector<double> coeffs(16);
  for (double& c : coeffs) c = normal(rng);
  const Field1D r = sinusoidal_embed(coeffs, g);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[100], 0.0);
}

TEST(LatentDynamics, EmbeddingTransposeIsAdjoint) {
  const Grid1D g = Grid1D::make(40, 1.0);
  const SineBasis basis(7, g);
  Rng rng(4);
  std::vector<double> b(7), w(40), e(40), gb(7);
  for (double& v : b) v = normal(rng);
  for (double& v : w) v = normal(rng);
  basis.embed(b, e);
  basis.embed_transpose(w, gb);
  double lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < 40; ++i) lhs += e[i] * w[i];
  for (int k = 0; k < 7; ++k) rhs += b[k] * gb[k];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(LatentDynamics, RhsOfZeroStateIsZero) {
  const Grid1D g = Grid1D::make(32, 2.0);
  const std::vector<double> c(32, 3.0), zero(32, 0.0), sig(32, 5.0);
  const LatentState d = latent_rhs(LatentState(g), c, zero, sig, 10.0, 3.0, 0.123);
  for (const auto* f : {&d.u_tot, &d.v_tot, &d.u_inc, &d.v_inc})
    for (double v : *f) EXPECT_EQ(v, 0.0);
}

TEST(LatentDynamics, RhsRejectsNonFinite) {
  const Grid1D g = Grid1D::make(8, 1.0);
  LatentState s(g);
  s.v_inc[3] = std::nan("");
  const std::vector<double> c(8, 1.0), zero(8, 0.0);
  EXPECT_THROW(latent_rhs(s, c, zero, zero, 0.0, 1.0, 0.0), BlowUpError);
}

TEST(LatentDynamics, StandingWaveOverOnePeriod) {
  const double L = 4.0, c = 2.0;
  const Grid1D g = Grid1D::make(257, L);
  const auto mode = fundamental(g);
  const double period = 2.0 * L / c;
  const int n_steps = 800;
  const double h = period / n_steps;
  const std::vector<double> cz(g.n_cells, c), zero(g.n_cells, 0.0);
  // Pack [u_tot, v_tot, u_inc, v_inc] and integrate the right-hand side directly.
  const int n = g.n_cells;
  std::vector<double> y(4 * n, 0.0);
  std::copy(mode.begin(), mode.end(), y.begin());
  std::copy(mode.begin(), mode.end(), y.begin() + 2 * n);
  auto f = [&](std::span<const double> yy, double t, std::span<double> out) {
    LatentState s(g, t);
    std::copy(yy.begin(), yy.begin() + n, s.u_tot.begin());
    std::copy(yy.begin() + n, yy.begin() + 2 * n, s.v_tot.begin());
    std::copy(yy.begin() + 2 * n, yy.begin() + 3 * n, s.u_inc.begin());
    std::copy(yy.begin() + 3 * n, yy.end(), s.v_inc.begin());
    const LatentState d = latent_rhs(s, cz, zero, zero, 0.0, c, t);
    std::copy(d.u_tot.begin(), d.u_tot.end(), out.begin());
    std::copy(d.v_tot.begin(), d.v_tot.end(), out.begin() + n);
    std::copy(d.u_inc.begin(), d.u_inc.end(), out.begin() + 2 * n);
    std::copy(d.v_inc.begin(), d.v_inc.end(), out.begin() + 3 * n);
  };
  Rk4Workspace ws;
  double err2 = 0.0, ref2 = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    rk4_advance(y, k * h, h, f, ws);
    const double phase = std::cos(std::numbers::pi * c * (k + 1) * h / L);
    for (int i = 0; i < n; ++i) {
      const double ref = mode[i] * phase;
      err2 += (y[i] - ref) * (y[i] - ref);
      ref2 += ref * ref;
    }
  }
  EXPECT_LT(std::sqrt(err2 / ref2), 0.01);
}

TEST(LatentDynamics, UniformDampingDecaysExponentially) {
  const double L = 4.0, c = 2.0, sigma = 0.7;
  const Grid1D g = Grid1D::make(129, L);
  const int actions = 4, spa = 50;
  const double dt = 0.01, t_end = actions * spa * dt;
  LatentConditions damped = quiet_conditions(g, c);
  damped.initial.u_tot = fundamental(g);
  damped.initial.u_inc = fundamental(g);
  LatentConditions free = damped;
  damped.sigma_z.assign(g.n_cells, sigma);
  const auto speed = constant_speed(g.n_cells, c, 0.0, t_end);
  const auto rd = rollout(damped, speed, actions, spa, dt);
  const auto rf = rollout(free, speed, actions, spa, dt);
  const double decay = std::exp(-sigma * t_end);
  for (int i = 0; i < g.n_cells; ++i) {
    EXPECT_NEAR(rd.final_state.u_tot[i], decay * rf.final_state.u_tot[i], 1e-7);
    EXPECT_NEAR(rd.final_state.v_tot[i], decay * rf.final_state.v_tot[i], 1e-7);
  }
}

TEST(LatentDynamics, IdenticalPairsHaveNoScatteredEnergy) {
  const Grid1D g = Grid1D::make(64, 3.0);
  Rng rng(12);
  LatentConditions lc = quiet_conditions(g, 1.5);
  for (int i = 1; i < 63; ++i) {
    lc.initial.u_tot[i] = lc.initial.u_inc[i] = normal(rng);
    lc.initial.v_tot[i] = lc.initial.v_inc[i] = normal(rng);
    lc.f_z[i] = normal(rng);
    lc.sigma_z[i] = uniform(rng, 0.0, 2.0);
  }
  lc.omega = 3.0;
  const auto r = rollout(lc, constant_speed(64, 1.5, 0.0, 0.2), 20, 10, 1e-3);
  ASSERT_EQ(r.sigma_sc.size(), 200u);
  for (double v : r.sigma_sc) EXPECT_EQ(v, 0.0);
  for (double v : r.sigma_tot) EXPECT_GT(v, 0.0);
}

TEST(LatentDynamics, SeriesLengthAndSigns) {
  const Grid1D g = Grid1D::make(32, 3.0);
  LatentConditions lc = quiet_conditions(g, 1.0);
  for (int i = 1; i < 31; ++i) lc.f_z[i] = std::sin(0.3 * i);
  lc.omega = 5.0;
  LatentSpeedInterp speed = constant_speed(32, 1.0, 0.0, 0.2, 21);
  for (std::size_t k = 0; k < speed.c_frames.size(); ++k)
    for (int i = 0; i < 32; ++i) speed.c_frames[k][i] = 1.0 + 0.2 * std::sin(0.1 * k + 0.2 * i);
  const auto r = rollout(lc, speed, 20, 100, 1e-4);
  EXPECT_EQ(r.sigma_sc.size(), 2000u);
  EXPECT_EQ(r.sigma_tot.size(), 2000u);
  EXPECT_EQ(r.sigma_inc.size(), 2000u);
  double sc = 0.0;
  for (double v : r.sigma_sc) {
    EXPECT_GE(v, 0.0);
    sc += v;
  }
  EXPECT_GT(sc, 0.0);
}

TEST(LatentDynamics, RolloutOutsideSpeedRangeIsRejected) {
  const Grid1D g = Grid1D::make(16, 1.0);
  EXPECT_THROW(rollout(quiet_conditions(g, 1.0), constant_speed(16, 1.0, 0.0, 0.05), 2, 10, 1e-2), ParameterError);
}

TEST(LatentDynamics, SpeedInterpolationLocatesSegments) {
  LatentSpeedInterp s = constant_speed(3, 1.0, 0.0, 3.0, 4);
  s.c_frames[2] = {3.0, 3.0, 3.0};
  const auto [k, a] = s.locate(1.25);
  EXPECT_EQ(k, 1);
  EXPECT_NEAR(a, 0.25, 1e-15);
  std::vector<double> out(3);
  s.c_at(1.5, out);
  EXPECT_NEAR(out[0], 2.0, 1e-15);
  s.c_at(3.0, out);
  EXPECT_NEAR(out[1], 1.0, 1e-15);
  EXPECT_THROW(s.locate(3.5), ParameterError);
}

TEST(LatentDynamics, PairStepperMatchesRollout) {
  const Grid1D g = Grid1D::make(48, 2.0);
  Rng rng(21);
  LatentConditions lc = quiet_conditions(g, 1.0);
  for (int i = 1; i < 47; ++i) {
    lc.initial.u_tot[i] = normal(rng);
    lc.initial.v_tot[i] = normal(rng);
    lc.f_z[i] = normal(rng);
    lc.sigma_z[i] = uniform(rng, 0.0, 1.0);
  }
  lc.omega = 2.0;
  lc.initial.t = 0.3;
  LatentSpeedInterp speed = constant_speed(48, 1.0, 0.3, 0.5, 3);
  for (int i = 0; i < 48; ++i) speed.c_frames[1][i] = 1.0 + 0.1 * std::cos(0.4 * i);
  const auto r = rollout(lc, speed, 2, 50, 2e-3);
  LatentPairStepper stepper(g, lc.f_z, lc.sigma_z, lc.omega);
  std::vector<double> y(96);
  std::copy(lc.initial.u_tot.begin(), lc.initial.u_tot.end(), y.begin());
  std::copy(lc.initial.v_tot.begin(), lc.initial.v_tot.end(), y.begin() + 48);
  for (int k = 0; k < 100; ++k) {
    stepper.step(y, 0.3 + k * 2e-3, 2e-3, [&](double t, std::span<double> out) {
      speed.c_at(t, out);
      for (double& v : out) v *= v;
    });
  }
  for (int i = 0; i < 48; ++i) {
    EXPECT_NEAR(y[i], r.final_state.u_tot[i], 1e-12);
    EXPECT_NEAR(y[48 + i], r.final_state.v_tot[i], 1e-12);
  }
}

TEST(LatentDynamics, AdjointMatchesFiniteDifferences) {
  const int n = 24;
  const Grid1D g = Grid1D::make(n, 2.0);
  Rng rng(33);
  LatentConditions lc = quiet_conditions(g, 1.0);
  for (int i = 1; i < n - 1; ++i) {
    lc.initial.u_tot[i] = 0.5 * normal(rng);
    lc.initial.v_tot[i] = 0.5 * normal(rng);
    lc.initial.u_inc[i] = 0.5 * normal(rng);
    lc.initial.v_inc[i] = 0.5 * normal(rng);
    lc.f_z[i] = normal(rng);
    lc.sigma_z[i] = uniform(rng, 0.0, 1.0);
  }
  lc.omega = 1.5;
  const int actions = 2, spa = 15;
  const double dt = 0.01;
  LatentSpeedInterp speed = constant_speed(n, 1.0, 0.0, actions * spa * dt, 3);
  for (auto& fr : speed.c_frames)
    for (double& v : fr) v = uniform(rng, 0.8, 1.2);
  const int steps = actions * spa;
  std::vector<double> wsc(steps), wtot(steps), winc(steps);
  for (int k = 0; k < steps; ++k) {
    wsc[k] = normal(rng);
    wtot[k] = normal(rng);
    winc[k] = normal(rng);
  }
  auto objective = [&](const LatentConditions& c, const LatentSpeedInterp& s) {
    const auto r = rollout(c, s, actions, spa, dt);
    double acc = 0.0;
    for (int k = 0; k < steps; ++k) acc += wsc[k] * r.sigma_sc[k] + wtot[k] * r.sigma_tot[k] + winc[k] * r.sigma_inc[k];
    return acc;
  };
  const auto grads = rollout_vjp(lc, speed, actions, spa, dt, SigmaCotangents{wsc, wtot, winc});
  const double eps = 1e-6;
  auto check = [&](auto&& perturb, double analytic, const char* what) {
    LatentConditions cp = lc, cm = lc;
    LatentSpeedInterp sp = speed, sm = speed;
    perturb(cp, sp, eps);
    perturb(cm, sm, -eps);
    const double fd = (objective(cp, sp) - objective(cm, sm)) / (2 * eps);
    EXPECT_NEAR(analytic, fd, 1e-7 + 1e-5 * std::abs(fd)) << what;
  };
  for (int i : {1, 7, 15, 22}) {
    check([&](LatentConditions& c, LatentSpeedInterp&, double e) { c.initial.u_tot[i] += e; }, grads.u_tot[i], "u_tot");
    check([&](LatentConditions& c, LatentSpeedInterp&, double e) { c.initial.v_inc[i] += e; }, grads.v_inc[i], "v_inc");
    check([&](LatentConditions& c, LatentSpeedInterp&, double e) { c.f_z[i] += e; }, grads.f_z[i], "f_z");
    check([&](LatentConditions& c, LatentSpeedInterp&, double e) { c.sigma_z[i] += e; }, grads.sigma_z[i], "sigma_z");
    check([&](LatentConditions&, LatentSpeedInterp& s, double e) { s.c_frames[1][i] += e; }, grads.c_frames[1][i],
          "c_frame");
  }
  // Endpoint f values enter through the one-sided source gradient.
  check([&](LatentConditions& c, LatentSpeedInterp&, double e) { c.f_z[0] += e; }, grads.f_z[0], "f_z[0]");
}
