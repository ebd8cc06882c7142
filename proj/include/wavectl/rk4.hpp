#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wavectl {

/// Scratch buffers for classical RK4 on a flat state vector.
struct Rk4Workspace {
  std::vector<double> k;
  std::vector<double> stage;
  std::vector<double> acc;

  void resize(std::size_t n) {
    k.resize(n);
    stage.resize(n);
    acc.resize(n);
  }
};

/// One classical RK4 step of y' = f(y, t), in place. `f(y, t, dydt)` must
/// overwrite every element of dydt.
template <class Rhs>
void rk4_advance(std::vector<double>& y, double t, double h, Rhs&& f, Rk4Workspace& ws) {
  const std::size_t n = y.size();
  ws.resize(n);
  double* yp = y.data();
  double* k = ws.k.data();
  double* st = ws.stage.data();
  double* acc = ws.acc.data();

  f(std::span<const double>(y), t, std::span<double>(ws.k));
  for (std::size_t i = 0; i < n; ++i) {
    acc[i] = yp[i] + (h / 6.0) * k[i];
    st[i] = yp[i] + 0.5 * h * k[i];
  }
  f(std::span<const double>(ws.stage), t + 0.5 * h, std::span<double>(ws.k));
  for (std::size_t i = 0; i < n; ++i) {
    acc[i] += (h / 3.0) * k[i];
    st[i] = yp[i] + 0.5 * h * k[i];
  }
  f(std::span<const double>(ws.stage), t + 0.5 * h, std::span<double>(ws.k));
  for (std::size_t i = 0; i < n; ++i) {
    acc[i] += (h / 3.0) * k[i];
    st[i] = yp[i] + h * k[i];
  }
  f(std::span<const double>(ws.stage), t + h, std::span<double>(ws.k));
  for (std::size_t i = 0; i < n; ++i) yp[i] = acc[i] + (h / 6.0) * k[i];
}

}  // namespace wavectl
