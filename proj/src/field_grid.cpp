#include "wavectl/field_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wavectl/errors.hpp"

namespace wavectl {

namespace {

void require_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) throw BlowUpError("input", op);
  }
}

}  // namespace

Grid1D Grid1D::make(int n_cells, double length) {
  if (n_cells < 3) throw DimensionError("Grid1D needs at least 3 cells, got " + std::to_string(n_cells));
  if (!(length > 0.0)) throw DimensionError("Grid1D length must be positive");
  return Grid1D{n_cells, length};
}

Grid2D Grid2D::make(int nx, int ny, double length_x, double length_y) {
  if (nx < 3 || ny < 3) {
    throw DimensionError("Grid2D needs at least 3x3 cells, got " + std::to_string(nx) + "x" +
                         std::to_string(ny));
  }
  if (!(length_x > 0.0) || !(length_y > 0.0)) throw DimensionError("Grid2D lengths must be positive");
  return Grid2D{nx, ny, length_x, length_y};
}

Field1D::Field1D(const Grid1D& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != static_cast<std::size_t>(g.n_cells)) throw DimensionError("Field1D size mismatch");
}

Field2D::Field2D(const Grid2D& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != g.size()) throw DimensionError("Field2D size mismatch");
}

namespace stencil {

void ddx_1d(std::span<const double> f, double h, std::span<double> out) {
  const std::size_t n = f.size();
  const double inv2h = 0.5 / h;
  out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv2h;
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (f[i + 1] - f[i - 1]) * inv2h;
  out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv2h;
}

void ddx_1d_transpose(std::span<const double> g, double h, std::span<double> out) {
  const std::size_t n = g.size();
  const double inv2h = 0.5 / h;
  // Gather form: interior row i contributes +g[i] to column i+1 and -g[i] to column i-1.
  if (n < 5) {
    for (std::size_t j = 0; j < n; ++j) {
      const double left = (j >= 2) ? g[j - 1] : 0.0;
      const double right = (j + 2 < n) ? g[j + 1] : 0.0;
      out[j] = (left - right) * inv2h;
    }
  } else {
    out[0] = -g[1] * inv2h;
    out[1] = -g[2] * inv2h;
    for (std::size_t j = 2; j + 2 < n; ++j) out[j] = (g[j - 1] - g[j + 1]) * inv2h;
    out[n - 2] = g[n - 3] * inv2h;
    out[n - 1] = g[n - 2] * inv2h;
  }
  // One-sided rows 0 and n-1.
  out[0] += -3.0 * g[0] * inv2h;
  out[1] += 4.0 * g[0] * inv2h;
  out[2] += -g[0] * inv2h;
  out[n - 1] += 3.0 * g[n - 1] * inv2h;
  out[n - 2] += -4.0 * g[n - 1] * inv2h;
  out[n - 3] += g[n - 1] * inv2h;
}

void ddx_2d(std::span<const double> f, int nx, int ny, double h, std::span<double> out) {
  for (int j = 0; j < ny; ++j) {
    const std::size_t off = static_cast<std::size_t>(j) * nx;
    ddx_1d(f.subspan(off, nx), h, out.subspan(off, nx));
  }
}

void ddy_2d(std::span<const double> f, int nx, int ny, double h, std::span<double> out) {
  const double inv2h = 0.5 / h;
  const std::size_t row = static_cast<std::size_t>(nx);
  const double* src = f.data();
  double* dst = out.data();
  for (int i = 0; i < nx; ++i) {
    dst[i] = (-3.0 * src[i] + 4.0 * src[row + i] - src[2 * row + i]) * inv2h;
  }
  for (int j = 1; j + 1 < ny; ++j) {
    const double* up = src + (j + 1) * row;
    const double* dn = src + (j - 1) * row;
    double* o = dst + j * row;
    for (int i = 0; i < nx; ++i) o[i] = (up[i] - dn[i]) * inv2h;
  }
  const std::size_t last = static_cast<std::size_t>(ny - 1) * row;
  for (int i = 0; i < nx; ++i) {
    dst[last + i] = (3.0 * src[last + i] - 4.0 * src[last - row + i] + src[last - 2 * row + i]) * inv2h;
  }
}

std::vector<double> block_average_weights(int source_n, int target_n) {
  std::vector<double> w(static_cast<std::size_t>(target_n) * source_n, 0.0);
  const double block = static_cast<double>(source_n) / target_n;
  for (int t = 0; t < target_n; ++t) {
    const double lo = t * block;
    const double hi = (t + 1) * block;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(source_n - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int s = first; s <= last; ++s) {
      const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) w[static_cast<std::size_t>(t) * source_n + s] = overlap / block;
    }
  }
  return w;
}

}  // namespace stencil

Field1D ddx(const Field1D& f) {
  require_finite(f.values, "ddx");
  Field1D out(f.grid);
  stencil::ddx_1d(f.values, f.grid.dx(), out.values);
  return out;
}

Field2D ddx(const Field2D& f) {
  require_finite(f.values, "ddx");
  Field2D out(f.grid);
  stencil::ddx_2d(f.values, f.grid.nx, f.grid.ny, f.grid.dx(), out.values);
  return out;
}

Field2D ddy(const Field2D& f) {
  require_finite(f.values, "ddy");
  Field2D out(f.grid);
  stencil::ddy_2d(f.values, f.grid.nx, f.grid.ny, f.grid.dy(), out.values);
  return out;
}

double integrate(const Field1D& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s * f.grid.dx();
}

double integrate(const Field2D& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s * f.grid.dx() * f.grid.dy();
}

Field2D downsample(const Field2D& f, int target_nx, int target_ny) {
  const Grid2D& g = f.grid;
  if (target_nx > g.nx || target_ny > g.ny) {
    throw DimensionError("downsample target " + std::to_string(target_nx) + "x" + std::to_string(target_ny) +
                         " exceeds source " + std::to_string(g.nx) + "x" + std::to_string(g.ny));
  }
  if (target_nx < 1 || target_ny < 1) throw DimensionError("downsample target must be at least 1x1");
  require_finite(f.values, "downsample");
  // Plain aggregate: coarse targets below 3x3 are valid block averages.
  const Grid2D tg{target_nx, target_ny, g.length_x, g.length_y};
  const auto wx = stencil::block_average_weights(g.nx, target_nx);
  const auto wy = stencil::block_average_weights(g.ny, target_ny);

  // Rows first: tmp is target_nx by g.ny.
  std::vector<double> tmp(static_cast<std::size_t>(target_nx) * g.ny, 0.0);
  for (int j = 0; j < g.ny; ++j) {
    const double* row = f.values.data() + g.index(0, j);
    for (int t = 0; t < target_nx; ++t) {
      const double* w = wx.data() + static_cast<std::size_t>(t) * g.nx;
      double acc = 0.0;
      for (int i = 0; i < g.nx; ++i) acc += w[i] * row[i];
      tmp[static_cast<std::size_t>(j) * target_nx + t] = acc;
    }
  }
  Field2D out(tg);
  for (int tj = 0; tj < target_ny; ++tj) {
    const double* w = wy.data() + static_cast<std::size_t>(tj) * g.ny;
    for (int j = 0; j < g.ny; ++j) {
      if (w[j] == 0.0) continue;
      const double* src = tmp.data() + static_cast<std::size_t>(j) * target_nx;
      for (int t = 0; t < target_nx; ++t) out.at(t, tj) += w[j] * src[t];
    }
  }
  return out;
}

}  // namespace wavectl
