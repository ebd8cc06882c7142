#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wavectl {

/// Uniform 1D node grid centred on the origin: x_i = -length/2 + i*dx.
struct Grid1D {
  int n_cells = 0;
  double length = 0.0;

  /// Validating constructor; throws DimensionError for n_cells < 3 or length <= 0.
  static Grid1D make(int n_cells, double length);

  double dx() const { return length / (n_cells - 1); }
  double coord(int i) const { return -0.5 * length + i * dx(); }

  bool operator==(const Grid1D&) const = default;
};

/// Uniform 2D node grid, row-major storage (index = j*nx + i, i along x).
struct Grid2D {
  int nx = 0;
  int ny = 0;
  double length_x = 0.0;
  double length_y = 0.0;

  static Grid2D make(int nx, int ny, double length_x, double length_y);

  double dx() const { return length_x / (nx - 1); }
  double dy() const { return length_y / (ny - 1); }
  double x(int i) const { return -0.5 * length_x + i * dx(); }
  double y(int j) const { return -0.5 * length_y + j * dy(); }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }

  bool operator==(const Grid2D&) const = default;
};

struct Field1D {
  Grid1D grid;
  std::vector<double> values;

  Field1D() = default;
  explicit Field1D(const Grid1D& g, double fill = 0.0) : grid(g), values(g.n_cells, fill) {}
  Field1D(const Grid1D& g, std::vector<double> v);

  double& operator[](int i) { return values[i]; }
  double operator[](int i) const { return values[i]; }
};

struct Field2D {
  Grid2D grid;
  std::vector<double> values;

  Field2D() = default;
  explicit Field2D(const Grid2D& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
  Field2D(const Grid2D& g, std::vector<double> v);

  double& at(int i, int j) { return values[grid.index(i, j)]; }
  double at(int i, int j) const { return values[grid.index(i, j)]; }
};

// Derivatives: second-order central differences in the interior and
// second-order one-sided differences at the first and last node.
Field1D ddx(const Field1D& f);
Field2D ddx(const Field2D& f);
Field2D ddy(const Field2D& f);

/// Sum of values times the cell measure (dx, or dx*dy).
double integrate(const Field1D& f);
double integrate(const Field2D& f);

/// Area-weighted block average onto a coarser grid spanning the same domain.
/// Non-integer block ratios use fractional overlap weights, which keep the
/// arithmetic mean of the field unchanged.
Field2D downsample(const Field2D& f, int target_nx, int target_ny);

namespace stencil {

// Span kernels used by the time steppers. All write every element of `out`.

/// d/dx of a contiguous 1D array with spacing h.
void ddx_1d(std::span<const double> f, double h, std::span<double> out);

/// Transpose of the ddx_1d operator: out = D^T g.
void ddx_1d_transpose(std::span<const double> g, double h, std::span<double> out);

/// d/dx along rows of an nx-by-ny row-major array.
void ddx_2d(std::span<const double> f, int nx, int ny, double h, std::span<double> out);

/// d/dy along columns of an nx-by-ny row-major array.
void ddy_2d(std::span<const double> f, int nx, int ny, double h, std::span<double> out);

/// Row-stochastic matrix (target x source) of fractional overlap weights.
std::vector<double> block_average_weights(int source_n, int target_n);

}  // namespace stencil

}  // namespace wavectl
