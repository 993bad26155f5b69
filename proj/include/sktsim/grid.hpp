#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sktsim/errors.hpp"

namespace sktsim {

/// Uniform cell-centered grid on a box, 1D or 2D, no-flux boundaries.
struct Grid {
  int dims = 1;
  std::array<int, 2> shape{3, 1}; // cells per axis; shape[1] == 1 in 1D
  double h = 1.0 / 3.0;           // cell width, identical along every axis

  Grid() = default;
  Grid(int dims_, std::array<int, 2> shape_, double h_) : dims(dims_), shape(shape_), h(h_) {
    if (dims != 1 && dims != 2) throw DomainError("grid: dims must be 1 or 2");
    if (h <= 0.0) throw DomainError("grid: cell width must be positive");
    if (shape[0] < 3 || (dims == 2 && shape[1] < 3))
      throw DomainError("grid: need at least 3 cells per axis");
    if (dims == 1) shape[1] = 1;
  }

  int cells() const { return shape[0] * shape[1]; }
  double cell_volume() const { return dims == 1 ? h : h * h; }
  double volume() const { return cell_volume() * cells(); }
  int index(int ix, int iy) const { return ix + shape[0] * iy; }
  /// Cell-center coordinate along an axis (the width is uniform across axes).
  double center(int /*axis*/, int i) const { return (i + 0.5) * h; }
  bool operator==(const Grid& o) const { return dims == o.dims && shape == o.shape && h == o.h; }
};

struct ScalarField {
  Grid grid;
  std::vector<double> data;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0) : grid(g), data(static_cast<size_t>(g.cells()), fill) {}
};

/// Per-species cell-averaged densities, the state vector u.
struct SpeciesFields {
  Grid grid;
  int n = 0;
  std::vector<std::vector<double>> data; // data[i][cell]

  SpeciesFields() = default;
  SpeciesFields(const Grid& g, int n_, double fill = 0.0)
      : grid(g), n(n_), data(static_cast<size_t>(n_), std::vector<double>(static_cast<size_t>(g.cells()), fill)) {}

  ScalarField species(int i) const {
    ScalarField f(grid);
    f.data = data[i];
    return f;
  }
  bool all_finite() const {
    for (const auto& v : data)
      for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
  }
  double min_value() const {
    double m = data.empty() ? 0.0 : data[0][0];
    for (const auto& v : data)
      for (double x : v) m = std::min(m, x);
    return m;
  }
};

/// Mirror-ghost second difference: 3-point in 1D, 5-point in 2D. Zero-flux
/// boundaries, so the induced operator has exact zero row sums.
inline void laplacian_neumann_into(const Grid& g, std::span<const double> f, std::span<double> out) {
  const double ih2 = 1.0 / (g.h * g.h);
  const int nx = g.shape[0];
  if (g.dims == 1) {
    for (int i = 0; i < nx; ++i) {
      const double fl = (i > 0) ? f[i - 1] : f[i];
      const double fr = (i < nx - 1) ? f[i + 1] : f[i];
      out[i] = (fl - 2.0 * f[i] + fr) * ih2;
    }
    return;
  }
  const int ny = g.shape[1];
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const int c = g.index(ix, iy);
      const double fw = (ix > 0) ? f[c - 1] : f[c];
      const double fe = (ix < nx - 1) ? f[c + 1] : f[c];
      const double fs = (iy > 0) ? f[c - nx] : f[c];
      const double fn = (iy < ny - 1) ? f[c + nx] : f[c];
      out[c] = (fw + fe + fs + fn - 4.0 * f[c]) * ih2;
    }
  }
}

inline ScalarField laplacian_neumann(const ScalarField& f) {
  ScalarField out(f.grid);
  laplacian_neumann_into(f.grid, f.data, out.data);
  return out;
}

/// Number of stencil neighbors of a cell; the diagonal entry of the discrete
/// Laplacian is -neighbors/h^2.
inline int stencil_neighbors(const Grid& g, int ix, int iy) {
  int k = 0;
  if (ix > 0) ++k;
  if (ix < g.shape[0] - 1) ++k;
  if (g.dims == 2) {
    if (iy > 0) ++k;
    if (iy < g.shape[1] - 1) ++k;
  }
  return k;
}

/// Face-centered approximation of \int |grad f|^2 dx: sum over interior faces
/// of the squared face difference divided by h, times the face volume.
inline double gradient_sq_norm(const Grid& g, std::span<const double> f) {
  const int nx = g.shape[0];
  const int ny = g.shape[1];
  const double w = g.cell_volume() / (g.h * g.h); // ((df)/h)^2 * h^d
  double s = 0.0;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const double d = f[g.index(ix + 1, iy)] - f[g.index(ix, iy)];
      s += d * d * w;
    }
  if (g.dims == 2) {
    for (int iy = 0; iy + 1 < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        const double d = f[g.index(ix, iy + 1)] - f[g.index(ix, iy)];
        s += d * d * w;
      }
  }
  return s;
}

inline double gradient_sq_norm(const ScalarField& f) { return gradient_sq_norm(f.grid, f.data); }

/// Cell-volume-weighted sum, the discrete \int_O f dx.
inline double integrate(const Grid& g, std::span<const double> f) {
  double s = 0.0;
  for (double x : f) s += x;
  return s * g.cell_volume();
}

inline double integrate(const ScalarField& f) { return integrate(f.grid, f.data); }

/// Combined discrete L2 norm over all species, ||u||_{L2} = sqrt(sum_i \int u_i^2).
inline double l2_norm(const SpeciesFields& u) {
  double s = 0.0;
  for (const auto& v : u.data) {
    double si = 0.0;
    for (double x : v) si += x * x;
    s += si;
  }
  return std::sqrt(s * u.grid.cell_volume());
}

/// Cell-centered gradient magnitude (averaged face differences), used by the
/// L^p gradient norms where p != 2.
inline std::vector<double> gradient_magnitude_cells(const Grid& g, std::span<const double> f) {
  const int nx = g.shape[0];
  const int ny = g.shape[1];
  std::vector<double> out(static_cast<size_t>(g.cells()), 0.0);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const int c = g.index(ix, iy);
      const double dxm = (ix > 0) ? f[c] - f[c - 1] : 0.0;
      const double dxp = (ix < nx - 1) ? f[c + 1] - f[c] : 0.0;
      const double gx = 0.5 * (dxm + dxp) / g.h;
      double g2 = gx * gx;
      if (g.dims == 2) {
        const double dym = (iy > 0) ? f[c] - f[c - nx] : 0.0;
        const double dyp = (iy < ny - 1) ? f[c + nx] - f[c] : 0.0;
        const double gy = 0.5 * (dym + dyp) / g.h;
        g2 += gy * gy;
      }
      out[c] = std::sqrt(g2);
    }
  return out;
}

} // namespace sktsim
