#pragma once

// Uniform-grid scalar fields on [0,L] x [0,1], periodic in y, with the
// finite-difference operators and quadrature used by every energy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wellscape/error.hpp"

namespace wellscape {

struct Grid {
  double L = 1.0;
  int nx = 8;
  int ny = 8;
  double hx = 0.125;
  double hy = 0.125;

  int columns() const { return nx + 1; }
  std::size_t size() const { return static_cast<std::size_t>(nx + 1) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(j);
  }
  double x(int i) const { return i * hx; }
  double y(int j) const { return j * hy; }
  double area() const { return L; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.L == b.L && a.nx == b.nx && a.ny == b.ny;
  }
};

inline constexpr int kMinCells = 8;

inline Grid make_grid(double L, int nx, int ny) {
  if (!(L > 0.0) || !std::isfinite(L)) {
    throw Error(ErrorKind::InvalidGrid, "domain width must be positive, got " + std::to_string(L));
  }
  if (nx < kMinCells || ny < kMinCells) {
    throw Error(ErrorKind::InvalidGrid, "need nx, ny >= 8, got " + std::to_string(nx) + "x" +
                                            std::to_string(ny));
  }
  return Grid{L, nx, ny, L / nx, 1.0 / ny};
}

enum class AdmissibleClass { A1 = 1, A2 = 2, A3 = 3 };

/// Nodal samples u(i*hx, j*hy) for i in [0, nx], j in [0, ny). Row j = ny is
/// the same as row 0, so y-periodicity never has to be enforced.
class ScalarField {
 public:
  explicit ScalarField(const Grid& grid, AdmissibleClass cls = AdmissibleClass::A3)
      : grid_(grid), values_(grid.size(), 0.0), class_(cls) {}

  ScalarField(const Grid& grid, std::vector<double> values,
              AdmissibleClass cls = AdmissibleClass::A3)
      : grid_(grid), values_(std::move(values)), class_(cls) {
    if (values_.size() != grid_.size()) {
      throw Error(ErrorKind::InvalidGrid, "field has " + std::to_string(values_.size()) +
                                              " values, grid needs " + std::to_string(grid_.size()));
    }
  }

  template <typename F>
  static ScalarField sample(const Grid& grid, F&& f, AdmissibleClass cls = AdmissibleClass::A3) {
    std::vector<double> v(grid.size());
    for (int i = 0; i <= grid.nx; ++i) {
      for (int j = 0; j < grid.ny; ++j) v[grid.index(i, j)] = f(grid.x(i), grid.y(j));
    }
    return ScalarField(grid, std::move(v), cls);
  }

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }
  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  AdmissibleClass claimed_class() const { return class_; }

  ScalarField scaled(double a) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= a;
    return ScalarField(grid_, std::move(v), class_);
  }

  ScalarField with_class(AdmissibleClass cls) const { return ScalarField(grid_, values_, cls); }

 private:
  Grid grid_;
  std::vector<double> values_;
  AdmissibleClass class_;
};

// ---------------------------------------------------------------------------
// Stencils

/// One-dimensional stencil along x: output column i reads columns
/// first .. first+count-1 with the given coefficients.
struct XStencil {
  struct Row {
    int first = 0;
    int count = 0;
    std::array<double, 4> coeff{};
  };
  std::vector<Row> rows;
};

/// Periodic stencil along y with offsets -1, 0, +1.
struct YStencil {
  std::array<double, 3> coeff{};
};

inline XStencil make_dx_stencil(const Grid& g) {
  XStencil s;
  s.rows.resize(g.nx + 1);
  const double c = 1.0 / (2.0 * g.hx);
  s.rows[0] = {0, 3, {-3.0 * c, 4.0 * c, -1.0 * c, 0.0}};
  for (int i = 1; i < g.nx; ++i) s.rows[i] = {i - 1, 3, {-c, 0.0, c, 0.0}};
  s.rows[g.nx] = {g.nx - 2, 3, {1.0 * c, -4.0 * c, 3.0 * c, 0.0}};
  return s;
}

inline XStencil make_dxx_stencil(const Grid& g) {
  XStencil s;
  s.rows.resize(g.nx + 1);
  const double c = 1.0 / (g.hx * g.hx);
  s.rows[0] = {0, 4, {2.0 * c, -5.0 * c, 4.0 * c, -1.0 * c}};
  for (int i = 1; i < g.nx; ++i) s.rows[i] = {i - 1, 3, {c, -2.0 * c, c, 0.0}};
  s.rows[g.nx] = {g.nx - 3, 4, {-1.0 * c, 4.0 * c, -5.0 * c, 2.0 * c}};
  return s;
}

inline YStencil make_dy_stencil(const Grid& g) {
  const double c = 1.0 / (2.0 * g.hy);
  return {{-c, 0.0, c}};
}

inline YStencil make_dyy_stencil(const Grid& g) {
  const double c = 1.0 / (g.hy * g.hy);
  return {{c, -2.0 * c, c}};
}

namespace detail {

inline void check_size(const Grid& g, std::span<const double> u) {
  if (u.size() != g.size()) throw Error(ErrorKind::InvalidGrid, "array size does not match grid");
}

}  // namespace detail

inline void apply_x(const Grid& g, const XStencil& s, std::span<const double> u,
                    std::span<double> out) {
  const int ny = g.ny;
  for (int i = 0; i <= g.nx; ++i) {
    const auto& r = s.rows[i];
    double* o = out.data() + g.index(i, 0);
    std::fill(o, o + ny, 0.0);
    for (int k = 0; k < r.count; ++k) {
      const double c = r.coeff[k];
      if (c == 0.0) continue;
      const double* in = u.data() + g.index(r.first + k, 0);
      for (int j = 0; j < ny; ++j) o[j] += c * in[j];
    }
  }
}

/// out = S^T u (accumulating into a zeroed buffer).
inline void apply_x_transpose(const Grid& g, const XStencil& s, std::span<const double> u,
                              std::span<double> out) {
  const int ny = g.ny;
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i <= g.nx; ++i) {
    const auto& r = s.rows[i];
    const double* in = u.data() + g.index(i, 0);
    for (int k = 0; k < r.count; ++k) {
      const double c = r.coeff[k];
      if (c == 0.0) continue;
      double* o = out.data() + g.index(r.first + k, 0);
      for (int j = 0; j < ny; ++j) o[j] += c * in[j];
    }
  }
}

inline void apply_y(const Grid& g, const YStencil& s, std::span<const double> u,
                    std::span<double> out) {
  const int ny = g.ny;
  const auto [cm, c0, cp] = s.coeff;
  for (int i = 0; i <= g.nx; ++i) {
    const double* in = u.data() + g.index(i, 0);
    double* o = out.data() + g.index(i, 0);
    o[0] = cm * in[ny - 1] + c0 * in[0] + cp * in[1];
    for (int j = 1; j < ny - 1; ++j) o[j] = cm * in[j - 1] + c0 * in[j] + cp * in[j + 1];
    o[ny - 1] = cm * in[ny - 2] + c0 * in[ny - 1] + cp * in[0];
  }
}

inline void apply_y_transpose(const Grid& g, const YStencil& s, std::span<const double> u,
                              std::span<double> out) {
  // The transpose of a circulant stencil is the stencil with reversed offsets.
  apply_y(g, YStencil{{s.coeff[2], s.coeff[1], s.coeff[0]}}, u, out);
}

// ---------------------------------------------------------------------------
// Field-level operators

inline ScalarField d_x(const ScalarField& u) {
  const Grid& g = u.grid();
  std::vector<double> out(g.size());
  apply_x(g, make_dx_stencil(g), u.values(), out);
  return ScalarField(g, std::move(out), u.claimed_class());
}

inline ScalarField d_y(const ScalarField& u) {
  const Grid& g = u.grid();
  std::vector<double> out(g.size());
  apply_y(g, make_dy_stencil(g), u.values(), out);
  return ScalarField(g, std::move(out), u.claimed_class());
}

inline ScalarField d_xx(const ScalarField& u) {
  const Grid& g = u.grid();
  std::vector<double> out(g.size());
  apply_x(g, make_dxx_stencil(g), u.values(), out);
  return ScalarField(g, std::move(out), u.claimed_class());
}

inline ScalarField d_yy(const ScalarField& u) {
  const Grid& g = u.grid();
  std::vector<double> out(g.size());
  apply_y(g, make_dyy_stencil(g), u.values(), out);
  return ScalarField(g, std::move(out), u.claimed_class());
}

/// Mixed derivative d_x(d_y(u)); the two orders agree because the stencils
/// act on different axes.
inline ScalarField d_xy(const ScalarField& u) { return d_x(d_y(u)); }

// ---------------------------------------------------------------------------
// Quadrature

/// Nodal weights of the cell-centred bilinear rule: the cell-centre value of
/// the bilinear interpolant times hx*hy, summed over cells. This is the
/// trapezoid rule in x and the (periodic) rectangle rule in y.
inline std::vector<double> column_weights(const Grid& g) {
  std::vector<double> w(g.nx + 1, g.hx * g.hy);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

inline double integrate(const Grid& g, std::span<const double> f) {
  detail::check_size(g, f);
  const auto w = column_weights(g);
  double total = 0.0;
  for (int i = 0; i <= g.nx; ++i) {
    const double* col = f.data() + g.index(i, 0);
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j) s += col[j];
    total += w[i] * s;
  }
  return total;
}

inline double integrate(const ScalarField& f) { return integrate(f.grid(), f.values()); }

/// Integral of f^2.
inline double integrate_squared(const Grid& g, std::span<const double> f) {
  detail::check_size(g, f);
  const auto w = column_weights(g);
  double total = 0.0;
  for (int i = 0; i <= g.nx; ++i) {
    const double* col = f.data() + g.index(i, 0);
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j) s += col[j] * col[j];
    total += w[i] * s;
  }
  return total;
}

inline double l2_norm(const ScalarField& u) { return std::sqrt(integrate_squared(u.grid(), u.values())); }

inline ScalarField multiply(const ScalarField& a, const ScalarField& b) {
  if (!(a.grid() == b.grid())) throw Error(ErrorKind::InvalidGrid, "grid mismatch");
  std::vector<double> v(a.grid().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values()[k] * b.values()[k];
  return ScalarField(a.grid(), std::move(v), a.claimed_class());
}

/// Linear combination a*u + b*v.
inline ScalarField combine(double a, const ScalarField& u, double b, const ScalarField& v) {
  if (!(u.grid() == v.grid())) throw Error(ErrorKind::InvalidGrid, "grid mismatch");
  std::vector<double> w(u.grid().size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = a * u.values()[k] + b * v.values()[k];
  return ScalarField(u.grid(), std::move(w), u.claimed_class());
}

/// Circular shift by whole rows in y: result(i, j) = u(i, j - shift).
inline ScalarField shift_y(const ScalarField& u, int shift) {
  const Grid& g = u.grid();
  std::vector<double> v(g.size());
  const int s = ((shift % g.ny) + g.ny) % g.ny;
  for (int i = 0; i <= g.nx; ++i) {
    for (int j = 0; j < g.ny; ++j) v[g.index(i, (j + s) % g.ny)] = u(i, j);
  }
  return ScalarField(g, std::move(v), u.claimed_class());
}

// ---------------------------------------------------------------------------
// Admissibility

inline constexpr double kDirichletTolerance = 1e-12;

struct AdmissibilityReport {
  bool ok = true;
  double max_left_edge = 0.0;
  std::vector<std::string> violations;
};

/// Left-edge Dirichlet condition and finiteness. Periodicity in y is built
/// into the storage and always holds.
inline AdmissibilityReport validate_admissible(const ScalarField& u) {
  AdmissibilityReport rep;
  const Grid& g = u.grid();
  bool finite = true;
  for (double v : u.values()) finite = finite && std::isfinite(v);
  if (!finite) {
    rep.ok = false;
    rep.violations.emplace_back("non-finite values");
  }
  for (int j = 0; j < g.ny; ++j) rep.max_left_edge = std::max(rep.max_left_edge, std::abs(u(0, j)));
  if (!(rep.max_left_edge <= kDirichletTolerance)) {
    rep.ok = false;
    rep.violations.emplace_back("Dirichlet violation at x=0: max |u(0,y)| = " +
                                std::to_string(rep.max_left_edge));
  }
  return rep;
}

}  // namespace wellscape
