#pragma once

// The potential W_Delta, the sets A(u) and B(u), the three energies E1..E3,
// and a C1 surrogate of the well term with its exact discrete gradient.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wellscape/error.hpp"
#include "wellscape/field.hpp"

namespace wellscape {

struct EnergyParams {
  double epsilon = 0.1;
  double delta = 0.0;
  int variant = 1;
  double smooth_w = 0.0;

  void validate() const {
    if (!(epsilon > 0.0)) throw Error(ErrorKind::ConfigError, "epsilon must be > 0");
    if (!(delta >= 0.0)) throw Error(ErrorKind::ConfigError, "delta must be >= 0");
    if (variant < 1 || variant > 3) throw Error(ErrorKind::ConfigError, "variant must be 1, 2 or 3");
    if (!(smooth_w >= 0.0 && smooth_w <= 0.5)) {
      throw Error(ErrorKind::ConfigError, "smooth_w must lie in [0, 0.5]");
    }
  }
};

struct EnergyBreakdown {
  double surface = 0.0;
  double elastic = 0.0;
  double well = 0.0;
  double total = 0.0;
  double area_B = 0.0;
  double area_A = 0.0;

  /// Energy above the austenite state u = 0, whose energy is delta * L.
  double excess(double delta, double L) const { return total - delta * L; }
};

inline nlohmann::json to_json(const EnergyBreakdown& e) {
  return nlohmann::json{{"surface", e.surface}, {"elastic", e.elastic}, {"well", e.well},
                        {"total", e.total},     {"area_B", e.area_B},   {"area_A", e.area_A}};
}

inline EnergyBreakdown breakdown_from_json(const nlohmann::json& j) {
  return {j.at("surface").get<double>(), j.at("elastic").get<double>(), j.at("well").get<double>(),
          j.at("total").get<double>(),   j.at("area_B").get<double>(),  j.at("area_A").get<double>()};
}

/// W_Delta(a, b) = a^2 + delta * chi_(-1,1)(b).
inline double well_potential(double a, double b, double delta) {
  return a * a + (std::abs(b) < 1.0 ? delta : 0.0);
}

/// |u_y| >= 1 counts as B; the allowance absorbs round-off in slopes that are
/// exactly 1 by construction.
inline constexpr double kTieTolerance = 1e-12;

inline bool in_b(double slope) { return std::abs(slope) >= 1.0 - kTieTolerance; }

/// Cubic smoothstep replacement for chi_(-1,1): 1 for |t| <= 1-w, 0 for
/// |t| >= 1. With w = 0 it is the sharp indicator.
inline double smooth_indicator(double t, double w) {
  const double a = std::abs(t);
  if (w <= 0.0) return in_b(t) ? 0.0 : 1.0;
  if (a <= 1.0 - w) return 1.0;
  if (a >= 1.0) return 0.0;
  const double r = (a - (1.0 - w)) / w;
  return 1.0 - r * r * (3.0 - 2.0 * r);
}

inline double smooth_indicator_derivative(double t, double w) {
  const double a = std::abs(t);
  if (w <= 0.0 || a <= 1.0 - w || a >= 1.0) return 0.0;
  const double r = (a - (1.0 - w)) / w;
  const double d = -6.0 * r * (1.0 - r) / w;
  return t < 0.0 ? -d : d;
}

/// y-derivative of the bilinear interpolant at the centre of cell (i, j),
/// for i in [0, nx), j in [0, ny). Stored cell-major like the nodes.
inline std::vector<double> cell_slopes(const Grid& g, std::span<const double> u) {
  std::vector<double> s(static_cast<std::size_t>(g.nx) * g.ny);
  const double c = 1.0 / (2.0 * g.hy);
  for (int i = 0; i < g.nx; ++i) {
    const double* a = u.data() + g.index(i, 0);
    const double* b = u.data() + g.index(i + 1, 0);
    double* out = s.data() + static_cast<std::size_t>(i) * g.ny;
    for (int j = 0; j < g.ny; ++j) {
      const int jp = (j + 1 == g.ny) ? 0 : j + 1;
      out[j] = c * ((a[jp] - a[j]) + (b[jp] - b[j]));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Geometry of B(u)

struct BSetGeometry {
  std::vector<unsigned char> b_mask;   ///< per cell, cell-major
  double area_B = 0.0;
  std::vector<int> pi_columns;         ///< cell columns holding at least one B cell
  double len_Pi = 0.0;
  std::optional<double> tau;           ///< area_B / len_Pi, absent when B is empty
  std::vector<double> column_length;   ///< L1(l_x intersect B) per cell column
};

inline BSetGeometry b_geometry(const ScalarField& u) {
  const Grid& g = u.grid();
  BSetGeometry geo;
  const auto slopes = cell_slopes(g, u.values());
  geo.b_mask.assign(slopes.size(), 0);
  geo.column_length.assign(g.nx, 0.0);
  long total = 0;
  for (int i = 0; i < g.nx; ++i) {
    int count = 0;
    for (int j = 0; j < g.ny; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * g.ny + j;
      if (in_b(slopes[c])) {
        geo.b_mask[c] = 1;
        ++count;
      }
    }
    geo.column_length[i] = count * g.hy;
    if (count > 0) geo.pi_columns.push_back(i);
    total += count;
  }
  geo.area_B = static_cast<double>(total) * g.hx * g.hy;
  geo.len_Pi = g.L * static_cast<double>(geo.pi_columns.size()) / g.nx;
  if (total > 0) geo.tau = geo.area_B / geo.len_Pi;
  return geo;
}

/// Per cell column, the integral of f^2 along the column, averaged over the
/// two bounding node columns (so that sum_i hx * result[i] = integral of f^2).
inline std::vector<double> column_square_integrals(const Grid& g, std::span<const double> f) {
  std::vector<double> node(g.nx + 1, 0.0);
  for (int i = 0; i <= g.nx; ++i) {
    const double* col = f.data() + g.index(i, 0);
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j) s += col[j] * col[j];
    node[i] = s * g.hy;
  }
  std::vector<double> cell(g.nx);
  for (int i = 0; i < g.nx; ++i) cell[i] = 0.5 * (node[i] + node[i + 1]);
  return cell;
}

struct TruncatedBSet {
  double M = 0.0;
  std::vector<int> pi_M_columns;
  std::vector<unsigned char> b_M_mask;
  double area_B_M = 0.0;
  double len_Pi_M = 0.0;
  std::vector<double> column_uyy_integral;  ///< per cell column
};

/// Keeps the columns of Pi(B) whose integral of u_yy^2 along the column is
/// below M.
inline TruncatedBSet truncate_b(const ScalarField& u, double M) {
  const Grid& g = u.grid();
  const BSetGeometry geo = b_geometry(u);
  if (geo.area_B <= 0.0) throw Error(ErrorKind::EmptyB, "B(u) is empty");
  TruncatedBSet t;
  t.M = M;
  t.column_uyy_integral = column_square_integrals(g, d_yy(u).values());
  t.b_M_mask.assign(geo.b_mask.size(), 0);
  for (int i : geo.pi_columns) {
    if (!(t.column_uyy_integral[i] < M)) continue;
    t.pi_M_columns.push_back(i);
    t.area_B_M += geo.column_length[i] * g.hx;
    for (int j = 0; j < g.ny; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * g.ny + j;
      t.b_M_mask[c] = geo.b_mask[c];
    }
  }
  t.len_Pi_M = g.L * static_cast<double>(t.pi_M_columns.size()) / g.nx;
  return t;
}

// ---------------------------------------------------------------------------
// Energies

/// Evaluates the discrete energies of one (grid, params) pair. Holds the
/// stencils and scratch buffers; not safe to share across threads.
class EnergyEvaluator {
 public:
  EnergyEvaluator(const Grid& g, const EnergyParams& p)
      : g_(g),
        p_(p),
        dx_(make_dx_stencil(g)),
        dxx_(make_dxx_stencil(g)),
        dy_(make_dy_stencil(g)),
        dyy_(make_dyy_stencil(g)),
        weights_(column_weights(g)) {
    p_.validate();
    for (auto* b : {&a_, &b_, &c_, &d_}) b->resize(g.size());
  }

  const Grid& grid() const { return g_; }
  const EnergyParams& params() const { return p_; }

  struct Quadratic {
    double surface = 0.0;
    double elastic = 0.0;
  };

  /// Surface and elastic terms; when grad is non-empty their gradient with
  /// respect to the nodal values is accumulated into it.
  Quadratic quadratic(std::span<const double> u, std::span<double> grad) {
    Quadratic q;
    const double eps2 = p_.epsilon * p_.epsilon;
    const bool want = !grad.empty();

    // elastic: u_x^2
    apply_x(g_, dx_, u, a_);
    q.elastic = weighted_square(a_);
    if (want) add_x_transpose(dx_, a_, 2.0, grad);

    // u_yy^2 in every variant
    apply_y(g_, dyy_, u, a_);
    double s = weighted_square(a_);
    if (want) add_y_transpose(dyy_, a_, 2.0 * eps2, grad);

    if (p_.variant >= 2) {
      const double mixed_weight = p_.variant == 3 ? 2.0 : 1.0;
      apply_y(g_, dy_, u, b_);
      apply_x(g_, dx_, b_, a_);
      s += mixed_weight * weighted_square(a_);
      if (want) {
        scale_weighted(a_, 2.0 * eps2 * mixed_weight);
        apply_x_transpose(g_, dx_, a_, c_);
        apply_y_transpose(g_, dy_, c_, d_);
        for (std::size_t k = 0; k < d_.size(); ++k) grad[k] += d_[k];
      }
    }
    if (p_.variant == 3) {
      apply_x(g_, dxx_, u, a_);
      s += weighted_square(a_);
      if (want) add_x_transpose(dxx_, a_, 2.0 * eps2, grad);
    }
    q.surface = eps2 * s;
    return q;
  }

  /// Smoothed total energy with indicator half-width w; fills grad (left
  /// edge zeroed) when it is non-empty.
  double smoothed(std::span<const double> u, double w, std::span<double> grad) {
    const bool want = !grad.empty();
    if (want) std::fill(grad.begin(), grad.end(), 0.0);
    const Quadratic q = quadratic(u, grad);
    const double cell_area = g_.hx * g_.hy;
    const double inv2hy = 1.0 / (2.0 * g_.hy);
    double well_sum = 0.0;
    for (int i = 0; i < g_.nx; ++i) {
      const double* ua = u.data() + g_.index(i, 0);
      const double* ub = u.data() + g_.index(i + 1, 0);
      double* ga = want ? grad.data() + g_.index(i, 0) : nullptr;
      double* gb = want ? grad.data() + g_.index(i + 1, 0) : nullptr;
      for (int j = 0; j < g_.ny; ++j) {
        const int jp = (j + 1 == g_.ny) ? 0 : j + 1;
        const double t = inv2hy * ((ua[jp] - ua[j]) + (ub[jp] - ub[j]));
        well_sum += smooth_indicator(t, w);
        if (want) {
          const double ds = smooth_indicator_derivative(t, w);
          if (ds != 0.0) {
            const double f = p_.delta * cell_area * ds * inv2hy;
            ga[jp] += f;
            ga[j] -= f;
            gb[jp] += f;
            gb[j] -= f;
          }
        }
      }
    }
    if (want) std::fill(grad.begin(), grad.begin() + g_.ny, 0.0);
    return q.surface + q.elastic + p_.delta * cell_area * well_sum;
  }

  EnergyBreakdown sharp(std::span<const double> u) {
    EnergyBreakdown e;
    const Quadratic q = quadratic(u, {});
    e.surface = q.surface;
    e.elastic = q.elastic;
    const auto slopes = cell_slopes(g_, u);
    long count = 0;
    for (double s : slopes) count += in_b(s) ? 1 : 0;
    e.area_B = static_cast<double>(count) * g_.hx * g_.hy;
    e.area_A = g_.L - e.area_B;
    e.well = p_.delta * e.area_A;
    e.total = e.surface + e.elastic + e.well;
    return e;
  }

 private:
  double weighted_square(const std::vector<double>& r) const {
    double total = 0.0;
    for (int i = 0; i <= g_.nx; ++i) {
      const double* col = r.data() + g_.index(i, 0);
      double s = 0.0;
      for (int j = 0; j < g_.ny; ++j) s += col[j] * col[j];
      total += weights_[i] * s;
    }
    return total;
  }

  void scale_weighted(std::vector<double>& r, double factor) const {
    for (int i = 0; i <= g_.nx; ++i) {
      double* col = r.data() + g_.index(i, 0);
      const double f = factor * weights_[i];
      for (int j = 0; j < g_.ny; ++j) col[j] *= f;
    }
  }

  void add_x_transpose(const XStencil& s, std::vector<double>& r, double factor, std::span<double> grad) {
    scale_weighted(r, factor);
    apply_x_transpose(g_, s, r, c_);
    for (std::size_t k = 0; k < c_.size(); ++k) grad[k] += c_[k];
  }

  void add_y_transpose(const YStencil& s, std::vector<double>& r, double factor, std::span<double> grad) {
    scale_weighted(r, factor);
    apply_y_transpose(g_, s, r, c_);
    for (std::size_t k = 0; k < c_.size(); ++k) grad[k] += c_[k];
  }

  Grid g_;
  EnergyParams p_;
  XStencil dx_, dxx_;
  YStencil dy_, dyy_;
  std::vector<double> weights_;
  std::vector<double> a_, b_, c_, d_;
};

inline void require_admissible(const ScalarField& u) {
  const auto rep = validate_admissible(u);
  if (!rep.ok) {
    std::string msg;
    for (const auto& v : rep.violations) msg += (msg.empty() ? "" : "; ") + v;
    throw Error(ErrorKind::NotAdmissible, msg);
  }
}

/// E_i(u) with the sharp well term, broken into its parts.
inline EnergyBreakdown energy(const ScalarField& u, const EnergyParams& p) {
  require_admissible(u);
  EnergyEvaluator ev(u.grid(), p);
  return ev.sharp(u.values());
}

/// E_i(u) with the well indicator replaced by the smoothstep of half-width
/// p.smooth_w (p.smooth_w = 0 reproduces the sharp total).
inline double energy_smoothed(const ScalarField& u, const EnergyParams& p) {
  require_admissible(u);
  EnergyEvaluator ev(u.grid(), p);
  return ev.smoothed(u.values(), p.smooth_w, {});
}

inline ScalarField energy_gradient(const ScalarField& u, const EnergyParams& p) {
  if (!(p.smooth_w > 0.0)) throw Error(ErrorKind::ZeroSmoothing, "gradient needs smooth_w > 0");
  require_admissible(u);
  EnergyEvaluator ev(u.grid(), p);
  std::vector<double> grad(u.grid().size());
  ev.smoothed(u.values(), p.smooth_w, grad);
  return ScalarField(u.grid(), std::move(grad), u.claimed_class());
}

}  // namespace wellscape
