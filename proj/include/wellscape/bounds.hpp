#pragma once

// Bound calculators and numerical certifiers for the inequalities behind the
// critical well depth and the local minimality of u = 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wellscape/energy.hpp"
#include "wellscape/error.hpp"
#include "wellscape/field.hpp"
#include "wellscape/io.hpp"

namespace wellscape {

struct BoundReport {
  std::string check;
  std::string context;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  ///< lhs - rhs
  bool holds = false;
};

inline BoundReport make_report(std::string check, std::string context, double lhs, double rhs, double tol_factor) {
  return {std::move(check), std::move(context), lhs, rhs, lhs - rhs, lhs >= rhs * tol_factor};
}

inline std::string reports_to_csv(const std::vector<BoundReport>& reports) {
  CsvTable t({"check", "context", "lhs", "rhs", "slack", "holds"});
  for (const auto& r : reports) {
    t.add_row({r.check, r.context, format_double(r.lhs), format_double(r.rhs), format_double(r.slack),
               r.holds ? "true" : "false"});
  }
  return t.str();
}

/// Relative tolerance absorbed by checks of proven inequalities.
inline double grid_tolerance(const Grid& g) { return 10.0 * std::max(g.hx, g.hy); }

// ---------------------------------------------------------------------------
// Calibration

/// Named constants for the inequalities whose constants the theory leaves
/// open. Values come from calibration/calibration.json (see README); the
/// defaults repeat that file's values to four digits.
struct Calibration {
  std::map<std::string, double> constants = defaults();

  static std::map<std::string, double> defaults() {
    return {
        {"critical_delta_lower", 1.0},   // con2 lemma: Delta_1 >= eps/L on periodic fields
        {"critical_delta_upper", 18.64},  // branched seed: excess/area_B
        {"theorem2_r", 196.9},
        {"theorem2_s", 2.452e5},
        {"killerinterp", 0.5},
        {"interp", 2.0},
        {"poincare", std::numbers::pi * std::numbers::pi / 4.0},
        {"pq_f", 1.0},
        {"pq_g", 1.0},
        {"pq_upper", 1.0},
    };
  }

  double at(const std::string& name) const {
    auto it = constants.find(name);
    if (it == constants.end()) throw Error(ErrorKind::ConfigError, "no calibration constant '" + name + "'");
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : constants) j[k] = v;
    return j;
  }

  static Calibration from_json(const nlohmann::json& j) {
    Calibration c;
    const auto& src = j.contains("constants") ? j.at("constants") : j;
    for (auto it = src.begin(); it != src.end(); ++it) {
      if (it.value().is_number()) c.constants[it.key()] = it.value().get<double>();
    }
    return c;
  }

  static Calibration load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open calibration file " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, "bad calibration file " + path.string() + ": " + e.what());
    }
  }

  /// WELLSCAPE_CALIBRATION if set, else `fallback` if it exists, else defaults.
  static Calibration resolve(const std::filesystem::path& fallback = "calibration/calibration.json") {
    if (const char* env = std::getenv("WELLSCAPE_CALIBRATION"); env && *env) return load(env);
    if (std::filesystem::exists(fallback)) return load(fallback);
    return Calibration{};
  }
};

// ---------------------------------------------------------------------------
// One-dimensional obstacle problem

struct ObstacleSolution {
  double value = 0.0;
  double y1 = 0.0, y2 = 1.0;
  /// Minimizer f(y) = (y - (y1+y2)/2)^2 / (y1 - y2).
  double profile(double y) const {
    const double m = 0.5 * (y1 + y2);
    return (y - m) * (y - m) / (y1 - y2);
  }
  double profile_slope(double y) const { return 2.0 * (y - 0.5 * (y1 + y2)) / (y1 - y2); }
};

inline ObstacleSolution obstacle_min_1d(double y1, double y2) {
  if (!(y2 > y1)) throw Error(ErrorKind::DegenerateInterval, "need y2 > y1");
  return {4.0 / (y2 - y1), y1, y2};
}

struct QpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  std::vector<int> active;
};

/// Primal active-set method for min 1/2 x'Qx + c'x subject to A x >= b,
/// started from a feasible x0. Equality subproblems are solved through the
/// KKT system with a complete orthogonal decomposition, so a singular Q on
/// the working set's null space is tolerated.
inline QpResult solve_qp_active_set(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                                    const Eigen::VectorXd& b, Eigen::VectorXd x0, int max_iter = 500) {
  const int n = static_cast<int>(Q.rows()), m = static_cast<int>(A.rows());
  std::vector<int> W;
  for (int i = 0; i < m; ++i) {
    if (std::abs(A.row(i).dot(x0) - b(i)) <= 1e-12 * (1 + std::abs(b(i)))) W.push_back(i);
  }
  Eigen::VectorXd x = std::move(x0);
  QpResult res;
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    const int w = static_cast<int>(W.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + w, n + w);
    K.topLeftCorner(n, n) = Q;
    for (int k = 0; k < w; ++k) {
      K.block(n + k, 0, 1, n) = A.row(W[k]);
      K.block(0, n + k, n, 1) = -A.row(W[k]).transpose();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + w);
    rhs.head(n) = -(Q * x + c);
    const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
    const Eigen::VectorXd p = sol.head(n);
    if (p.norm() <= 1e-12 * (1 + x.norm())) {
      // multipliers of the working set: Q x + c = A_W' lambda
      int worst = -1;
      double most_negative = -1e-12;
      for (int k = 0; k < w; ++k) {
        if (sol(n + k) < most_negative) {
          most_negative = sol(n + k);
          worst = k;
        }
      }
      if (worst < 0) break;
      W.erase(W.begin() + worst);
      continue;
    }
    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < m; ++i) {
      if (std::find(W.begin(), W.end(), i) != W.end()) continue;
      const double ap = A.row(i).dot(p);
      if (ap < 0) {
        const double t = (b(i) - A.row(i).dot(x)) / ap;
        if (t < alpha) {
          alpha = t;
          blocking = i;
        }
      }
    }
    x += alpha * p;
    if (blocking >= 0) W.push_back(blocking);
  }
  res.objective = 0.5 * x.dot(Q * x) + c.dot(x);
  res.x = std::move(x);
  res.active = W;
  return res;
}

/// Discrete obstacle problem on n nodes of [y1, y2]: minimize the sum of
/// squared second differences (times h) subject to the end slopes
/// f'(y1) >= 1 and f'(y2) <= -1. Unknowns are the n-1 interval slopes.
inline QpResult obstacle_qp(double y1, double y2, int n) {
  if (!(y2 > y1)) throw Error(ErrorKind::DegenerateInterval, "need y2 > y1");
  if (n < 4) throw Error(ErrorKind::ConfigError, "need at least 4 nodes");
  const int m = n - 1;
  const double h = (y2 - y1) / (n - 1);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    // (d_k - d_{k-1})^2 / h, doubled for the 1/2 x'Qx convention
    Q(k, k) += 2.0 / h;
    Q(k - 1, k - 1) += 2.0 / h;
    Q(k, k - 1) -= 2.0 / h;
    Q(k - 1, k) -= 2.0 / h;
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, m);
  A(0, 0) = 1.0;       // d_0 >= 1
  A(1, m - 1) = -1.0;  // -d_{m-1} >= 1
  Eigen::VectorXd b = Eigen::VectorXd::Ones(2);
  Eigen::VectorXd x0(m);
  for (int k = 0; k < m; ++k) x0(k) = 1.0 - 2.0 * k / (m - 1) + (k == 0 || k == m - 1 ? 0.0 : 0.5);
  return solve_qp_active_set(Q, Eigen::VectorXd::Zero(m), A, b, x0);
}

// ---------------------------------------------------------------------------
// Lemma-type checks on fields

/// int u_yy^2 / area_B >= 4/(tau(1 - tau)).
inline BoundReport lemma1_check(const ScalarField& u, const std::string& context = "") {
  const auto geo = b_geometry(u);
  if (!geo.tau) throw Error(ErrorKind::EmptyB, "B(u) is empty");
  const double tau = *geo.tau;
  if (tau >= 1.0 - 1e-12) throw Error(ErrorKind::TauOne, "every occupied column lies entirely in B");
  const double lhs = integrate_squared(u.grid(), d_yy(u).values()) / geo.area_B;
  const double rhs = 4.0 / (tau * (1.0 - tau));
  return make_report("lemma1", context, lhs, rhs, 1.0 - grid_tolerance(u.grid()));
}

struct InterpEstimate {
  double constant = 0.0;  ///< infimum over the family
  int used = 0;
  int skipped = 0;
};

/// Empirical lower estimate of C in
///   sigma^-2 int f_yy^2 + sigma^2 int f^2 >= C int f_y^2
/// over sampled periodic profiles on [0, 1). With an empty sigma list the
/// minimum over sigma is taken in closed form, 2 sqrt(ab).
inline InterpEstimate estimate_interp_constant(const std::vector<std::vector<double>>& profiles,
                                               const std::vector<double>& sigmas = {}) {
  InterpEstimate est;
  est.constant = std::numeric_limits<double>::infinity();
  for (const auto& f : profiles) {
    const int n = static_cast<int>(f.size());
    if (n < 3) throw Error(ErrorKind::ConfigError, "profile needs >= 3 samples");
    const double h = 1.0 / n;
    double a = 0, b = 0, c = 0;
    for (int j = 0; j < n; ++j) {
      const double fm = f[(j + n - 1) % n], f0 = f[j], fp = f[(j + 1) % n];
      const double fy = (fp - fm) / (2 * h), fyy = (fp - 2 * f0 + fm) / (h * h);
      a += fyy * fyy * h;
      b += f0 * f0 * h;
      c += fy * fy * h;
    }
    if (!(c > 1e-300)) {
      ++est.skipped;
      continue;
    }
    double best;
    if (sigmas.empty()) {
      best = 2.0 * std::sqrt(a * b) / c;
    } else {
      best = std::numeric_limits<double>::infinity();
      for (double s : sigmas) best = std::min(best, (a / (s * s) + s * s * b) / c);
    }
    est.constant = std::min(est.constant, best);
    ++est.used;
  }
  return est;
}

/// int u_x^2 >= (C_p / L^2) int u^2 with C_p = pi^2/4.
inline BoundReport poincare_check(const ScalarField& u, double Cp = std::numbers::pi * std::numbers::pi / 4.0,
                                  const std::string& context = "") {
  const Grid& g = u.grid();
  const double lhs = integrate_squared(g, d_x(u).values());
  const double rhs = Cp / (g.L * g.L) * integrate_squared(g, u.values());
  return make_report("poincare", context, lhs, rhs, 1.0 - grid_tolerance(g));
}

/// Band for tau implied by int u_yy^2 <= (Delta/eps^2) area_B.
inline std::pair<double, double> proportional_band(double epsilon, double delta) {
  const double floor = 16.0 * epsilon * epsilon;
  if (delta < floor * (1.0 - 1e-12)) throw Error(ErrorKind::BandEmpty, "delta < 16 eps^2");
  const double lo = std::min(4.0 * epsilon * epsilon / delta, 0.5);
  return {lo, 1.0 - lo};
}

/// ||u|| ||u_x|| >= (C/M) (area(B_M)/len(Pi_M))^2.
inline BoundReport killerinterp_check(const ScalarField& u, double M, double C = 0.5,
                                      const std::string& context = "") {
  const TruncatedBSet t = truncate_b(u, M);
  if (t.pi_M_columns.empty()) throw Error(ErrorKind::EmptyPiM, "no column passes the truncation");
  const Grid& g = u.grid();
  const double lhs = std::sqrt(integrate_squared(g, u.values()) * integrate_squared(g, d_x(u).values()));
  const double ratio = t.area_B_M / t.len_Pi_M;
  const double rhs = C / M * ratio * ratio;
  return make_report("killerinterp", context, lhs, rhs, 1.0 - grid_tolerance(g));
}

struct WopperReport {
  BoundReport report;
  int columns_checked = 0;
  int columns_not_applicable = 0;
  double worst_con2 = 0.0;
};

/// Per-column boundary term int (u_y u_x)_y dy and, on columns where it
/// vanishes, int eps^2 u_yy^2 + u_x^2 >= eps * max L1(l_x cap B).
inline WopperReport wopper_check(const ScalarField& u, double epsilon, const std::string& context = "") {
  const Grid& g = u.grid();
  const auto uy = d_y(u), ux = d_x(u);
  const auto q = d_y(multiply(uy, ux));
  double uy_max = 0, ux_max = 0;
  for (double v : uy.values()) uy_max = std::max(uy_max, std::abs(v));
  for (double v : ux.values()) ux_max = std::max(ux_max, std::abs(v));
  const double tol = 1e-8 * (uy_max * ux_max + 1.0);
  std::vector<double> con2(g.nx + 1, 0.0);
  for (int i = 0; i <= g.nx; ++i) {
    double s = 0;
    for (int j = 0; j < g.ny; ++j) s += q(i, j);
    con2[i] = s * g.hy;
  }
  const auto geo = b_geometry(u);
  WopperReport w;
  double best = 0.0;
  for (int i = 0; i < g.nx; ++i) {
    const double c = std::max(std::abs(con2[i]), std::abs(con2[i + 1]));
    w.worst_con2 = std::max(w.worst_con2, c);
    if (geo.column_length[i] <= 0.0) continue;
    if (c > tol) {
      ++w.columns_not_applicable;
      continue;
    }
    ++w.columns_checked;
    best = std::max(best, geo.column_length[i]);
  }
  const double lhs = epsilon * epsilon * integrate_squared(g, d_yy(u).values()) + integrate_squared(g, ux.values());
  w.report = make_report("wopper", context, lhs, epsilon * best, 1.0 - grid_tolerance(g));
  return w;
}

// ---------------------------------------------------------------------------
// Closed-form bounds

struct Theorem2Bounds {
  double r = 0.0;  ///< ||v||_2 below r forces E_1(v) > E_1(0)
  double s = 0.0;  ///< area_B below s forces E_1(v) > E_1(0)
};

inline Theorem2Bounds theorem2_bounds(double epsilon, double delta, double L, double C_r, double C_s) {
  return {C_r * std::pow(epsilon, 3.5) / (delta * delta), C_s * std::pow(epsilon, 6) / std::pow(delta, 4) / L};
}

inline Theorem2Bounds theorem2_bounds(double epsilon, double delta, double L, double C = 1.0) {
  return theorem2_bounds(epsilon, delta, L, C, C);
}

struct PqConstants {
  double f = 1.0, g = 1.0, upper = 1.0;
};

struct PqRegion {
  double f_const = 0.0;      ///< pq >= f
  double g_slope = 0.0;      ///< p >= g q
  double upper_slope = 0.0;  ///< p <= upper q
  double p_min = 0.0;
  double q_min = 0.0;
  bool nonempty = false;
};

inline PqRegion pq_region(double epsilon, double delta, double L, const PqConstants& c = {}) {
  PqRegion r;
  r.f_const = c.f * std::pow(epsilon, 6) * std::pow(delta, -3.5);
  r.g_slope = c.g * epsilon / std::sqrt(delta);
  r.upper_slope = c.upper * L * std::sqrt(delta);
  r.p_min = std::sqrt(r.f_const * r.g_slope);
  r.q_min = std::sqrt(r.f_const / r.upper_slope);
  r.nonempty = r.g_slope < r.upper_slope;
  return r;
}

inline std::pair<double, double> critical_delta_bounds(double epsilon, double L, const Calibration& cal) {
  const double lower = std::max(16.0 * epsilon * epsilon, cal.at("critical_delta_lower") * epsilon / L);
  const double upper = cal.at("critical_delta_upper") * epsilon / L;
  return {lower, upper};
}

}  // namespace wellscape
