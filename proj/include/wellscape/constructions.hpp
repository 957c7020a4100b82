#pragma once

// Analytic competitors: the branched seed v^eps, the nucleation bump, and the
// Newtonian-potential sequence v^(j) together with its radial solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "json.hpp"
#include "wellscape/error.hpp"
#include "wellscape/field.hpp"

namespace wellscape {

// ---------------------------------------------------------------------------
// Branched seed

struct BranchedSpec {
  double epsilon = 0.01;
  double L = 1.0;
  double c = 1.0;
  int N = 1;  ///< periods of the sawtooth in y, N = 1/(4h)
  double h = 0.25;
  double l = 0.5;
  double k = 0.25;
};

/// h = c (eps L)^1/2 with 1/(4h) = N an integer and |c - 1| minimal.
inline BranchedSpec make_branched_spec(double epsilon, double L) {
  if (!(epsilon > 0.0) || !(L > 0.0)) throw Error(ErrorKind::ConfigError, "branched seed needs eps, L > 0");
  const double root = std::sqrt(epsilon * L);
  const double ideal = 1.0 / (4.0 * root);
  BranchedSpec s;
  s.epsilon = epsilon;
  s.L = L;
  int best = 1;
  double best_gap = 1e300;
  for (int n : {static_cast<int>(std::floor(ideal)), static_cast<int>(std::ceil(ideal))}) {
    if (n < 1) continue;
    const double gap = std::abs(1.0 / (4.0 * n * root) - 1.0);
    if (gap < best_gap) {
      best_gap = gap;
      best = n;
    }
  }
  s.N = best;
  s.h = 1.0 / (4.0 * best);
  s.c = s.h / root;
  s.l = L / 2.0;
  s.k = s.h / (2.0 * s.l);
  return s;
}

namespace detail {

/// One period of w on [0, 4h], symmetric about y = 2h. Caps are parabolic;
/// the upper cap is the C1 continuation of the linear piece.
inline double branched_w(double x, double y, double h, double k) {
  const double period = 4.0 * h;
  double t = std::fmod(y, period);
  if (t < 0) t += period;
  if (t > 2.0 * h) t = period - t;
  const double H = h - k * x;
  if (t <= H) return t * t / (2.0 * H);
  if (t <= 2.0 * h - H) return t - H / 2.0;
  return 2.0 * h - H - (t - 2.0 * h) * (t - 2.0 * h) / (2.0 * H);
}

}  // namespace detail

inline ScalarField branched_seed(const BranchedSpec& s, const Grid& g) {
  if (std::abs(g.L - s.L) > 1e-12 * s.L) throw Error(ErrorKind::ConfigError, "grid width differs from spec L");
  if (g.ny * s.h < 8.0) {
    throw Error(ErrorKind::ResolutionTooCoarse, "ny*h = " + std::to_string(g.ny * s.h) + " < 8");
  }
  return ScalarField::sample(
      g,
      [&](double x, double y) {
        if (x <= s.l) return (x / s.l) * detail::branched_w(0.0, y, s.h, s.k);
        return detail::branched_w(std::min(x - s.l, s.l), y, s.h, s.k);
      },
      AdmissibleClass::A3);
}

/// Area of B(v^eps) from the column measure: each column x - l of the w part
/// meets B in a fraction k (x - l)/h, so the total is k l^2/(2h) = l/4.
inline double branched_area_b(const BranchedSpec& s) { return s.k * s.l * s.l / (2.0 * s.h); }

// ---------------------------------------------------------------------------
// Nucleation bump

struct BumpSpec {
  double a = 0.1;
  double delta_x = 0.1;
  double lambda = 4.0;
  double L = 1.0;

  void validate() const {
    if (!(a > 0.0) || !(4.0 * a <= 1.0)) throw Error(ErrorKind::ConfigError, "bump needs 0 < 4a <= 1");
    if (!(delta_x > 0.0) || !(delta_x <= L * (1.0 + 1e-12))) {
      throw Error(ErrorKind::ConfigError, "bump needs 0 < delta <= L");
    }
    if (!(lambda > 1.0)) throw Error(ErrorKind::ConfigError, "bump needs lambda > 1");
  }
};

inline double bump_area_b(const BumpSpec& s) {
  const double r = 1.0 - 1.0 / std::sqrt(s.lambda);
  return 4.0 * s.a * s.delta_x * r * r;
}

/// f(x) y^2/(2a) capped at y = a, reflected about y = 2a, zero outside
/// [L - delta, L] x [0, 4a]. f rises from 0 at the inner edge x = L - delta
/// to lambda at x = L.
inline ScalarField nucleation_bump(const BumpSpec& s, const Grid& g) {
  s.validate();
  if (std::abs(g.L - s.L) > 1e-12 * s.L) throw Error(ErrorKind::ConfigError, "grid width differs from spec L");
  if (s.delta_x / g.hx < 8.0 - 1e-9 || s.a / g.hy < 8.0 - 1e-9) {
    throw Error(ErrorKind::ResolutionTooCoarse, "bump needs >= 8 cells across a and delta");
  }
  const double x0 = s.L - s.delta_x;
  return ScalarField::sample(
      g,
      [&](double x, double y) {
        if (x <= x0 || y >= 4.0 * s.a) return 0.0;
        const double r = (x - x0) / s.delta_x;
        const double f = s.lambda * r * r;
        const double t = y <= 2.0 * s.a ? y : 4.0 * s.a - y;
        if (t <= s.a) return f * t * t / (2.0 * s.a);
        return s.a * f - f * (2.0 * s.a - t) * (2.0 * s.a - t) / (2.0 * s.a);
      },
      AdmissibleClass::A1);
}

// ---------------------------------------------------------------------------
// Newtonian-potential sequence

struct PotentialSpec {
  int j = 1;
  double L = 1.0;
  int nR = 16384;

  double k() const { return -6.0 * std::sqrt(L * L + 1.0); }
  double A() const { return k() / j; }
  double alpha() const { return 1.0 / j - 2.0; }

  void validate() const {
    if (j < 1) throw Error(ErrorKind::ConfigError, "j must be >= 1");
    if (!(L > 0.0)) throw Error(ErrorKind::ConfigError, "L must be > 0");
    if (nR < 16) throw Error(ErrorKind::ConfigError, "nR must be >= 16");
  }
};

/// Quintic smoothstep cutoff: 1 on [0, 1], 0 from 3/2 on, C2 in between.
inline double quintic_cutoff(double R) {
  if (R <= 1.0) return 1.0;
  if (R >= 1.5) return 0.0;
  const double t = (R - 1.0) / 0.5;
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

inline double quintic_cutoff_derivative(double R) {
  if (R <= 1.0 || R >= 1.5) return 0.0;
  const double t = (R - 1.0) / 0.5;
  return -2.0 * 30.0 * t * t * (1.0 - t) * (1.0 - t);
}

inline double quintic_cutoff_second(double R) {
  if (R <= 1.0 || R >= 1.5) return 0.0;
  const double t = (R - 1.0) / 0.5;
  return -4.0 * 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
}

/// Radial factor g_j with f^(j)(R, theta) = g_j(R) sin(theta); with `cutoff`
/// it carries the factor eta(R), otherwise it is the bare three-branch profile.
inline std::function<double(double)> radial_profile(const PotentialSpec& s, bool cutoff = true) {
  const double A = s.A(), alpha = s.alpha(), knot = std::ldexp(1.0, -s.j);
  const double scale = std::ldexp(1.0, s.j);
  return [=](double R) {
    if (R <= 0.0 || R > 2.0) return 0.0;
    double g;
    if (R <= knot) g = scale * A;
    else if (R <= 1.0) g = A * std::pow(R, alpha + 1.0);
    else g = A;
    return cutoff ? g * quintic_cutoff(R) : g;
  };
}

/// ||f||_2^2 = pi * int g^2 R dR, composite trapezoid at nR intervals on [0, 2]
/// with one-sided values at the knots.
inline double profile_norm_squared(const std::function<double(double)>& g, int nR) {
  const double h = 2.0 / nR;
  double s = 0.0;
  for (int i = 0; i < nR; ++i) {
    const double a = i * h, b = (i + 1) * h;
    const double ga = g(std::nextafter(a, 3.0)), gb = g(std::nextafter(b, 0.0));
    s += 0.5 * h * (ga * ga * a + gb * gb * b);
  }
  return std::numbers::pi * s;
}

/// Z(R) with z = Z(R) sin(theta) the Newtonian potential of g(R) sin(theta).
class RadialSolution {
 public:
  RadialSolution(std::vector<double> Z, std::vector<double> dZ, double I1_total)
      : Z_(std::move(Z)), dZ_(std::move(dZ)), h_(2.0 / (Z_.size() - 1)), I1_(I1_total) {}

  int intervals() const { return static_cast<int>(Z_.size()) - 1; }

  double value(double R) const {
    if (R >= 2.0) return -I1_ / (2.0 * R);
    return hermite(R, false);
  }

  double derivative(double R) const {
    if (R >= 2.0) return I1_ / (2.0 * R * R);
    return hermite(R, true);
  }

  /// z_y at the origin, equal to Z'(0) = -(1/2) int g.
  double slope_at_origin() const { return dZ_.front(); }

  /// Cartesian z and its gradient.
  std::array<double, 3> cartesian(double x, double y) const {
    const double R = std::hypot(x, y);
    if (R == 0.0) return {0.0, 0.0, slope_at_origin()};
    const double Z = value(R), dZ = derivative(R);
    const double c = x / R, s = y / R;
    return {Z * s, (dZ - Z / R) * s * c, dZ * s * s + (Z / R) * c * c};
  }

 private:
  double hermite(double R, bool derivative) const {
    const int n = intervals();
    int i = std::clamp(static_cast<int>(R / h_), 0, n - 1);
    const double t = (R - i * h_) / h_;
    const double z0 = Z_[i], z1 = Z_[i + 1], d0 = dZ_[i] * h_, d1 = dZ_[i + 1] * h_;
    if (!derivative) {
      const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
      const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
      return h00 * z0 + h10 * d0 + h01 * z1 + h11 * d1;
    }
    const double g00 = 6 * t * t - 6 * t, g10 = 3 * t * t - 4 * t + 1;
    const double g01 = -6 * t * t + 6 * t, g11 = 3 * t * t - 2 * t;
    return (g00 * z0 + g10 * d0 + g01 * z1 + g11 * d1) / h_;
  }

  std::vector<double> Z_, dZ_;
  double h_;
  double I1_;
};

/// Variation of parameters for Z'' + Z'/R - Z/R^2 = g:
///   Z(R) = -(1/(2R)) int_0^R s^2 g - (R/2) int_R^2 g,
/// with both integrals by composite trapezoid on nR intervals of [0, 2].
inline RadialSolution radial_poisson(const std::function<double(double)>& g, int nR) {
  if (nR < 16) throw Error(ErrorKind::ConfigError, "nR must be >= 16");
  for (int i = 1; i <= 64; ++i) {
    const double R = 2.0 + 2.0 * i / 64.0;
    if (g(R) != 0.0) throw Error(ErrorKind::UnsupportedProfile, "profile nonzero beyond R = 2");
  }
  const double h = 2.0 / nR;
  std::vector<double> I1(nR + 1, 0.0), I2(nR + 1, 0.0);
  std::vector<double> gl(nR), gr(nR);
  for (int i = 0; i < nR; ++i) {
    gl[i] = g(std::nextafter(i * h, 3.0));
    gr[i] = g(std::nextafter((i + 1) * h, 0.0));
  }
  for (int i = 0; i < nR; ++i) {
    const double a = i * h, b = (i + 1) * h;
    I1[i + 1] = I1[i] + 0.5 * h * (a * a * gl[i] + b * b * gr[i]);
  }
  for (int i = nR - 1; i >= 0; --i) I2[i] = I2[i + 1] + 0.5 * h * (gl[i] + gr[i]);
  std::vector<double> Z(nR + 1), dZ(nR + 1);
  Z[0] = 0.0;
  dZ[0] = -0.5 * I2[0];
  for (int i = 1; i <= nR; ++i) {
    const double R = i * h;
    Z[i] = -I1[i] / (2.0 * R) - 0.5 * R * I2[i];
    dZ[i] = I1[i] / (2.0 * R * R) - 0.5 * I2[i];
  }
  return RadialSolution(std::move(Z), std::move(dZ), I1[nR]);
}

struct ConvolutionValue {
  double z = 0.0;
  double zx = 0.0;
  double zy = 0.0;
};

/// Direct quadrature of (1/2pi) ln|p - q| f(q) over the disk of the given
/// radius, and of its gradient kernel, on a polar midpoint grid. The value
/// f(p) is subtracted under the integral and its disk integral added back in
/// closed form, which removes the singular self-cell from the sum.
inline std::vector<ConvolutionValue> convolution_oracle(const std::function<double(double, double)>& f,
                                                        double radius, int nr, int nth,
                                                        const std::vector<std::array<double, 2>>& probes) {
  const double pi = std::numbers::pi;
  const double dr = radius / nr, dt = 2.0 * pi / nth;
  struct Node {
    double x, y, w, f;
  };
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(nr) * nth);
  for (int a = 0; a < nr; ++a) {
    const double r = (a + 0.5) * dr;
    for (int b = 0; b < nth; ++b) {
      const double t = (b + 0.5) * dt;
      const double x = r * std::cos(t), y = r * std::sin(t);
      nodes.push_back({x, y, r * dr * dt, f(x, y)});
    }
  }
  std::vector<ConvolutionValue> out;
  out.reserve(probes.size());
  for (const auto& p : probes) {
    const double px = p[0], py = p[1];
    const double p2 = px * px + py * py;
    const double fp = p2 < radius * radius ? f(px, py) : 0.0;
    double z = 0.0, zx = 0.0, zy = 0.0;
    for (const Node& n : nodes) {
      const double dx = px - n.x, dy = py - n.y;
      const double d2 = dx * dx + dy * dy;
      if (d2 == 0.0) continue;
      const double df = n.f - fp;
      z += 0.5 * std::log(d2) * df * n.w;
      zx += dx / d2 * df * n.w;
      zy += dy / d2 * df * n.w;
    }
    if (fp != 0.0) {
      // disk integrals of ln|p - q| and its gradient for |p| < radius
      z += fp * (pi * radius * radius * std::log(radius) - 0.5 * pi * (radius * radius - p2));
      zx += fp * pi * px;
      zy += fp * pi * py;
    }
    out.push_back({z / (2.0 * pi), zx / (2.0 * pi), zy / (2.0 * pi)});
  }
  return out;
}

/// Affine placement of the disk into Omega: T(x) = 2(x - P)/rho with
/// P = (L/2, 1/2) and rho = min(L, 1)/2, so supp psi = B_{3/2} lands strictly
/// inside Omega.
struct PotentialPlacement {
  double Px, Py, rho;
  double lip() const { return 2.0 / rho; }
};

inline PotentialPlacement potential_placement(double L) { return {L / 2.0, 0.5, std::min(L, 1.0) / 2.0}; }

/// v^(j)(x) = psi(R) Z(R) sin(theta) evaluated at T(x), with Z solved from the
/// eta-cut profile.
inline ScalarField potential_seed(const PotentialSpec& s, const Grid& g) {
  s.validate();
  if (std::abs(g.L - s.L) > 1e-12 * s.L) throw Error(ErrorKind::ConfigError, "grid width differs from spec L");
  const RadialSolution sol = radial_poisson(radial_profile(s, true), s.nR);
  const PotentialPlacement T = potential_placement(s.L);
  auto field = ScalarField::sample(
      g,
      [&](double x, double y) {
        const double X = 2.0 * (x - T.Px) / T.rho, Y = 2.0 * (y - T.Py) / T.rho;
        const double R = std::hypot(X, Y);
        if (R >= 1.5 || R == 0.0) return 0.0;
        return quintic_cutoff(R) * sol.value(R) * (Y / R);
      },
      AdmissibleClass::A3);
  std::vector<double> v = field.data();
  for (int j = 0; j < g.ny; ++j) v[g.index(0, j)] = 0.0;
  return ScalarField(g, std::move(v), AdmissibleClass::A3);
}

// ---------------------------------------------------------------------------
// JSON records

inline nlohmann::json to_json(const BranchedSpec& s) {
  return {{"epsilon", s.epsilon}, {"L", s.L}, {"c", s.c}, {"N", s.N}, {"h", s.h}, {"l", s.l}, {"k", s.k}};
}

inline nlohmann::json to_json(const BumpSpec& s) {
  return {{"a", s.a}, {"delta_x", s.delta_x}, {"lambda", s.lambda}, {"L", s.L}};
}

inline nlohmann::json to_json(const PotentialSpec& s) {
  return {{"j", s.j}, {"L", s.L}, {"nR", s.nR}, {"k", s.k()}, {"A_j", s.A()}, {"alpha_j", s.alpha()}};
}

}  // namespace wellscape
