#pragma once

// Seeded random admissible fields: band-limited trigonometric sums times x/L.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "wellscape/field.hpp"

namespace wellscape {

/// mt19937_64 with a fixed bits-to-double map, so a seed gives the same
/// numbers with every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// sum over 0 <= m, n <= max_mode of a_mn cos(pi n x / L) (cos or sin)(2 pi m y),
/// with coefficients decaying like 1/(1+m+n)^2, multiplied by x/L. The
/// result vanishes on x = 0 and has unit maximum modulus (before scaling).
inline ScalarField random_smooth_field(const Grid& g, Rng& rng, int max_mode = 8, double amplitude = 1.0,
                                       AdmissibleClass cls = AdmissibleClass::A3) {
  struct Term {
    int m, n;
    double a, b;
  };
  std::vector<Term> terms;
  for (int m = 0; m <= max_mode; ++m) {
    for (int n = 0; n <= max_mode; ++n) {
      const double decay = 1.0 / ((1.0 + m + n) * (1.0 + m + n));
      terms.push_back({m, n, decay * rng.uniform(-1.0, 1.0), decay * rng.uniform(-1.0, 1.0)});
    }
  }
  const double pi = std::numbers::pi;
  std::vector<double> cy((max_mode + 1) * static_cast<std::size_t>(g.ny));
  std::vector<double> sy(cy.size());
  for (int m = 0; m <= max_mode; ++m) {
    for (int j = 0; j < g.ny; ++j) {
      cy[m * g.ny + j] = std::cos(2.0 * pi * m * g.y(j));
      sy[m * g.ny + j] = std::sin(2.0 * pi * m * g.y(j));
    }
  }
  std::vector<double> v(g.size(), 0.0);
  for (int i = 0; i <= g.nx; ++i) {
    const double x = g.x(i);
    for (const Term& t : terms) {
      const double cx = std::cos(pi * t.n * x / g.L) * (x / g.L);
      double* col = v.data() + g.index(i, 0);
      for (int j = 0; j < g.ny; ++j) col[j] += cx * (t.a * cy[t.m * g.ny + j] + t.b * sy[t.m * g.ny + j]);
    }
  }
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x));
  const double s = peak > 0.0 ? amplitude / peak : 0.0;
  for (double& x : v) x *= s;
  for (int j = 0; j < g.ny; ++j) v[g.index(0, j)] = 0.0;
  return ScalarField(g, std::move(v), cls);
}

}  // namespace wellscape
