#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "wellscape/energy.hpp"
#include "wellscape/preconditioner.hpp"
#include "wellscape/random.hpp"

using namespace wellscape;
using std::numbers::pi;

namespace {

EnergyParams params(double eps, double delta, int variant, double w = 0.0) {
  EnergyParams p;
  p.epsilon = eps;
  p.delta = delta;
  p.variant = variant;
  p.smooth_w = w;
  return p;
}

// Adaptive Simpson on [a, b], used as an independent 1D quadrature oracle.
template <typename F>
double simpson(F&& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double directional_fd(EnergyEvaluator& ev, const std::vector<double>& u, const std::vector<double>& d, double w,
                      double step) {
  std::vector<double> a(u), b(u);
  for (std::size_t k = 0; k < u.size(); ++k) {
    a[k] += step * d[k];
    b[k] -= step * d[k];
  }
  return (ev.smoothed(a, w, {}) - ev.smoothed(b, w, {})) / (2 * step);
}

}  // namespace

TEST(WellPotential, Values) {
  EXPECT_DOUBLE_EQ(well_potential(0, 0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(well_potential(0, 1, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(well_potential(0, -1, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(well_potential(2, 0.5, 0.3), 4.3);
}

TEST(Params, Validation) {
  EXPECT_THROW(params(0, 0, 1).validate(), Error);
  EXPECT_THROW(params(0.1, -1, 1).validate(), Error);
  EXPECT_THROW(params(0.1, 0, 4).validate(), Error);
  EXPECT_THROW(params(0.1, 0, 1, 0.6).validate(), Error);
  EXPECT_NO_THROW(params(0.1, 0, 3, 0.5).validate());
}

TEST(Smoothstep, Shape) {
  EXPECT_EQ(smooth_indicator(0.5, 0.2), 1.0);
  EXPECT_EQ(smooth_indicator(1.0, 0.2), 0.0);
  EXPECT_NEAR(smooth_indicator(0.9, 0.2), 0.5, 1e-15);
  EXPECT_EQ(smooth_indicator(0.999, 0.0), 1.0);
  EXPECT_EQ(smooth_indicator(-1.0, 0.0), 0.0);
  for (double t : {-0.95, -0.85, 0.83, 0.97}) {
    const double h = 1e-7;
    const double fd = (smooth_indicator(t + h, 0.2) - smooth_indicator(t - h, 0.2)) / (2 * h);
    EXPECT_NEAR(smooth_indicator_derivative(t, 0.2), fd, 1e-6);
  }
}

TEST(BGeometry, ZeroField) {
  const Grid g = make_grid(1.0, 16, 16);
  const auto geo = b_geometry(ScalarField(g));
  EXPECT_EQ(geo.area_B, 0.0);
  EXPECT_TRUE(geo.pi_columns.empty());
  EXPECT_FALSE(geo.tau.has_value());
}

TEST(BGeometry, CosineSlopeMeasure) {
  // u_y = 2 (x/L) cos(2 pi y): column x meets B in a fraction (2/pi) arccos(L/(2x))
  // of its length once x > L/2.
  const double L = 1.0;
  const Grid g = make_grid(L, 512, 512);
  const auto u = ScalarField::sample(g, [L](double x, double y) { return (x / L) / pi * std::sin(2 * pi * y); });
  const double oracle = simpson([L](double x) { return x <= L / 2 ? 0.0 : (2 / pi) * std::acos(L / (2 * x)); }, 0, L);
  const auto geo = b_geometry(u);
  EXPECT_LT(std::abs(geo.area_B - oracle) / oracle, 0.01) << geo.area_B << " vs " << oracle;
  ASSERT_TRUE(geo.tau.has_value());
  EXPECT_GT(*geo.tau, 0.0);
  EXPECT_LE(*geo.tau, 1.0);
  double sum = 0;
  for (double c : geo.column_length) sum += c * g.hx;
  EXPECT_NEAR(sum, geo.area_B, 1e-12);
  EXPECT_NEAR(geo.len_Pi, L * geo.pi_columns.size() / g.nx, 1e-15);
}

TEST(BGeometry, TieCountsAsB) {
  const Grid g = make_grid(1.0, 8, 16);
  // slope exactly +-1 on a triangle wave in y, times a step in x that is 1 away from x = 0
  const auto u = ScalarField::sample(g, [](double x, double y) {
    const double tri = y < 0.5 ? y : 1 - y;
    return x > 0 ? tri : 0.0;
  });
  const auto geo = b_geometry(u);
  // columns 1..7 are fully in B; column 0 straddles x = 0 and has slope 1/2
  EXPECT_NEAR(geo.area_B, 7.0 / 8.0, 1e-15);
  EXPECT_EQ(geo.pi_columns.size(), 7u);
}

TEST(Truncation, Basics) {
  const Grid g = make_grid(1.0, 64, 64);
  const auto u = ScalarField::sample(g, [](double x, double y) { return x / pi * std::sin(2 * pi * y); });
  const auto geo = b_geometry(u);
  const auto full = truncate_b(u, 1e30);
  EXPECT_EQ(full.pi_M_columns, geo.pi_columns);
  EXPECT_EQ(full.b_M_mask, geo.b_mask);
  EXPECT_NEAR(full.area_B_M, geo.area_B, 1e-14);
  EXPECT_NEAR(full.len_Pi_M, geo.len_Pi, 1e-14);

  double smallest = 1e300;
  for (int i : geo.pi_columns) smallest = std::min(smallest, full.column_uyy_integral[i]);
  const auto none = truncate_b(u, smallest * (1 - 1e-12));
  EXPECT_TRUE(none.pi_M_columns.empty());
  EXPECT_EQ(none.area_B_M, 0.0);

  // per-column integral of u_yy^2 for (x/pi) sin(2 pi y) is 8 pi^2 x^2
  const int i = 50;
  const double xc = (i + 0.5) * g.hx;
  EXPECT_NEAR(full.column_uyy_integral[i], 8 * pi * pi * (xc * xc + g.hx * g.hx / 4), 0.01 * 8 * pi * pi * xc * xc);

  try {
    truncate_b(ScalarField(g), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyB);
  }
}

TEST(Energy, ZeroField) {
  const Grid g = make_grid(1.0, 16, 16);
  for (int v = 1; v <= 3; ++v) {
    const auto e = energy(ScalarField(g), params(0.3, 0.7, v));
    EXPECT_DOUBLE_EQ(e.total, 0.7);
    EXPECT_EQ(e.surface, 0.0);
    EXPECT_EQ(e.elastic, 0.0);
    EXPECT_EQ(e.area_B, 0.0);
    EXPECT_DOUBLE_EQ(e.area_A, 1.0);
  }
  const Grid g2 = make_grid(2.5, 16, 16);
  EXPECT_DOUBLE_EQ(energy(ScalarField(g2), params(0.3, 0.7, 1)).total, 0.7 * 2.5);
}

TEST(Energy, ClosedFormE1) {
  // u = x sin(2 pi y), L = 1: int eps^2 u_yy^2 = eps^2 16 pi^4 / 6, int u_x^2 = 1/2
  const Grid g = make_grid(1.0, 512, 512);
  const auto u = ScalarField::sample(g, [](double x, double y) { return x * std::sin(2 * pi * y); });
  const double eps = 0.1;
  const auto e = energy(u, params(eps, 0.0, 1));
  const double surface = eps * eps * 16 * std::pow(pi, 4) / 6;
  EXPECT_LT(std::abs(e.surface - surface) / surface, 0.005);
  EXPECT_LT(std::abs(e.elastic - 0.5) / 0.5, 0.005);
  EXPECT_LT(std::abs(e.total - surface - 0.5) / (surface + 0.5), 0.005);
}

TEST(Energy, NotAdmissible) {
  const Grid g = make_grid(1.0, 16, 16);
  try {
    energy(ScalarField::sample(g, [](double x, double) { return 1 + x; }), params(0.1, 0.1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotAdmissible);
  }
}

TEST(Energy, BreakdownInvariantsAndJson) {
  Rng rng(21);
  const Grid g = make_grid(1.3, 32, 24);
  const auto u = random_smooth_field(g, rng, 8, 0.2);
  const auto e = energy(u, params(0.05, 0.4, 2));
  EXPECT_DOUBLE_EQ(e.total, e.surface + e.elastic + e.well);
  EXPECT_DOUBLE_EQ(e.area_A + e.area_B, 1.3);
  const auto j = to_json(e);
  for (const char* key : {"surface", "elastic", "well", "total", "area_B", "area_A"}) EXPECT_TRUE(j.contains(key));
  EXPECT_EQ(j.size(), 6u);
  EXPECT_EQ(breakdown_from_json(j).total, e.total);
}

TEST(Energy, VariantOrderingAndShiftInvariance) {
  Rng rng(99);
  for (int t = 0; t < 50; ++t) {
    const Grid g = make_grid(rng.uniform(0.3, 3.0), rng.integer(8, 48), rng.integer(8, 48));
    const auto u = random_smooth_field(g, rng, 8, rng.uniform(0.01, 0.5));
    const double eps = rng.uniform(0.01, 0.3), delta = rng.uniform(0, 1);
    const auto e1 = energy(u, params(eps, delta, 1));
    const auto e2 = energy(u, params(eps, delta, 2));
    const auto e3 = energy(u, params(eps, delta, 3));
    EXPECT_LE(e1.total, e2.total);
    EXPECT_LE(e2.total, e3.total);
    const int s = rng.integer(1, g.ny - 1);
    const auto es = energy(shift_y(u, s), params(eps, delta, 3));
    EXPECT_LE(std::abs(es.total - e3.total), 1e-10 * e3.total);
  }
}

TEST(Smoothed, AgreesWithSharpOutsideBand) {
  const Grid g = make_grid(1.0, 32, 32);
  const auto u = ScalarField::sample(g, [](double x, double y) { return x / pi * std::sin(2 * pi * y); });
  const auto p = params(0.1, 0.5, 1);
  const double sharp = energy(u, p).total;
  EXPECT_DOUBLE_EQ(energy_smoothed(u, p), sharp);

  const auto slopes = cell_slopes(g, u.values());
  for (double w : {0.4, 0.1, 0.01, 1e-4}) {
    auto pw = p;
    pw.smooth_w = w;
    int band = 0;
    for (double s : slopes) band += (std::abs(s) > 1 - w && std::abs(s) < 1) ? 1 : 0;
    const double diff = std::abs(energy_smoothed(u, pw) - sharp);
    EXPECT_LE(diff, p.delta * band * g.hx * g.hy + 1e-14);
    if (band == 0) {
      EXPECT_NEAR(energy_smoothed(u, pw), sharp, 1e-14);
    }
  }
}

TEST(Gradient, ZeroAtZeroField) {
  const Grid g = make_grid(1.0, 16, 16);
  const auto gr = energy_gradient(ScalarField(g), params(0.1, 0.0, 3, 0.2));
  for (double v : gr.values()) EXPECT_EQ(v, 0.0);
  try {
    energy_gradient(ScalarField(g), params(0.1, 0.1, 1, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroSmoothing);
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  Rng rng(2024);
  for (int t = 0; t < 20; ++t) {
    const Grid g = make_grid(rng.uniform(0.5, 2.0), 64, 64);
    const int variant = 1 + t % 3;
    const auto p = params(rng.uniform(0.01, 0.2), rng.uniform(0.1, 2.0), variant, rng.uniform(0.05, 0.5));
    const auto u = random_smooth_field(g, rng, 8, rng.uniform(0.02, 0.2));
    EnergyEvaluator ev(g, p);
    std::vector<double> grad(g.size());
    ev.smoothed(u.values(), p.smooth_w, grad);
    std::vector<double> d(g.size());
    for (auto& x : d) x = rng.uniform(-1, 1);
    for (int j = 0; j < g.ny; ++j) d[g.index(0, j)] = 0.0;
    double analytic = 0;
    for (std::size_t k = 0; k < d.size(); ++k) analytic += grad[k] * d[k];
    const double fd = directional_fd(ev, u.data(), d, p.smooth_w, 1e-5);
    EXPECT_LT(std::abs(analytic - fd) / std::abs(fd), 1e-5) << "field " << t;
    for (int j = 0; j < g.ny; ++j) EXPECT_EQ(grad[g.index(0, j)], 0.0);
  }
}

TEST(Preconditioner, InvertsQuadraticHessian) {
  Rng rng(8);
  for (int variant = 1; variant <= 3; ++variant) {
    for (auto [nx, ny] : {std::pair{16, 16}, {24, 17}, {9, 40}}) {
      const Grid g = make_grid(rng.uniform(0.5, 2), nx, ny);
      const auto p = params(rng.uniform(0.01, 0.3), 0.0, variant, 0.1);
      EnergyEvaluator ev(g, p);
      std::vector<double> u(g.size()), grad(g.size()), back(g.size());
      for (auto& x : u) x = rng.uniform(-1, 1);
      for (int j = 0; j < g.ny; ++j) u[g.index(0, j)] = 0.0;
      ev.smoothed(u, p.smooth_w, grad);  // delta = 0: grad = H u exactly
      FourierBandPreconditioner pre(g, quadratic_metric(p));
      pre.apply(grad, back);
      double err = 0, ref = 0;
      for (std::size_t k = 0; k < u.size(); ++k) {
        err = std::max(err, std::abs(back[k] - u[k]));
        ref = std::max(ref, std::abs(u[k]));
      }
      EXPECT_LT(err, 1e-8 * ref) << "variant " << variant << " grid " << nx << "x" << ny;
    }
  }
}
