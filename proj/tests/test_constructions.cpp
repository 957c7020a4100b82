#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "wellscape/constructions.hpp"
#include "wellscape/energy.hpp"

using namespace wellscape;
using std::numbers::pi;

namespace {

EnergyParams params(double eps, double delta, int variant) {
  EnergyParams p;
  p.epsilon = eps;
  p.delta = delta;
  p.variant = variant;
  return p;
}

}  // namespace

TEST(BranchedSpec, Derived) {
  for (double eps : {1e-4, 1e-3, 1e-2, 0.05}) {
    for (double L : {0.5, 1.0, 2.0}) {
      const auto s = make_branched_spec(eps, L);
      EXPECT_GE(s.N, 1);
      EXPECT_NEAR(1.0 / (4.0 * s.h), s.N, 1e-9);
      EXPECT_NEAR(s.k * s.l, s.h / 2, 1e-15);
      EXPECT_LE(s.h, 0.25);
      EXPECT_NEAR(s.h, s.c * std::sqrt(eps * L), 1e-14);
      // neighbouring integers give a larger |c - 1|
      for (int n : {s.N - 1, s.N + 1}) {
        if (n < 1) continue;
        EXPECT_GE(std::abs(1.0 / (4.0 * n * std::sqrt(eps * L)) - 1.0), std::abs(s.c - 1.0));
      }
    }
  }
  EXPECT_EQ(make_branched_spec(1e-4, 1.0).N, 25);
}

TEST(BranchedSeed, AdmissibleAndCoarseGrid) {
  const auto s = make_branched_spec(0.01, 1.0);
  const auto u = branched_seed(s, make_grid(1.0, 128, 128));
  EXPECT_TRUE(validate_admissible(u).ok);
  for (int j = 0; j < 128; ++j) EXPECT_EQ(u(0, j), 0.0);
  try {
    branched_seed(make_branched_spec(1e-4, 1.0), make_grid(1.0, 64, 64));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ResolutionTooCoarse);
  }
}

TEST(BranchedSeed, ProfileIsC1AcrossBranches) {
  const auto s = make_branched_spec(0.01, 1.0);
  for (double x : {0.0, 0.1, 0.3, 0.5}) {
    const double H = s.h - s.k * x;
    for (double y0 : {H, 2 * s.h - H, 2 * s.h, 4 * s.h - H}) {
      const double e = 1e-9;
      const double left = detail::branched_w(x, y0 - e, s.h, s.k), right = detail::branched_w(x, y0 + e, s.h, s.k);
      EXPECT_NEAR(left, right, 1e-8);
      const double dl = (detail::branched_w(x, y0 - e, s.h, s.k) - detail::branched_w(x, y0 - 2 * e, s.h, s.k)) / e;
      const double dr = (detail::branched_w(x, y0 + 2 * e, s.h, s.k) - detail::branched_w(x, y0 + e, s.h, s.k)) / e;
      EXPECT_NEAR(dl, dr, 1e-5) << "x=" << x << " y=" << y0;
    }
  }
}

TEST(BranchedSeed, NodalSlopeJumpsAreSmall) {
  const auto s = make_branched_spec(0.01, 1.0);
  const Grid g = make_grid(1.0, 64, 512);
  const auto dy = d_y(branched_seed(s, g));
  double worst = 0.0;
  for (int i = g.nx / 2; i <= g.nx; ++i) {
    for (int j = 0; j < g.ny; ++j) worst = std::max(worst, std::abs(dy(i, (j + 1) % g.ny) - dy(i, j)));
  }
  // u_yy is at most 1/H = 2/h on the caps
  EXPECT_LE(worst, 2.0 / s.h * g.hy * 1.01);
}

TEST(BranchedSeed, AreaAgainstColumnMeasure) {
  const auto s = make_branched_spec(0.01, 1.0);
  EXPECT_NEAR(branched_area_b(s), s.l / 4, 1e-15);
  const auto geo = b_geometry(branched_seed(s, make_grid(1.0, 1024, 1024)));
  EXPECT_LT(std::abs(geo.area_B - branched_area_b(s)) / branched_area_b(s), 0.03);
  ASSERT_TRUE(geo.tau.has_value());
  EXPECT_GT(*geo.tau, 0.0);
  EXPECT_LT(*geo.tau, 1.0);
}

TEST(BranchedSeed, ExcessScalesWithEpsilon) {
  double lo = 1e300, hi = 0;
  for (double eps : {0.002, 0.005, 0.01, 0.02}) {
    const auto s = make_branched_spec(eps, 1.0);
    const auto e = energy(branched_seed(s, make_grid(1.0, 512, 512)), params(eps, 0.3, 3));
    const double ratio = (e.total - 0.3 + 0.3 * e.area_B) / eps;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  EXPECT_LT(hi / lo, 3.0);
}

TEST(Bump, AreaMatchesClosedForm) {
  const BumpSpec s{0.01, 0.01, 4.0, 0.01};
  EXPECT_NEAR(bump_area_b(s), 1e-4, 1e-18);
  const auto u = nucleation_bump(s, make_grid(0.01, 128, 8192));
  EXPECT_TRUE(validate_admissible(u).ok);
  EXPECT_LT(std::abs(b_geometry(u).area_B - 1e-4) / 1e-4, 0.02);
}

TEST(Bump, AreaConvergesAndVanishesWithLambda) {
  const BumpSpec s{0.1, 0.2, 2.0, 0.2};
  double prev = 1e300;
  for (int n : {256, 1024, 4096}) {
    const double err = std::abs(b_geometry(nucleation_bump(s, make_grid(0.2, n / 4, n))).area_B - bump_area_b(s));
    EXPECT_LT(err, prev);
    prev = err;
  }
  double last = 1e300;
  for (double lam : {2.0, 1.3, 1.1, 1.02}) {
    const BumpSpec t{0.1, 0.2, lam, 0.2};
    const double a = b_geometry(nucleation_bump(t, make_grid(0.2, 64, 16384))).area_B;
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, last);
    last = a;
  }
}

TEST(Bump, EnergyScalesAsSqrtDelta) {
  double e_prev = 0;
  for (double d : {1e-2, 1e-4}) {
    const BumpSpec s{std::sqrt(d), d, 1.1, d};
    const auto e = energy(nucleation_bump(s, make_grid(d, 64, 4096)), params(0.1, 0.0, 1));
    if (e_prev > 0) {
      EXPECT_NEAR(std::log(e_prev / e.total) / std::log(1e2), 0.5, 0.02);
    }
    e_prev = e.total;
  }
}

TEST(Bump, Rejects) {
  EXPECT_THROW(nucleation_bump(BumpSpec{0.3, 0.1, 2, 1}, make_grid(1, 64, 64)), Error);
  EXPECT_THROW(nucleation_bump(BumpSpec{0.1, 0.1, 1.0, 1}, make_grid(1, 64, 64)), Error);
  try {
    nucleation_bump(BumpSpec{0.01, 0.1, 2, 1}, make_grid(1, 128, 64));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ResolutionTooCoarse);
  }
}

TEST(RadialProfile, Knots) {
  PotentialSpec s1;
  s1.j = 1;
  const auto g1 = radial_profile(s1, false);
  EXPECT_NEAR(g1(1.0), s1.A(), 1e-12);
  EXPECT_NEAR(g1(std::nextafter(1.0, 2.0)), s1.A(), 1e-12);

  // continuous at R = 1 for every j; the inner knot R = 2^-j carries a factor 2
  for (int j = 1; j <= 8; ++j) {
    PotentialSpec s;
    s.j = j;
    const auto g = radial_profile(s, false);
    EXPECT_NEAR(g(std::nextafter(1.0, 0.0)), g(std::nextafter(1.0, 2.0)), 1e-12 * std::abs(s.A()));
    const double knot = std::ldexp(1.0, -j);
    const double inner = g(knot), middle = s.A() * std::pow(knot, s.alpha() + 1);
    EXPECT_NEAR(inner, std::ldexp(s.A(), j), 1e-12 * std::abs(inner));
    EXPECT_NEAR(inner / middle, 2.0, 1e-12);
    EXPECT_EQ(g(2.5), 0.0);
  }
  PotentialSpec s;
  EXPECT_EQ(radial_profile(s, true)(1.6), 0.0);
  EXPECT_NEAR(radial_profile(s, true)(1.25), 0.5 * s.A(), 1e-12);
}

TEST(RadialProfile, NormDecreasesAndMatchesOracle) {
  double prev = 1e300;
  for (int j = 1; j <= 8; ++j) {
    PotentialSpec s;
    s.j = j;
    const double k = s.k();
    const double oracle = 2 * pi * k * k / (j * j) * (1 + 3.0 * j / 16);
    EXPECT_NEAR(profile_norm_squared(radial_profile(s, false), s.nR), oracle, 1e-5 * oracle);
    const double cut = profile_norm_squared(radial_profile(s, true), s.nR);
    EXPECT_LT(cut, prev);
    prev = cut;
  }
  PotentialSpec s;
  s.j = 200;
  EXPECT_LT(profile_norm_squared(radial_profile(s, true), s.nR), 0.1 * prev);
}

TEST(RadialPoisson, BoxProfile) {
  const double A = 2.5;
  const auto sol = radial_poisson([A](double R) { return R >= 1.0 && R <= 2.0 ? A : 0.0; }, 4096);
  EXPECT_NEAR(sol.slope_at_origin(), -A / 2, 1e-12);
  const auto zero = radial_poisson([](double) { return 0.0; }, 64);
  for (double R : {0.0, 0.3, 1.7, 5.0}) {
    EXPECT_EQ(zero.value(R), 0.0);
    EXPECT_EQ(zero.derivative(R), 0.0);
  }
  try {
    radial_poisson([](double R) { return R < 3 ? 1.0 : 0.0; }, 64);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedProfile);
  }
}

TEST(RadialPoisson, SlopeAtOriginClosedForm) {
  for (int j = 1; j <= 8; ++j) {
    PotentialSpec s;
    s.j = j;
    const auto sol = radial_poisson(radial_profile(s, false), s.nR);
    const double exact = -s.k() / 4 - s.A();
    EXPECT_LT(std::abs(sol.slope_at_origin() - exact) / std::abs(exact), 0.005);
  }
}

TEST(RadialPoisson, OdeResidualShrinksQuadratically) {
  PotentialSpec s;
  s.j = 6;
  const auto g = radial_profile(s, true);
  // second differences at the knots, skipping the kinks of g at R = 1 and 3/2
  auto residual = [&](int nR) {
    const auto sol = radial_poisson(g, nR);
    const double h = 2.0 / nR;
    double worst = 0;
    for (int i = static_cast<int>(0.05 / h); i * h <= 1.9; ++i) {
      const double R = i * h;
      if (std::abs(R - 1.0) < 3 * h || std::abs(R - 1.5) < 3 * h) continue;
      const double d2 = (sol.value(R + h) - 2 * sol.value(R) + sol.value(R - h)) / (h * h);
      worst = std::max(worst, std::abs(d2 + sol.derivative(R) / R - sol.value(R) / (R * R) - g(R)));
    }
    return worst;
  };
  const double coarse = residual(1024), fine = residual(4096);
  EXPECT_LT(fine, coarse / 8.0);
  EXPECT_LT(fine * 4096.0 * 4096.0, 1e3 * std::abs(s.A()));
}

TEST(Convolution, FarFieldMonopole) {
  // unit-mass Gaussian-like blob supported in the unit disk
  const double mass_norm = pi / 3.0;  // int (1 - r^2)^2 over the unit disk
  auto f = [&](double x, double y) {
    const double r2 = x * x + y * y;
    return r2 < 1 ? (1 - r2) * (1 - r2) / mass_norm : 0.0;
  };
  const auto out = convolution_oracle(f, 1.0, 256, 256, {{10.0, 0.0}, {0.0, 0.0}});
  EXPECT_LT(std::abs(out[0].z - std::log(10.0) / (2 * pi)) / (std::log(10.0) / (2 * pi)), 0.01);
  const auto zero = convolution_oracle([](double, double) { return 0.0; }, 2.0, 32, 32, {{0.5, 0.5}});
  EXPECT_EQ(zero[0].z, 0.0);
  EXPECT_EQ(zero[0].zx, 0.0);
  EXPECT_EQ(zero[0].zy, 0.0);
}

TEST(Convolution, AgreesWithRadialSolver) {
  PotentialSpec s;
  s.j = 3;
  const auto g = radial_profile(s, true);
  const auto sol = radial_poisson(g, s.nR);
  auto f = [&](double x, double y) {
    const double R = std::hypot(x, y);
    return R > 0 ? g(R) * y / R : 0.0;
  };
  std::vector<std::array<double, 2>> probes;
  for (double R : {0.3, 0.7, 1.2, 1.7}) {
    for (double t : {1.0, 2.0}) probes.push_back({R * std::cos(t), R * std::sin(t)});
  }
  const auto out = convolution_oracle(f, 2.0, 512, 512, probes);
  double worst = 0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto ref = sol.cartesian(probes[p][0], probes[p][1]);
    worst = std::max(worst, std::abs(out[p].z - ref[0]) / std::abs(ref[0]));
    worst = std::max(worst, std::abs(out[p].zx - ref[1]) / std::abs(ref[1]));
    worst = std::max(worst, std::abs(out[p].zy - ref[2]) / std::abs(ref[2]));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(PotentialSeed, CentreSlopeAreaAndOrdering) {
  const Grid g = make_grid(1.0, 256, 256);
  double prev = 1e300;
  for (int j = 1; j <= 8; ++j) {
    PotentialSpec s;
    s.j = j;
    const auto v = potential_seed(s, g);
    EXPECT_TRUE(validate_admissible(v).ok);
    const auto dy = d_y(v);
    EXPECT_GE(dy(g.nx / 2, g.ny / 2), 2.0);
    const auto e1 = energy(v, params(0.1, 0.0, 1));
    const auto e2 = energy(v, params(0.1, 0.0, 2));
    const auto e3 = energy(v, params(0.1, 0.0, 3));
    EXPECT_GT(e3.area_B, 0.0);
    EXPECT_LE(e1.total, e2.total);
    EXPECT_LE(e2.total, e3.total);
    EXPECT_LT(e3.total, prev);
    prev = e3.total;
  }
}

TEST(Specs, Json) {
  const auto b = to_json(make_branched_spec(0.01, 1.0));
  for (const char* key : {"epsilon", "L", "c", "N", "h", "l", "k"}) EXPECT_TRUE(b.contains(key));
  EXPECT_EQ(to_json(BumpSpec{}).size(), 4u);
  PotentialSpec p;
  p.j = 4;
  EXPECT_DOUBLE_EQ(to_json(p)["A_j"].get<double>(), p.k() / 4);
  EXPECT_DOUBLE_EQ(to_json(p)["alpha_j"].get<double>(), 0.25 - 2);
}
