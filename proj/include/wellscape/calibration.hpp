#pragma once

// The sweep that fixes the constants stored in calibration/calibration.json.
//
//   critical_delta_lower  1: on y-periodic fields the boundary term of the
//                         column estimate vanishes, so E_i(u) - E_i(0) >=
//                         (eps/L - Delta) area_B and no lower state exists
//                         below eps/L.
//   critical_delta_upper  largest (excess of the branched seed / area_B) L/eps
//                         over the sweep: above it the seed itself wins.
//   theorem2_r, _s        half the smallest ||v||_2 (area_B) of any state
//                         found below E(0), divided by eps^3.5/Delta^2
//                         (eps^6/(Delta^4 L)).
//   killerinterp          1/2, from the column interpolation argument with
//                         the periodic constant 1; the floor observed on the
//                         lower states at M = 2 Delta/eps^2 is stored next to it.
//   interp, poincare      2 (periodic Cauchy-Schwarz) and pi^2/4.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "json.hpp"
#include "wellscape/bounds.hpp"
#include "wellscape/landscape.hpp"

namespace wellscape {

struct CalibrationSweep {
  std::vector<double> seed_epsilons{0.002, 0.005, 0.01, 0.02, 0.05};
  int seed_n = 256;
  std::vector<double> probe_epsilons{0.05, 0.1};
  std::vector<double> probe_factors{10.0, 20.0, 50.0};  ///< Delta in units of eps/L
  int probe_n = 128;
  double L = 1.0;
};

struct CalibrationResult {
  Calibration calibration;
  nlohmann::ordered_json log;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    nlohmann::ordered_json c;
    for (const auto& [k, v] : calibration.constants) c[k] = v;
    j["constants"] = c;
    j["sweep"] = log;
    return j;
  }
};

inline CalibrationResult run_calibration(const CalibrationSweep& sw = {}, const MinimizeConfig& cfg = {},
                                         int threads = 1) {
  CalibrationResult out;
  auto& C = out.calibration.constants;
  const double L = sw.L;

  double upper = 0.0;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (double eps : sw.seed_epsilons) {
    const Grid g = make_grid(L, sw.seed_n, sw.seed_n);
    EnergyParams p;
    p.epsilon = eps;
    p.variant = 3;
    const auto e = energy(branched_seed(make_branched_spec(eps, L), g), p);
    const double ratio = (e.surface + e.elastic) / e.area_B * L / eps;
    upper = std::max(upper, ratio);
    seeds.push_back({{"epsilon", eps}, {"excess", e.surface + e.elastic}, {"area_B", e.area_B}, {"ratio", ratio}});
  }
  C["critical_delta_lower"] = 1.0;
  C["critical_delta_upper"] = upper;

  double r_ratio = std::numeric_limits<double>::infinity(), s_ratio = r_ratio, k_floor = r_ratio;
  nlohmann::ordered_json states = nlohmann::ordered_json::array();
  for (double eps : sw.probe_epsilons) {
    const Grid g = make_grid(L, sw.probe_n, sw.probe_n);
    const auto portfolio = standard_portfolio(g, eps, cfg.seed);
    for (double f : sw.probe_factors) {
      EnergyParams p;
      p.epsilon = eps;
      p.delta = f * eps / L;
      const double e0 = p.delta * L, target = e0 - energy_tolerance(e0, eps);
      std::vector<ScalarField> finals(portfolio.size(), ScalarField(g));
      parallel_for(static_cast<int>(portfolio.size()), threads,
                   [&](int k) { finals[k] = minimize(portfolio[k].field, p, cfg).field; });
      std::vector<std::pair<std::string, ScalarField>> candidates;
      for (std::size_t k = 0; k < portfolio.size(); ++k) {
        candidates.emplace_back(portfolio[k].name, portfolio[k].field);
        candidates.emplace_back(portfolio[k].name + "_min", finals[k]);
      }
      for (const auto& [name, v] : candidates) {
        const auto e = energy(v, p);
        if (!(e.total < target)) continue;
        const double nv = l2_norm(v);
        const double rr = nv / (std::pow(eps, 3.5) / (p.delta * p.delta));
        const double ss = e.area_B / (std::pow(eps, 6) / std::pow(p.delta, 4) / L);
        const auto kr = killerinterp_check(v, 2.0 * p.delta / (eps * eps), 1.0);
        r_ratio = std::min(r_ratio, rr);
        s_ratio = std::min(s_ratio, ss);
        k_floor = std::min(k_floor, kr.lhs / kr.rhs);
        states.push_back({{"epsilon", eps}, {"delta", p.delta}, {"start", name}, {"energy", e.total},
                          {"e0", e0}, {"norm", nv}, {"area_B", e.area_B}, {"r_ratio", rr}, {"s_ratio", ss}});
      }
    }
  }
  if (!std::isfinite(r_ratio)) throw Error(ErrorKind::BracketNotFound, "calibration sweep found no state below E(0)");
  C["theorem2_r"] = 0.5 * r_ratio;
  C["theorem2_s"] = 0.5 * s_ratio;
  C["killerinterp"] = 0.5;
  C["killerinterp_observed_floor"] = k_floor;
  C["interp"] = 2.0;
  C["poincare"] = std::numbers::pi * std::numbers::pi / 4.0;
  C["pq_f"] = 1.0;
  C["pq_g"] = 1.0;
  C["pq_upper"] = 1.0;

  out.log["L"] = L;
  out.log["seed_grid"] = sw.seed_n;
  out.log["probe_grid"] = sw.probe_n;
  out.log["branched_seeds"] = seeds;
  out.log["lower_states"] = states;
  return out;
}

}  // namespace wellscape
