// wellscape: batch driver for constructions, checks, minimizations and
// sweeps. Every run reads one JSON config and writes its artifacts plus a
// manifest.json into the output directory.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wellscape/bounds.hpp"
#include "wellscape/calibration.hpp"
#include "wellscape/constructions.hpp"
#include "wellscape/energy.hpp"
#include "wellscape/io.hpp"
#include "wellscape/landscape.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace wellscape;

namespace {

/// Raised when a verification run completes but some checks fail.
struct ChecksFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Run {
  json cfg;
  fs::path config_dir;
  fs::path out;
  std::uint64_t seed = 1;
  int threads = 0;
  json artifacts = json::array();

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out);
    atomic_write(out / name, content);
    artifacts.push_back({{"file", name}, {"bytes", content.size()}, {"fnv1a", hex(fnv1a(content))}});
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const json& section(const char* key) const {
    static const json empty = json::object();
    if (!cfg.contains(key)) return empty;
    const auto& s = cfg.at(key);
    if (!s.is_object()) throw Error(ErrorKind::ConfigError, std::string("'") + key + "' must be an object");
    return s;
  }

  template <typename T>
  static T get(const json& s, const char* key, T fallback) {
    if (!s.contains(key)) return fallback;
    try {
      return s.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::ConfigError, std::string("bad value for '") + key + "'");
    }
  }
  template <typename T>
  static T need(const json& s, const char* key) {
    if (!s.contains(key)) throw Error(ErrorKind::ConfigError, std::string("missing '") + key + "'");
    return get<T>(s, key, T{});
  }

  Grid grid() const {
    const auto& s = section("grid");
    return make_grid(get(s, "L", 1.0), get(s, "nx", 128), get(s, "ny", 128));
  }

  EnergyParams energy_params() const {
    const auto& s = section("energy");
    EnergyParams p;
    p.epsilon = get(s, "epsilon", p.epsilon);
    p.delta = get(s, "delta", p.delta);
    p.variant = get(s, "variant", p.variant);
    p.smooth_w = get(s, "smooth_w", p.smooth_w);
    p.validate();
    return p;
  }

  MinimizeConfig minimize_config() const {
    const auto& s = section("minimize");
    MinimizeConfig c;
    c.max_iters = get(s, "max_iters", c.max_iters);
    c.w_initial = get(s, "w_initial", c.w_initial);
    c.w_factor = get(s, "w_factor", c.w_factor);
    c.w_floor = get(s, "w_floor", c.w_floor);
    c.decrement_tol = get(s, "decrement_tol", c.decrement_tol);
    c.stall_tol = get(s, "stall_tol", c.stall_tol);
    c.armijo = get(s, "armijo", c.armijo);
    c.max_backtracks = get(s, "max_backtracks", c.max_backtracks);
    c.record_trace = get(s, "trace", true);
    c.seed = seed;
    c.validate();
    return c;
  }

  fs::path input_path(const std::string& p) const {
    fs::path path = fs::path(p).is_absolute() ? fs::path(p) : config_dir / p;
    if (!fs::exists(path)) throw Error(ErrorKind::ConfigError, "referenced file does not exist: " + p);
    return path;
  }

  Calibration calibration() const {
    if (cfg.contains("calibration_file") && !std::getenv("WELLSCAPE_CALIBRATION")) {
      return Calibration::load(input_path(cfg.at("calibration_file").get<std::string>()));
    }
    return Calibration::resolve();
  }
};

json breakdown_json(const EnergyBreakdown& e) {
  json j;
  j["surface"] = e.surface;
  j["elastic"] = e.elastic;
  j["well"] = e.well;
  j["total"] = e.total;
  j["area_B"] = e.area_B;
  j["area_A"] = e.area_A;
  return j;
}

json params_json(const EnergyParams& p) {
  return {{"epsilon", p.epsilon}, {"delta", p.delta}, {"variant", p.variant}, {"smooth_w", p.smooth_w}};
}

void emit_field(Run& run, const ScalarField& u, const EnergyParams& p, json info, bool write_field = true) {
  const auto e = energy(u, p);
  info["energy_params"] = params_json(p);
  info["breakdown"] = breakdown_json(e);
  info["excess"] = e.excess(p.delta, u.grid().L);
  if (write_field) run.write("field.wsf1", to_wsf1(u));
  run.write_json("breakdown.json", info);
}

void cmd_construct_branched(Run& run) {
  const Grid g = run.grid();
  const auto p = run.energy_params();
  const auto s = make_branched_spec(Run::get(run.section("construction"), "epsilon", p.epsilon), g.L);
  json info;
  info["spec"] = json::parse(to_json(s).dump());
  info["area_B_oracle"] = branched_area_b(s);
  emit_field(run, branched_seed(s, g), p, info);
}

void cmd_construct_bump(Run& run) {
  const Grid g = run.grid();
  const auto& c = run.section("construction");
  BumpSpec s;
  s.a = Run::need<double>(c, "a");
  s.delta_x = Run::need<double>(c, "delta_x");
  s.lambda = Run::get(c, "lambda", s.lambda);
  s.L = g.L;
  json info;
  info["spec"] = json::parse(to_json(s).dump());
  info["area_B_oracle"] = bump_area_b(s);
  emit_field(run, nucleation_bump(s, g), run.energy_params(), info);
}

void cmd_construct_potential(Run& run) {
  const Grid g = run.grid();
  const auto& c = run.section("construction");
  PotentialSpec s;
  s.j = Run::need<int>(c, "j");
  s.nR = Run::get(c, "nR", s.nR);
  s.L = g.L;
  s.validate();
  // the closed form for z_y(0, 0) refers to the profile without the cutoff
  const auto sol = radial_poisson(radial_profile(s, false), s.nR);
  json info;
  info["spec"] = json::parse(to_json(s).dump());
  info["profile_norm_squared"] = profile_norm_squared(radial_profile(s), s.nR);
  info["slope_at_origin"] = sol.slope_at_origin();
  info["slope_at_origin_expected"] = -s.k() / 4.0 - s.A();
  emit_field(run, potential_seed(s, g), run.energy_params(), info);
}

void cmd_energy(Run& run) {
  const auto u = read_wsf1_file(run.input_path(Run::need<std::string>(run.cfg, "input")));
  emit_field(run, u, run.energy_params(), json::object(), false);
}

ScalarField start_field(const Run& run, const Grid& g, double eps) {
  if (!run.cfg.contains("start")) return branched_seed(make_branched_spec(eps, g.L), g);
  const auto& s = run.cfg.at("start");
  if (s.is_object()) {
    auto u = read_wsf1_file(run.input_path(Run::need<std::string>(s, "file")));
    if (!(u.grid() == g)) throw Error(ErrorKind::ConfigError, "start field grid differs from 'grid'");
    return u;
  }
  const auto name = s.get<std::string>();
  for (auto& f : standard_portfolio(g, eps, run.seed)) {
    if (f.name == name) return f.field;
  }
  throw Error(ErrorKind::ConfigError, "unknown or unresolved start '" + name + "'");
}

void cmd_minimize(Run& run) {
  const Grid g = run.grid();
  const auto p = run.energy_params();
  const auto cfg = run.minimize_config();
  const auto r = minimize(start_field(run, g, p.epsilon), p, cfg);
  json j;
  j["energy_params"] = params_json(p);
  j["start"] = breakdown_json(r.start_breakdown);
  j["final"] = breakdown_json(r.breakdown);
  j["e0"] = p.delta * g.L;
  j["tol_e"] = energy_tolerance(p.delta * g.L, p.epsilon);
  j["backtrack_failures"] = r.backtrack_failures();
  j["monotone"] = r.monotone();
  json stages = json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"w", s.w}, {"iterations", s.iterations}, {"backtrack_failures", s.backtrack_failures},
                      {"monotone", s.monotone}, {"smoothed_start", s.smoothed_start},
                      {"smoothed_end", s.smoothed_end}, {"sharp_end", s.sharp_end}});
  }
  j["stages"] = stages;
  run.write("field.wsf1", to_wsf1(r.field));
  run.write_json("result.json", j);
  if (cfg.record_trace) run.write("trace.jsonl", trace_to_jsonl(r.trace));
}

std::string evaluations_csv(const CriticalDeltaResult& r) {
  CsvTable t({"delta", "e0", "beats", "best_energy", "best_area_B", "winner"});
  for (const auto& e : r.evaluations) {
    t.add_row({format_double(e.delta), format_double(e.e0), e.beats ? "true" : "false", format_double(e.best_energy),
               format_double(e.best_area_B), e.winner});
  }
  return t.str();
}

json critical_json(const CriticalDeltaResult& r) {
  return {{"epsilon", r.epsilon}, {"L", r.L},         {"variant", r.variant}, {"delta_lo", r.delta_lo},
          {"delta_hi", r.delta_hi}, {"midpoint", r.midpoint()}, {"nx", r.nx}, {"ny", r.ny},
          {"evaluations", r.evaluations.size()}};
}

void cmd_critical_delta(Run& run) {
  const Grid g = run.grid();
  const auto p = run.energy_params();
  const auto& s = run.section("critical_delta");
  const double tol = Run::get(s, "tol_rel", 0.25);
  const int decades = Run::get(s, "max_decades", 10);
  const auto cal = run.calibration();
  const auto r = critical_delta(p.epsilon, g.L, p.variant, g.nx, g.ny, run.minimize_config(), tol, cal, run.threads,
                                decades);
  auto j = critical_json(r);
  const auto [lo, hi] = critical_delta_bounds(p.epsilon, g.L, cal);
  j["bounds"] = {{"lower", lo}, {"upper", hi}};
  run.write_json("critical_delta.json", j);
  run.write("evaluations.csv", evaluations_csv(r));
}

void cmd_sweep_delta(Run& run) {
  const Grid g = run.grid();
  const auto p = run.energy_params();
  const auto& s = run.section("sweep");
  const auto eps = Run::need<std::vector<double>>(s, "epsilons");
  const double tol = Run::get(s, "tol_rel", 0.25);
  const auto res =
      scaling_sweep(eps, g.L, p.variant, g.nx, g.ny, run.minimize_config(), tol, run.calibration(), run.threads);
  run.write("sweep.csv", sweep_csv(res.runs));
  json fit;
  fit["slope"] = res.fit.slope;
  fit["constant"] = res.fit.constant;
  fit["residual_rms"] = res.fit.residual_rms;
  json samples = json::array();
  for (auto [e, d] : res.fit.samples) samples.push_back({{"epsilon", e}, {"delta_c", d}});
  fit["samples"] = samples;
  run.write_json("fit.json", fit);
}

void cmd_verify(Run& run) {
  const Grid g = run.grid();
  const auto p = run.energy_params();
  const auto& s = run.section("verify");
  const int n_random = Run::get(s, "random_fields", 50);
  // truncation level of the lemma's setting, M = 2 Delta / eps^2, with Delta
  // at least the 16 eps^2 floor
  const double killer_M = Run::get(s, "killerinterp_M", 2.0 * std::max(p.delta, 16 * p.epsilon * p.epsilon) /
                                                            (p.epsilon * p.epsilon));
  const auto cal = run.calibration();
  std::vector<BoundReport> reps;
  std::vector<std::pair<std::string, ScalarField>> fields;
  try {
    fields.emplace_back("branched", branched_seed(make_branched_spec(p.epsilon, g.L), g));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ResolutionTooCoarse) throw;
  }
  Rng rng(run.seed);
  for (int k = 0; k < n_random; ++k) {
    fields.emplace_back("random_" + std::to_string(k), random_smooth_field(g, rng, 8, rng.uniform(0.02, 0.4)));
  }
  int skipped = 0;
  for (const auto& [name, u] : fields) {
    reps.push_back(poincare_check(u, cal.at("poincare"), name));
    reps.push_back(wopper_check(u, p.epsilon, name).report);
    try {
      reps.push_back(lemma1_check(u, name));
      reps.push_back(killerinterp_check(u, killer_M, cal.at("killerinterp"), name));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyB && e.kind() != ErrorKind::TauOne && e.kind() != ErrorKind::EmptyPiM) throw;
      ++skipped;
    }
  }
  for (auto [y1, y2] : {std::pair{0.0, 1.0}, {0.0, 0.5}, {0.2, 0.9}}) {
    const double exact = obstacle_min_1d(y1, y2).value;
    const auto qp = obstacle_qp(y1, y2, 512);
    reps.push_back(make_report("obstacle_qp", format_double(y1) + ":" + format_double(y2), qp.objective,
                               exact * 0.99, 1.0));
  }
  run.write("bounds.csv", reports_to_csv(reps));
  int failed = 0;
  for (const auto& r : reps) failed += r.holds ? 0 : 1;
  run.write_json("summary.json", {{"checks", reps.size()}, {"failed", failed}, {"skipped_fields", skipped}});
  if (failed > 0) throw ChecksFailed(std::to_string(failed) + " inequality checks failed");
}

void cmd_probe(Run& run) {
  const Grid g = run.grid();
  const auto p = run.energy_params();
  const auto& s = run.section("probe");
  const int n = Run::get(s, "samples", 1000);
  const auto cal = run.calibration();
  const auto tb = theorem2_bounds(p.epsilon, p.delta, g.L, cal.at("theorem2_r"), cal.at("theorem2_s"));
  const double cap = Run::get(s, "norm_cap", Run::get(s, "cap_factor", 0.99) * tb.r);
  const double area_cap = Run::get(s, "area_cap", Run::get(s, "area_cap_factor", 0.99) * tb.s);
  const auto rn = local_minimality_probe(p, g, n, cap, run.seed);
  const auto ra = local_minimality_area_probe(p, g, n, area_cap, run.seed + 1);
  auto rep = [](const ProbeReport& r) {
    return json{{"cap", r.cap},         {"samples", r.samples},
                {"violations", r.violations}, {"seeded", r.seeded},
                {"seeded_violations", r.seeded_violations}, {"min_excess", r.min_excess}, {"e0", r.e0}};
  };
  json j;
  j["energy_params"] = params_json(p);
  j["calibrated_r"] = tb.r;
  j["calibrated_s"] = tb.s;
  j["pq_region_nonempty"] = pq_region(p.epsilon, p.delta, g.L).nonempty;
  j["norm_probe"] = rep(rn);
  j["area_probe"] = rep(ra);
  run.write_json("probe.json", j);
}

void cmd_obstacle(Run& run) {
  const auto& s = run.section("obstacle");
  const int nodes = Run::get(s, "nodes", 512);
  auto intervals = Run::get(s, "intervals", std::vector<std::vector<double>>{{0, 1}, {0, 0.5}, {0.2, 0.9}});
  CsvTable t({"y1", "y2", "analytic", "qp", "relative_error"});
  CsvTable prof({"interval", "y", "f", "f_y"});
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto& iv = intervals[k];
    if (iv.size() != 2) throw Error(ErrorKind::ConfigError, "intervals are pairs [y1, y2]");
    const auto a = obstacle_min_1d(iv[0], iv[1]);
    const auto q = obstacle_qp(iv[0], iv[1], nodes);
    t.add_row({format_double(iv[0]), format_double(iv[1]), format_double(a.value), format_double(q.objective),
               format_double(std::abs(q.objective - a.value) / a.value)});
    for (int i = 0; i <= 64; ++i) {
      const double y = iv[0] + (iv[1] - iv[0]) * i / 64.0;
      prof.add_row({std::to_string(k), format_double(y), format_double(a.profile(y)), format_double(a.profile_slope(y))});
    }
  }
  run.write("obstacle.csv", t.str());
  run.write("profiles.csv", prof.str());
}

void cmd_calibrate(Run& run) {
  const auto& s = run.section("calibration");
  CalibrationSweep sw;
  sw.seed_epsilons = Run::get(s, "seed_epsilons", sw.seed_epsilons);
  sw.seed_n = Run::get(s, "seed_n", sw.seed_n);
  sw.probe_epsilons = Run::get(s, "probe_epsilons", sw.probe_epsilons);
  sw.probe_factors = Run::get(s, "probe_factors", sw.probe_factors);
  sw.probe_n = Run::get(s, "probe_n", sw.probe_n);
  sw.L = Run::get(s, "L", sw.L);
  run.write_json("calibration.json", run_calibration(sw, run.minimize_config(), run.threads).to_json());
}

const std::map<std::string, void (*)(Run&)>& commands() {
  static const std::map<std::string, void (*)(Run&)> m{
      {"construct-branched", cmd_construct_branched},
      {"construct-bump", cmd_construct_bump},
      {"construct-potential", cmd_construct_potential},
      {"energy", cmd_energy},
      {"minimize", cmd_minimize},
      {"critical-delta", cmd_critical_delta},
      {"sweep-delta", cmd_sweep_delta},
      {"verify-inequalities", cmd_verify},
      {"probe-local-min", cmd_probe},
      {"obstacle-1d", cmd_obstacle},
      {"calibrate", cmd_calibrate},
  };
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wellscape: energy landscape experiments for two-well martensite models"};
  std::string command, config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("command", command, "subcommand; defaults to the config's \"command\"");
  app.add_option("--config", config_path, "JSON config (schema 1)")->required();
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides seed)");
  app.add_option("--threads", threads, "worker threads, 0 = auto")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Run run;
  try {
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open config " + config_path);
    try {
      run.cfg = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    if (!run.cfg.is_object() || Run::get(run.cfg, "schema", 0) != 1) {
      throw Error(ErrorKind::ConfigError, "config needs \"schema\": 1");
    }
    if (command.empty()) command = Run::get<std::string>(run.cfg, "command", "");
    if (!run.cfg.contains("command")) run.cfg["command"] = command;
    if (run.cfg.at("command") != command) throw Error(ErrorKind::ConfigError, "command differs from the config's");
    auto it = commands().find(command);
    if (it == commands().end()) throw Error(ErrorKind::ConfigError, "unknown command '" + command + "'");
    if (*seed_opt) run.cfg["seed"] = seed;
    if (*out_opt) run.cfg["output_dir"] = out_dir;
    run.seed = Run::get<std::uint64_t>(run.cfg, "seed", 1);
    run.out = Run::get<std::string>(run.cfg, "output_dir", "out");
    run.config_dir = fs::absolute(config_path).parent_path();
    run.threads = threads;

    int status = 0;
    std::string failure;
    try {
      it->second(run);
    } catch (const ChecksFailed& e) {
      status = 1;
      failure = e.what();
    }
    json manifest;
    manifest["schema"] = 1;
    manifest["command"] = command;
    // where the outputs land does not change them
    json hashed = run.cfg;
    hashed.erase("output_dir");
    manifest["config_hash"] = hex(fnv1a(hashed.dump()));
    manifest["seed"] = run.seed;
    manifest["status"] = status;
    manifest["artifacts"] = run.artifacts;
    fs::create_directories(run.out);
    atomic_write(run.out / "manifest.json", manifest.dump(2) + "\n");
    if (status != 0) std::cerr << "wellscape: " << failure << "\n";
    return status;
  } catch (const Error& e) {
    std::cerr << "wellscape: " << e.what() << "\n";
    return (e.kind() == ErrorKind::Diverged || e.kind() == ErrorKind::BracketNotFound) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "wellscape: " << e.what() << "\n";
    return 2;
  }
}
