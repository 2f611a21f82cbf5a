// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "latgas/equilibrium.hpp"
#include "latgas/harness.hpp"
#include "latgas/particle_models.hpp"

using namespace latgas;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Context {
  int workers = 1;
  fs::path out;
  fs::path configs = LATGAS_CONFIG_DIR;
};

ExperimentConfig config(const Context& ctx, const std::string& name) {
  ExperimentConfig cfg = load_config(ctx.configs / name);
  cfg.workers = ctx.workers;
  return cfg;
}

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// 1 and 2 share the coupled runs.
std::map<std::string, Report> coupling_reports;

const Report& coupling_report(const Context& ctx, const std::string& name) {
  auto it = coupling_reports.find(name);
  if (it == coupling_reports.end()) it = coupling_reports.emplace(name, run_coupling_audit(config(ctx, name))).first;
  return it->second;
}

const std::vector<std::pair<std::string, std::string>> kCoupled{
    {"TASEP", "tasep_coupling.json"}, {"K=3", "k3_coupling.json"}, {"overtaking", "overtaking_coupling.json"}};

Outcome coupling_invariants(const Context& ctx) {
  Outcome o{true, ""};
  for (const auto& [label, file] : kCoupled) {
    const Report& r = coupling_report(ctx, file);
    const auto events = r.summary["coupled_events"].get<std::uint64_t>();
    const auto violations = r.summary["order_violations"].get<std::uint64_t>();
    o.passed = o.passed && violations == 0 && events >= 10'000'000;
    o.detail += label + " " + std::to_string(events) + " events/" + std::to_string(violations) + " violations; ";
  }
  return o;
}

Outcome marginal_stationarity(const Context& ctx) {
  Outcome o{true, ""};
  for (const auto& [label, file] : kCoupled) {
    const Report& r = coupling_report(ctx, file);
    const int fails = r.summary["probe_failures"].get<int>();
    const double phi = r.summary["equal_start_monitor_max"].get<double>();
    o.passed = o.passed && fails == 0 && phi == 0.0;
    o.detail += label + " c=" + num(r.summary["marginal_density"].get<double>()) + " probe failures " +
                std::to_string(fails) + "/5; ";
  }
  return o;
}

Outcome flux_oracle(const Context&) {
  constexpr int kSamples = 1'000'000;
  Outcome o{true, ""};
  JumpKernel biased;
  Point fwd(1), back(1);
  fwd << 1;
  back << -1;
  biased.support = {{fwd, 0.75}, {back, 0.25}};
  const std::vector<std::pair<std::string, ModelSpec>> misanthropes{
      {"SEP", exclusion_model(totally_asymmetric_kernel(), 1)},
      {"K=3", exclusion_model(biased, 3)},
      {"ZRP", zero_range_model(totally_asymmetric_kernel(), {0.0, 1.0})}};
  int pairs = 0;
  double worst_z = 0.0;
  std::string worst_name;
  std::uint64_t stream = 0;
  for (const auto& [name, model] : misanthropes) {
    const double K = model.capacity() == kUnbounded ? 1.0 : model.capacity();
    const auto& m = model.misanthrope();
    for (double rho : {0.1, 0.5, 0.9 * K}) {
      const SiteMarginal th = marginal_for_density(rho, model);
      Rng rng = Rng::stream(2024, stream++);
      double s = 0.0, s2 = 0.0;
      std::vector<int> nb(m.kernel.support.size());
      for (int k = 0; k < kSamples; ++k) {
        const int eta0 = sample_site(th, rng.uniform());
        for (auto& v : nb) v = sample_site(th, rng.uniform());
        const double j = microscopic_flux(m, eta0, nb)(0);
        s += j;
        s2 += j * j;
      }
      const double mean = s / kSamples;
      const double se = std::sqrt((s2 / kSamples - mean * mean) / (kSamples - 1));
      const double z = std::abs(mean - misanthrope_flux(model, rho)(0)) / se;
      if (!(z <= 3.0)) o.passed = false;
      if (z > worst_z) worst_z = z, worst_name = name + "@" + num(rho);
      ++pairs;
    }
  }
  const ModelSpec ot = overtaking_model(1, {{2.0, 1.0}, {}});
  for (double rho : {0.1, 0.5, 0.9}) {
    Rng rng = Rng::stream(2024, stream++);
    double s = 0.0, s2 = 0.0;
    std::vector<std::vector<int>> rays(2, std::vector<int>(3));
    for (int k = 0; k < kSamples; ++k) {
      const int eta0 = rng.uniform() < rho;
      rays[0][0] = rays[1][0] = eta0;
      for (int i = 1; i <= 2; ++i) {
        rays[0][i] = rng.uniform() < rho;
        rays[1][i] = rng.uniform() < rho;
      }
      const double j = microscopic_flux(ot.overtaking(), rays)(0);
      s += j;
      s2 += j * j;
    }
    const double mean = s / kSamples;
    const double se = std::sqrt((s2 / kSamples - mean * mean) / (kSamples - 1));
    const double z = std::abs(mean - overtaking_flux(ot, rho)(0)) / se;
    if (!(z <= 3.0)) o.passed = false;
    if (z > worst_z) worst_z = z, worst_name = "overtaking@" + num(rho);
    ++pairs;
  }
  o.detail = std::to_string(pairs) + " (model, density) pairs, 1e6 samples each, largest |z| " + num(worst_z, 3) +
             " at " + worst_name;
  return o;
}

Outcome pde_verification(const Context& ctx) {
  const FluxTable f = tabulate_flux([](double r) { return r * (1 - r); }, 1.0);
  SolveOptions so;
  so.dx = 1.0 / 400.0;
  bool max_ok = true;
  Trajectory shock;
  try {
    shock = solve_ibvp([](double x) { return x < 0 ? 0.2 : 0.9; }, -1.0, 1.0, 0.2, 0.9, f, 1.0, so);
  } catch (const std::logic_error&) {
    max_ok = false;
  }
  const double front = front_position(shock.final, 0.55);
  const bool front_ok = std::abs(front + 0.1) <= 2 * so.dx;
  const bool mass_ok = shock.mass_balance_error <= 1e-12;
  max_ok = max_ok && shock.max_principle_violation <= 1e-12;

  AuditOptions ao;
  ao.workers = ctx.workers;
  const EntropyReport good = entropy_audit(shock, f, ao);
  const auto jump = trajectory_from_function([](double t, double x) { return x < -0.1 * t ? 0.9 : 0.2; }, -1.0, 1.0,
                                             0.9, 0.2, so.dx, shock.dt, 1.0);
  const EntropyReport bad = entropy_audit(jump, f, ao);

  // The datum 0.9|0.2 itself opens a fan; its midpoint level still sits at -0.1 t.
  const Trajectory fan = solve_ibvp([](double x) { return x < 0 ? 0.9 : 0.2; }, -1.0, 1.0, 0.9, 0.2, f, 1.0, so);
  double fan_l1 = 0.0;
  for (int i = 0; i < fan.final.cells(); ++i) {
    const double xi = fan.final.center(i);
    const double exact = xi < -0.8 ? 0.9 : (xi > 0.6 ? 0.2 : 0.5 * (1 - xi));
    fan_l1 += std::abs(fan.final.u(i) - exact) * so.dx;
  }
  const bool fan_ok = fan_l1 < 0.01 && fan.mass_balance_error <= 1e-12;

  Outcome o;
  o.passed = front_ok && mass_ok && max_ok && good.passed && !bad.passed && fan_ok;
  o.detail = "shock 0.2|0.9 front " + num(front, 5) + " (target -0.1, 2dx=0.005), mass err " +
             num(shock.mass_balance_error, 2) + ", max-principle " + (max_ok ? "ok" : "violated") + ", audit margin " +
             num(good.worst_margin, 3) + (good.passed ? " pass" : " FAIL") + "; inserted jump 0.9|0.2 margin " +
             num(bad.worst_margin, 3) + (bad.passed ? " pass (expected fail)" : " fails") + "; datum 0.9|0.2 fan L1 " +
             num(fan_l1, 3);
  return o;
}

Outcome hydro_convergence(const Context& ctx) {
  const auto cfg = config(ctx, "tasep_convergence.json");
  const auto rows = hydrodynamic_rows(cfg);
  std::map<double, std::vector<std::pair<int, double>>> by_t;
  for (const auto& r : rows) by_t[r.t].push_back({r.N, r.distance});
  Outcome o{cfg.replicas >= 20, "replicas " + std::to_string(cfg.replicas) + "; "};
  for (auto& [t, v] : by_t) {
    std::sort(v.begin(), v.end());
    o.detail += "t=" + num(t) + ":";
    for (std::size_t k = 0; k < v.size(); ++k) {
      o.detail += " " + num(v[k].second, 3);
      if (k > 0 && !(v[k].second < v[k - 1].second)) o.passed = false;
    }
    if (v.size() != 4 || v.back().first != 400 || !(v.back().second < 0.05)) o.passed = false;
    o.detail += "; ";
  }
  return o;
}

Outcome hydrostatic_points(const Context& ctx) {
  Outcome o{true, ""};
  for (const char* file : {"tasep_hydrostatic.json", "overtaking_hydrostatic.json"}) {
    const Report r = run_hydrostatic_experiment(config(ctx, file));
    o.passed = o.passed && r.passed;
    const Table& t = r.tables.front();
    o.detail += std::string(file).substr(0, std::string(file).find('_')) + ":";
    for (const auto& row : t.rows)
      o.detail += " (" + num(std::stod(row[1])) + "," + num(std::stod(row[2])) + ")->" + num(std::stod(row[3])) +
                  " vs " + num(std::stod(row[5])) + " " + row[6] + (row[11] == "1" ? "" : " FAIL");
    o.detail += "; ";
  }
  return o;
}

Outcome phase_counts(const Context& ctx) {
  const auto tasep = config(ctx, "tasep_phases.json");
  const PhaseDiagram d = phase_diagram(config_flux(tasep), tasep.phase_resolution, ctx.workers);
  int coexist = 0, off_line = 0;
  for (const auto& p : d.points)
    if (p.label == PhaseLabel::Coexistence) {
      ++coexist;
      if (std::abs(p.lambda_a + p.lambda_b - 1.0) > 1e-9 || !(p.lambda_a < 0.5)) ++off_line;
    }
  const Report hump = run_phases(config(ctx, "double_hump_phases.json"));
  const int hump_count = hump.summary["phase_count"].get<int>();
  Outcome o;
  o.passed = d.phase_count == 3 && coexist > 0 && off_line == 0 && hump_count == 7 &&
             hump.summary["components"]["LD"] == 2 && hump.summary["components"]["HD"] == 2 &&
             hump.summary["components"]["MC"] == 2 && hump.summary["components"]["mC"] == 1;
  o.detail = "TASEP " + std::to_string(d.phase_count) + " phases, " + std::to_string(coexist) +
             " coexistence points (" + std::to_string(off_line) + " off the line); double hump " +
             std::to_string(hump_count) + " phases " + hump.summary["components"].dump();
  return o;
}

Outcome stationary_solution(const Context&) {
  const FluxTable f = tabulate_flux([](double r) { return r * (1 - r); }, 1.0);
  const StationaryProfile p = build_stationary_profile(f, 0.3, 0.7, {0.0, 0.5, 1.0}, {0.3, 0.7});
  const StationaryCheck c = verify_stationary(p, f);
  Outcome o;
  o.passed = c.audit.passed && c.drift < 0.02;
  o.detail = "audit margin " + num(c.audit.worst_margin, 3) + (c.audit.passed ? " pass" : " FAIL") + ", L1 drift " +
             num(c.drift, 3) + " after t=" + num(c.crossing_time, 3);
  return o;
}

Outcome perturbed_domain(const Context& ctx) {
  const Report r = run_hydrostatic_experiment(config(ctx, "notched_overtaking.json"));
  Outcome o{r.passed, ""};
  for (const auto& row : r.tables.front().rows)
    o.detail += "(" + num(std::stod(row[1])) + "," + num(std::stod(row[2])) + ") " + row[6] + " bulk " +
                num(std::stod(row[3])) + " left collar " + num(std::stod(row[9])) + (row[11] == "1" ? "; " : " FAIL; ");
  return o;
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    out[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return out;
}

Outcome reproducibility(const Context& ctx) {
  const std::vector<std::pair<std::string, std::string>> runs{{"simulate", "tasep_convergence.json"},
                                                              {"solve", "tasep_solve.json"},
                                                              {"phases", "double_hump_phases.json"},
                                                              {"hydrostatic", "notched_overtaking.json"}};
  std::array<fs::path, 2> dirs{ctx.out / "repro_1", ctx.out / "repro_2"};
  for (int k = 0; k < 2; ++k) {
    fs::remove_all(dirs[k]);
    for (const auto& [cmd, file] : runs) {
      const std::string line = std::string("\"") + LATGAS_CLI_PATH + "\" " + cmd + " --config \"" +
                               (ctx.configs / file).string() + "\" --workers " + std::to_string(k == 0 ? 1 : 3) +
                               " --out \"" + dirs[k].string() + "\" > /dev/null";
      const int rc = std::system(line.c_str());
      if (rc != 0) return {false, cmd + " exited with status " + std::to_string(rc)};
    }
  }
  const auto a = directory_bytes(dirs[0]), b = directory_bytes(dirs[1]);
  std::size_t bytes = 0;
  for (const auto& [_, v] : a) bytes += v.size();
  return {!a.empty() && a == b, std::to_string(a.size()) + " files (" + std::to_string(bytes) +
                                    " bytes) from two CLI invocations with different worker counts" +
                                    (a == b ? " identical" : " DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Context ctx;
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--workers", ctx.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Scratch output directory");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  ctx.out = out;
  fs::create_directories(ctx.out);

  const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria{
      {"exact coupling invariants", coupling_invariants},
      {"marginal stationarity", marginal_stationarity},
      {"flux oracle equivalence", flux_oracle},
      {"PDE verification", pde_verification},
      {"hydrodynamic convergence", hydro_convergence},
      {"hydrostatic phase points", hydrostatic_points},
      {"phase-count reproduction", phase_counts},
      {"stationary-solution validation", stationary_solution},
      {"perturbed-domain robustness", perturbed_domain},
      {"reproducibility", reproducibility}};

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.passed) ++failed;
    std::printf("[%s] %2d %s: %s (%.0fs)\n", o.passed ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
