#include "latgas/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "latgas/equilibrium.hpp"
#include "latgas/parallel.hpp"
#include "latgas/particle_models.hpp"

namespace latgas {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config parsing.

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

Point parse_point(const json& j) {
  const auto v = j.get<std::vector<int>>();
  Point p(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p(static_cast<int>(i)) = v[i];
  return p;
}

JumpKernel parse_kernel(const json& j, int dim) {
  if (j.is_string()) {
    if (j.get<std::string>() == "tasep") return totally_asymmetric_kernel(dim);
    throw ConfigError("unknown kernel preset: " + j.get<std::string>());
  }
  JumpKernel k;
  k.dim = dim;
  for (const auto& e : j) {
    KernelEntry ke{parse_point(e.at("z")), e.at("p").get<double>()};
    if (ke.z.size() != dim) throw ConfigError("kernel displacement dimension mismatch");
    k.support.push_back(ke);
  }
  if (k.support.empty()) throw ConfigError("empty jump kernel");
  return k;
}

Eigen::MatrixXd parse_matrix(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw ConfigError("empty rate table");
  Eigen::MatrixXd m(rows.size(), rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) throw ConfigError("rate table must be square");
    for (std::size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

FluxTable parse_flux(const json& j, const fs::path& base) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "polynomial") {
    const auto c = j.at("coefficients").get<std::vector<double>>();
    const double upper = get_or(j, "upper", 1.0);
    return tabulate_flux(
        [c](double r) {
          double s = 0.0;
          for (std::size_t k = c.size(); k-- > 0;) s = s * r + c[k];
          return s;
        },
        upper);
  }
  if (type == "csv") {
    const fs::path p = base / j.at("file").get<std::string>();
    std::ifstream in(p);
    if (!in) throw ConfigError("flux file not found: " + p.string());
    return read_flux_csv(in);
  }
  throw ConfigError("unknown flux type: " + type);
}

}  // namespace

ModelSpec parse_model(const json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    const int dim = get_or(j, "dim", 1);
    ModelSpec m;
    if (type == "exclusion") {
      m = exclusion_model(parse_kernel(j.at("kernel"), dim), get_or(j, "capacity", 1));
    } else if (type == "zero_range") {
      m = zero_range_model(parse_kernel(j.at("kernel"), dim), j.at("g").get<std::vector<double>>(),
                           get_or(j, "working_cap", 64));
    } else if (type == "table") {
      const json& cap = j.at("capacity");
      const int K = cap.is_string() ? kUnbounded : cap.get<int>();
      m = table_model(parse_kernel(j.at("kernel"), dim), K, parse_matrix(j.at("rates")));
    } else if (type == "overtaking") {
      m = overtaking_model(dim, j.at("weights").get<std::vector<std::vector<double>>>());
    } else {
      throw ConfigError("unknown model type: " + type);
    }
    if (j.contains("name")) m.name = j.at("name").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

PerturbedDomain parse_domain(const json& j, std::string* shape_out, double* width_out) {
  try {
    const auto n = j.at("normal").get<std::vector<double>>();
    Eigen::VectorXd normal = Eigen::Map<const Eigen::VectorXd>(n.data(), static_cast<Eigen::Index>(n.size()));
    const SlabDomain slab(normal, get_or(j, "a", 0.0), get_or(j, "b", 1.0));
    const std::string shape = get_or<std::string>(j, "shape", "slab");
    const double width = get_or(j, "width", 1.0);
    if (shape_out) *shape_out = shape;
    if (width_out) *width_out = width;
    if (shape == "slab") return as_domain(slab);
    const double a_outer = j.at("a_outer").get<double>();
    if (shape == "notched") return notched_slab(slab, a_outer, width);
    if (shape == "bumped") return bumped_slab(slab, a_outer, width);
    throw ConfigError("unknown domain shape: " + shape);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }
}

ExperimentConfig parse_config(const json& j, const fs::path& base) {
  ExperimentConfig c;
  c.raw = j;
  try {
    if (j.contains("model_file")) {
      const fs::path p = base / j.at("model_file").get<std::string>();
      std::ifstream in(p);
      if (!in) throw ConfigError("model file not found: " + p.string());
      json m;
      try {
        in >> m;
      } catch (const json::exception& e) {
        throw ConfigError("model file: " + std::string(e.what()));
      }
      c.model = parse_model(m);
      c.raw["model"] = m;
      c.raw.erase("model_file");
    } else if (j.contains("model")) {
      c.model = parse_model(j.at("model"));
    } else {
      throw ConfigError("config needs a model or model_file");
    }

    json dom = j.value("domain", json{{"normal", std::vector<double>(c.model.dim(), 0.0)}});
    if (!j.contains("domain")) dom["normal"][0] = 1.0;
    c.domain = parse_domain(dom, &c.domain_shape, &c.width);
    if (c.domain.inner.dim() != c.model.dim()) throw ConfigError("domain and model dimensions differ");

    const double K = c.model.capacity() == kUnbounded ? std::numeric_limits<double>::infinity() : c.model.capacity();
    auto check_density = [K](double v, const char* what) {
      if (!(v >= 0.0 && v <= K)) throw ConfigError(std::string(what) + " outside [0, K]");
    };
    if (j.contains("boundary")) {
      c.lambda_a = j["boundary"].at("lambda_a").get<double>();
      c.lambda_b = j["boundary"].at("lambda_b").get<double>();
    }
    check_density(c.lambda_a, "lambda_a");
    check_density(c.lambda_b, "lambda_b");

    if (j.contains("initial")) {
      const json& ini = j["initial"];
      const std::string t = ini.at("type").get<std::string>();
      if (t == "constant") {
        c.initial.kind = InitialSpec::Kind::Constant;
        c.initial.value = ini.at("value").get<double>();
        check_density(c.initial.value, "initial value");
      } else if (t == "step") {
        c.initial.kind = InitialSpec::Kind::Step;
        c.initial.left = ini.at("left").get<double>();
        c.initial.right = ini.at("right").get<double>();
        c.initial.at = get_or(ini, "at", 0.5 * (c.domain.inner.a + c.domain.inner.b));
        check_density(c.initial.left, "initial left");
        check_density(c.initial.right, "initial right");
      } else if (t != "boundary-mean") {
        throw ConfigError("unknown initial type: " + t);
      }
    }

    if (j.contains("N")) c.N = j["N"].is_array() ? j["N"].get<std::vector<int>>() : std::vector<int>{j["N"].get<int>()};
    if (c.N.empty()) throw ConfigError("N list is empty");
    for (int n : c.N)
      if (n < 4) throw ConfigError("N values must be >= 4");
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    c.replicas = get_or(j, "replicas", 1);
    if (c.replicas < 1) throw ConfigError("replicas must be >= 1");
    if (j.contains("times")) c.times = j["times"].get<std::vector<double>>();
    for (double t : c.times)
      if (!(t >= 0.0)) throw ConfigError("times must be nonnegative");
    c.cell_width = get_or(j, "cell_width", 0.02);
    if (!(c.cell_width > 0.0)) throw ConfigError("cell_width must be positive");

    if (j.contains("pde")) {
      const json& p = j["pde"];
      c.pde_dx = get_or(p, "dx", c.pde_dx);
      c.pde_cfl = get_or(p, "cfl", c.pde_cfl);
      c.pde_t_end = get_or(p, "t_end", c.pde_t_end);
      c.flux_upper = get_or(p, "upper", c.flux_upper);
    }
    if (!(c.pde_dx > 0.0)) throw ConfigError("pde.dx must be positive");
    if (!(c.pde_cfl > 0.0 && c.pde_cfl <= 0.9)) throw ConfigError("pde.cfl must lie in (0, 0.9]");
    if (c.model.capacity() == kUnbounded && c.flux_upper <= 0.0) c.flux_upper = 10.0;

    if (j.contains("stationary")) {
      const json& s = j["stationary"];
      c.stationary.burn_in = get_or(s, "burn_in", c.stationary.burn_in);
      c.stationary.horizon = get_or(s, "horizon", c.stationary.horizon);
      c.stationary.sample_dt = get_or(s, "sample_dt", c.stationary.sample_dt);
      c.stationary.replicas = get_or(s, "replicas", c.stationary.replicas);
      if (!(c.stationary.burn_in < c.stationary.horizon)) throw ConfigError("stationary burn_in must precede horizon");
    }
    c.stationary.cell_width = c.cell_width;

    if (j.contains("hydrostatic")) {
      const json& h = j["hydrostatic"];
      if (h.contains("points"))
        for (const auto& p : h["points"]) {
          const auto v = p.get<std::vector<double>>();
          if (v.size() != 2) throw ConfigError("hydrostatic points are (lambda_a, lambda_b) pairs");
          check_density(v[0], "point lambda_a");
          check_density(v[1], "point lambda_b");
          c.points.emplace_back(v[0], v[1]);
        }
      c.bulk_tolerance = get_or(h, "tolerance", c.bulk_tolerance);
      c.collar_tolerance = get_or(h, "collar_tolerance", c.collar_tolerance);
    }
    if (c.points.empty()) c.points.emplace_back(c.lambda_a, c.lambda_b);

    if (j.contains("phases")) {
      const json& p = j["phases"];
      c.phase_resolution = get_or(p, "resolution", c.phase_resolution);
      c.expected_phases = get_or(p, "expected", -1);
      if (p.contains("flux")) {
        c.phase_flux = p["flux"];
        if (c.phase_flux.value("type", "") == "csv" && !fs::exists(base / c.phase_flux.at("file").get<std::string>()))
          throw ConfigError("phase flux file not found");
        c.phase_flux["base"] = base.string();
      }
    }
    if (j.contains("convergence")) c.max_distance = get_or(j["convergence"], "max_distance", -1.0);
    if (j.contains("coupling")) {
      const json& k = j["coupling"];
      c.coupling.c = get_or(k, "c", c.coupling.c);
      c.coupling.events = get_or<std::uint64_t>(k, "events", c.coupling.events);
      c.coupling.probes = get_or(k, "probes", c.coupling.probes);
      c.coupling.replicas = get_or(k, "replicas", c.coupling.replicas);
      c.coupling.marginal_density = get_or(k, "marginal_density", c.coupling.marginal_density);
      c.coupling.marginal_t_end = get_or(k, "marginal_t_end", c.coupling.marginal_t_end);
      c.coupling.marginal_N = get_or(k, "marginal_N", c.coupling.marginal_N);
      if (c.coupling.c >= 0.0) {
        check_density(c.coupling.c, "coupling.c");
        if (c.coupling.c < std::max(c.lambda_a, c.lambda_b)) throw ConfigError("coupling.c must dominate the boundary data");
      }
    }
    c.workers = get_or(j, "workers", 1);
    c.output_dir = get_or<std::string>(j, "output_dir", "out");
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

MacroField initial_field(const ExperimentConfig& cfg) {
  const SlabDomain slab = cfg.domain.inner;
  const InitialSpec ini = cfg.initial;
  const double mean = 0.5 * (cfg.lambda_a + cfg.lambda_b);
  switch (ini.kind) {
    case InitialSpec::Kind::Constant: return [v = ini.value](const Eigen::VectorXd&) { return v; };
    case InitialSpec::Kind::Step:
      return [slab, ini](const Eigen::VectorXd& x) { return slab_coordinates(slab, x) < ini.at ? ini.left : ini.right; };
    default: return [mean](const Eigen::VectorXd&) { return mean; };
  }
}

FluxTable config_flux(const ExperimentConfig& cfg) {
  return normal_flux(cfg.model, cfg.domain.inner.normal, cfg.flux_upper);
}

LatticeDomain config_lattice(const ExperimentConfig& cfg, int N) {
  LatticeDomain L = discretize(cfg.domain, N, cfg.model.range(), cfg.width);
  two_sided_reservoir(L, cfg.lambda_a, cfg.lambda_b, cfg.model.capacity());
  return L;
}

// ---------------------------------------------------------------------------
// Reports.

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(long long v) { return std::to_string(v); }

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  json j = cfg.raw;
  j.erase("workers");
  j.erase("output_dir");
  j["seed"] = cfg.seed;
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<fs::path> emit_report(const Report& report, const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  std::vector<fs::path> written;
  for (const Table& t : report.tables) {
    const fs::path p = out_dir / (report.command + "-" + t.name + "-" + hash + ".csv");
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
    os << '\n';
    for (const auto& r : t.rows) {
      for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
      os << '\n';
    }
    written.push_back(p);
  }
  json s = report.summary;
  s["command"] = report.command;
  s["passed"] = report.passed;
  s["config_hash"] = hash;
  const fs::path p = out_dir / (report.command + "-" + hash + ".json");
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s.dump(2) << '\n';
  written.push_back(p);
  return written;
}

// ---------------------------------------------------------------------------
// Experiments.

namespace {

std::uint64_t work_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return Rng::stream(master, splitmix64(a) ^ (b * 0x9e3779b97f4a7c15ULL)).next();
}

// Exact average of a piecewise-constant grid over [x0, x1].
double average_on(const Grid1D& g, const Eigen::VectorXd& u, double x0, double x1) {
  double s = 0.0;
  const int i0 = std::clamp(static_cast<int>(std::floor((x0 - g.a) / g.dx)), 0, g.cells() - 1);
  const int i1 = std::clamp(static_cast<int>(std::floor((x1 - g.a) / g.dx)), 0, g.cells() - 1);
  for (int i = i0; i <= i1; ++i) {
    const double l = std::max(x0, g.a + i * g.dx), r = std::min(x1, g.a + (i + 1) * g.dx);
    if (r > l) s += u(i) * (r - l);
  }
  return s / (x1 - x0);
}

std::vector<double> sorted_times(const ExperimentConfig& cfg) {
  std::vector<double> t = cfg.times;
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

PhaseLabel nearest_label(const PhasePoint& p, const FluxTable& flux, double bulk) {
  PhaseLabel best = PhaseLabel::LD;
  double dist = std::abs(bulk - p.lambda_a_f);
  if (std::abs(bulk - p.lambda_b_f) < dist) {
    dist = std::abs(bulk - p.lambda_b_f);
    best = PhaseLabel::HD;
  }
  const double lo = std::min(p.lambda_a_f, p.lambda_b_f), hi = std::max(p.lambda_a_f, p.lambda_b_f);
  for (const auto& e : flux.extrema)
    if (e.rho > lo && e.rho < hi && std::abs(bulk - e.rho) < dist) {
      dist = std::abs(bulk - e.rho);
      best = e.is_max ? PhaseLabel::MC : PhaseLabel::mC;
    }
  return best;
}

}  // namespace

Report run_validate(const ExperimentConfig& cfg) {
  Report r;
  r.command = "validate";
  const ValidationReport v = validate_model(cfg.model);
  Table t{"conditions", {"condition", "passed", "detail"}, {}};
  for (const auto& item : v.items) t.add({item.condition, item.passed ? "1" : "0", "\"" + item.detail + "\""});
  r.tables.push_back(std::move(t));
  r.passed = v.ok();
  r.summary["model"] = cfg.model.name;
  r.summary["conditions"] = v.items.size();
  return r;
}

Report run_simulate(const ExperimentConfig& cfg) {
  Report r;
  r.command = "simulate";
  const std::vector<double> times = sorted_times(cfg);
  const MacroField rho0 = initial_field(cfg);
  Table prof{"profiles", {"N", "t", "x", "density", "stderr"}, {}};
  Table events{"events", {"N", "events", "jumps", "births", "deaths"}, {}};
  for (int N : cfg.N) {
    const OpenSystem sys(cfg.model, config_lattice(cfg, N));
    std::vector<std::vector<Eigen::VectorXd>> per(cfg.replicas);
    std::vector<EventLedger> ledgers(cfg.replicas);
    parallel_for(cfg.replicas, cfg.workers, [&](int k) {
      SimState st = sys.init_from_profile(rho0, work_seed(cfg.seed, N, k));
      for (double t : times) {
        sys.run(st, t, &ledgers[k]);
        per[k].push_back(empirical_density(sys.lattice(), st.eta, cfg.cell_width).values);
      }
    });
    const DensityProfile shape = empirical_density(sys.lattice(), std::vector<int>(sys.lattice().num_sites(), 0), cfg.cell_width);
    for (std::size_t ti = 0; ti < times.size(); ++ti)
      for (int c = 0; c < shape.cells(); ++c) {
        Eigen::VectorXd v(cfg.replicas);
        for (int k = 0; k < cfg.replicas; ++k) v(k) = per[k][ti](c);
        const double m = v.mean();
        const double se = cfg.replicas > 1 ? std::sqrt((v.array() - m).square().sum() / (cfg.replicas - 1) / cfg.replicas) : 0.0;
        prof.add({fmt(static_cast<long long>(N)), fmt(times[ti]), fmt(shape.center(c)), fmt(m), fmt(se)});
      }
    EventLedger tot;
    for (const auto& l : ledgers) {
      tot.events += l.events;
      tot.jumps += l.jumps;
      tot.births += l.births;
      tot.deaths += l.deaths;
    }
    events.add({fmt(static_cast<long long>(N)), fmt(static_cast<long long>(tot.events)),
                fmt(static_cast<long long>(tot.jumps)), fmt(static_cast<long long>(tot.births)),
                fmt(static_cast<long long>(tot.deaths))});
  }
  r.tables.push_back(std::move(prof));
  r.tables.push_back(std::move(events));
  r.summary["replicas"] = cfg.replicas;
  return r;
}

Report run_solve(const ExperimentConfig& cfg) {
  Report r;
  r.command = "solve";
  const std::vector<double> times = sorted_times(cfg);
  const double t_end = cfg.pde_t_end > 0.0 ? cfg.pde_t_end : (times.empty() ? 1.0 : times.back());
  SolveOptions so;
  so.dx = cfg.pde_dx;
  so.cfl = cfg.pde_cfl;
  so.snapshot_times = times;
  so.assert_max_principle = false;
  const SlabSolution sol = solve_slab(cfg.model, cfg.domain.inner, initial_field(cfg), cfg.lambda_a, cfg.lambda_b,
                                      t_end, so, cfg.flux_upper);
  AuditOptions ao;
  ao.workers = cfg.workers;
  const EntropyReport audit = entropy_audit(sol.trajectory, sol.flux, ao);

  Table snaps{"snapshots", {"t", "x_center", "u"}, {}};
  for (const auto& s : sol.trajectory.snapshots)
    for (int i = 0; i < s.u.size(); ++i)
      snaps.add({fmt(s.t), fmt(sol.trajectory.initial.center(i)), fmt(s.u(i))});
  Table aud{"audit", {"sign", "c", "phi_id", "residual"}, {}};
  for (const auto& row : audit.rows)
    aud.add({row.sign > 0 ? "+" : "-", fmt(row.c), fmt(static_cast<long long>(row.phi_id)), fmt(row.residual)});
  Table flux{"flux", {"rho", "f"}, {}};
  for (int i = 0; i < sol.flux.grid.size(); ++i) flux.add({fmt(sol.flux.grid(i)), fmt(sol.flux.values(i))});
  r.tables = {std::move(snaps), std::move(aud), std::move(flux)};

  r.summary["t_end"] = t_end;
  r.summary["steps"] = sol.trajectory.steps;
  r.summary["mass_balance_error"] = sol.trajectory.mass_balance_error;
  r.summary["max_principle_violation"] = sol.trajectory.max_principle_violation;
  r.summary["audit_M"] = audit.M;
  r.summary["audit_worst_residual"] = audit.worst;
  r.summary["audit_worst_margin"] = audit.worst_margin;
  r.summary["audit_passed"] = audit.passed;
  r.passed = sol.trajectory.mass_balance_error <= 1e-12 && sol.trajectory.max_principle_violation <= 1e-12 && audit.passed;
  return r;
}

Report run_phases(const ExperimentConfig& cfg) {
  Report r;
  r.command = "phases";
  const FluxTable flux = cfg.phase_flux.is_null()
                             ? config_flux(cfg)
                             : parse_flux(cfg.phase_flux, fs::path(cfg.phase_flux.value("base", ".")));
  const PhaseDiagram d = phase_diagram(flux, cfg.phase_resolution, cfg.workers);
  Table t{"diagram", {"lambda_a", "lambda_b", "bulk", "label"}, {}};
  for (const auto& p : d.points) t.add({fmt(p.lambda_a), fmt(p.lambda_b), fmt(p.bulk), to_string(p.label)});
  r.tables.push_back(std::move(t));
  json comps = json::object();
  for (const auto& [l, n] : d.components) comps[to_string(l)] = n;
  r.summary["components"] = comps;
  r.summary["phase_count"] = d.phase_count;
  r.summary["resolution"] = d.resolution;
  r.passed = cfg.expected_phases < 0 || d.phase_count == cfg.expected_phases;
  return r;
}

Report run_hydrostatic_experiment(const ExperimentConfig& cfg) {
  Report r;
  r.command = "hydrostatic";
  const FluxTable flux = config_flux(cfg);
  const bool perturbed = cfg.domain_shape != "slab";
  Table t{"bulk",
          {"N", "lambda_a", "lambda_b", "bulk", "stderr", "R_f", "label", "simulated_label", "nonstationary",
           "left_collar", "right_collar", "passed"},
          {}};
  int failures = 0, flagged = 0;
  for (int N : cfg.N)
    for (std::size_t pi = 0; pi < cfg.points.size(); ++pi) {
      const auto [la, lb] = cfg.points[pi];
      ExperimentConfig local = cfg;
      local.lambda_a = la;
      local.lambda_b = lb;
      const OpenSystem sys(cfg.model, config_lattice(local, N));
      const PhasePoint pp = bulk_density(flux, la, lb);
      StationaryOptions so = cfg.stationary;
      so.seed = work_seed(cfg.seed, N, pi);
      so.workers = cfg.workers;

      std::optional<DomainPrediction> pred;
      if (perturbed && pp.unique) {
        pred = perturbed_domain_prediction(flux, la, lb, cfg.domain);
        for (DomainRegion reg : {DomainRegion::LeftCollar, DomainRegion::RightCollar}) {
          std::vector<int> sites;
          for (int x = 0; x < sys.lattice().num_sites(); ++x)
            if (pred->region(sys.lattice().position(x)) == reg) sites.push_back(x);
          so.observables.push_back([sites](const LatticeDomain&, const std::vector<int>& eta) {
            if (sites.empty()) return std::numeric_limits<double>::quiet_NaN();
            double s = 0.0;
            for (int x : sites) s += eta[x];
            return s / static_cast<double>(sites.size());
          });
        }
      }
      const MacroField rho0 = initial_field(local);
      const StationaryEstimate est = stationary_profile(sys, rho0, so);
      if (est.nonstationary) ++flagged;

      std::string verdict = "n/a";
      std::string sim_label = "n/a";
      double left = std::numeric_limits<double>::quiet_NaN(), right = left;
      if (pp.unique) {
        const PhaseLabel sl = nearest_label(pp, flux, est.bulk);
        sim_label = to_string(sl);
        bool ok = std::abs(est.bulk - pp.bulk) <= cfg.bulk_tolerance && sl == pp.label;
        if (pred) {
          left = est.observable_mean[0];
          right = est.observable_mean[1];
          if (std::isfinite(left)) ok = ok && pred->left_collar.contains(left, cfg.collar_tolerance);
          if (std::isfinite(right)) ok = ok && pred->right_collar.contains(right, cfg.collar_tolerance);
        }
        verdict = ok ? "1" : "0";
        if (!ok) ++failures;
      }
      t.add({fmt(static_cast<long long>(N)), fmt(la), fmt(lb), fmt(est.bulk), fmt(est.bulk_stderr), fmt(pp.bulk),
             to_string(pp.label), sim_label, est.nonstationary ? "1" : "0", fmt(left), fmt(right), verdict});
    }
  r.tables.push_back(std::move(t));
  r.summary["failures"] = failures;
  r.summary["nonstationary_flags"] = flagged;
  r.passed = failures == 0;
  return r;
}

Report run_coupling_audit(const ExperimentConfig& cfg) {
  Report r;
  r.command = "couple-audit";
  const int N = cfg.N.front();
  const double K = cfg.model.capacity() == kUnbounded ? std::max(1.0, cfg.flux_upper) : cfg.model.capacity();
  const double top = std::max(cfg.lambda_a, cfg.lambda_b);
  const double c_order = cfg.coupling.c >= 0.0 ? cfg.coupling.c : std::min(K, top + 0.1 * K);
  const MacroField rho0 = initial_field(cfg);
  const SlabDomain slab = cfg.domain.inner;
  const MacroField phi = [slab](const Eigen::VectorXd& x) {
    const double s = (slab_coordinates(slab, x) - 0.5 * (slab.a + slab.b)) / (0.5 * (slab.b - slab.a));
    return std::abs(s) < 1.0 ? (1 - s * s) * (1 - s * s) : 0.0;
  };

  Table ledger{"ledger", {"run", "c", "events", "joint", "eta_only", "xi_only", "order_violations"}, {}};
  Table monitor{"monitor", {"run", "t", "phi_plus", "phi_minus"}, {}};
  std::uint64_t violations = 0, total_events = 0;
  const std::uint64_t per_run = cfg.coupling.events / 2;
  int run_id = 0;
  for (const auto& [name, c] : {std::pair<std::string, double>{"order", c_order}, {"domination", top}}) {
    const CoupledSystem sys(cfg.model, config_lattice(cfg, N), c);
    const MacroField lower = [rho0, c](const Eigen::VectorXd& x) { return std::min(rho0(x), c); };
    const MacroField upper = [c](const Eigen::VectorXd&) { return c; };
    CoupledState st = sys.init_coupled(lower, upper, work_seed(cfg.seed, 0xC0, run_id++));
    CoupledLedger led;
    constexpr int kChunks = 20;
    for (int k = 0; k < kChunks; ++k) {
      const std::uint64_t target = per_run * (k + 1) / kChunks - led.events;
      sys.run(st, std::numeric_limits<double>::infinity(), &led, target, true, false);
      monitor.add({name, fmt(st.t_macro), fmt(kruzkov_monitor(sys.lattice(), st.eta, st.xi, phi, +1)),
                   fmt(kruzkov_monitor(sys.lattice(), st.eta, st.xi, phi, -1))});
      if (target == 0) break;
    }
    violations += led.order_violations;
    total_events += led.events;
    ledger.add({name, fmt(c), fmt(static_cast<long long>(led.events)), fmt(static_cast<long long>(led.joint)),
                fmt(static_cast<long long>(led.eta_only)), fmt(static_cast<long long>(led.xi_only)),
                fmt(static_cast<long long>(led.order_violations))});
  }

  // Stationarity of the product measure under a uniform reservoir.
  const double m = cfg.coupling.marginal_density >= 0.0 ? cfg.coupling.marginal_density : 0.5 * K;
  const int Nm = cfg.coupling.marginal_N > 0 ? cfg.coupling.marginal_N : N;
  LatticeDomain Lm = discretize(cfg.domain, Nm, cfg.model.range(), cfg.width);
  two_sided_reservoir(Lm, m, m, cfg.model.capacity());
  const CoupledSystem msys(cfg.model, Lm, m);
  const int P = cfg.coupling.probes;
  std::vector<int> probes;
  for (int k = 1; k <= P; ++k) probes.push_back(static_cast<int>(static_cast<long>(Lm.num_sites()) * k / (P + 1)));
  const int R = cfg.coupling.replicas;
  Eigen::MatrixXd xi_vals(R, P), eta_vals(R, P);
  std::vector<double> phi_equal(R, 0.0);
  const MacroField flat_m = [m](const Eigen::VectorXd&) { return m; };
  parallel_for(R, cfg.workers, [&](int k) {
    CoupledState st = msys.init_coupled(flat_m, flat_m, work_seed(cfg.seed, 0xA1, k));
    msys.run(st, cfg.coupling.marginal_t_end, nullptr, std::numeric_limits<std::uint64_t>::max(), true, false);
    for (int p = 0; p < P; ++p) {
      xi_vals(k, p) = st.xi[probes[p]];
      eta_vals(k, p) = st.eta[probes[p]];
    }
    phi_equal[k] = kruzkov_monitor(msys.lattice(), st.eta, st.xi, phi, +1) +
                   kruzkov_monitor(msys.lattice(), st.eta, st.xi, phi, -1);
  });
  Table probe_t{"probes", {"site", "x", "xi_mean", "xi_stderr", "eta_mean", "eta_stderr", "passed"}, {}};
  int probe_fail = 0;
  auto mean_se = [R](const Eigen::VectorXd& v) {
    const double mu = v.mean();
    return std::pair{mu, std::sqrt((v.array() - mu).square().sum() / (R - 1) / R)};
  };
  for (int p = 0; p < P; ++p) {
    const auto [xm, xs] = mean_se(xi_vals.col(p));
    const auto [em, es] = mean_se(eta_vals.col(p));
    const bool ok = std::abs(xm - m) <= 3.0 * xs;
    if (!ok) ++probe_fail;
    probe_t.add({fmt(static_cast<long long>(probes[p])), fmt(Lm.position(probes[p])(0)), fmt(xm), fmt(xs), fmt(em), fmt(es),
                 ok ? "1" : "0"});
  }
  const double phi_equal_max = *std::max_element(phi_equal.begin(), phi_equal.end());
  r.tables = {std::move(ledger), std::move(monitor), std::move(probe_t)};
  r.summary["coupled_events"] = total_events;
  r.summary["order_violations"] = violations;
  r.summary["probe_failures"] = probe_fail;
  r.summary["marginal_density"] = m;
  r.summary["equal_start_monitor_max"] = phi_equal_max;
  r.passed = violations == 0 && probe_fail == 0 && phi_equal_max == 0.0;
  return r;
}

std::vector<ConvergenceRow> hydrodynamic_rows(const ExperimentConfig& cfg) {
  const std::vector<double> times = sorted_times(cfg);
  const MacroField rho0 = initial_field(cfg);
  SolveOptions so;
  so.dx = cfg.pde_dx;
  so.cfl = cfg.pde_cfl;
  so.snapshot_times = times;
  const SlabSolution pde = solve_slab(cfg.model, cfg.domain.inner, rho0, cfg.lambda_a, cfg.lambda_b,
                                      times.empty() ? 0.0 : times.back(), so, cfg.flux_upper);
  std::vector<ConvergenceRow> rows;
  for (int N : cfg.N) {
    const OpenSystem sys(cfg.model, config_lattice(cfg, N));
    const int R = cfg.replicas;
    std::vector<std::vector<Eigen::VectorXd>> per(R);
    parallel_for(R, cfg.workers, [&](int k) {
      SimState st = sys.init_from_profile(rho0, work_seed(cfg.seed, N, k));
      for (double t : times) {
        sys.run(st, t);
        per[k].push_back(empirical_density(sys.lattice(), st.eta, cfg.cell_width).values);
      }
    });
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const Grid1D g = pde.trajectory.grid_at(times[ti]);
      const DensityProfile shape =
          empirical_density(sys.lattice(), std::vector<int>(sys.lattice().num_sites(), 0), cfg.cell_width);
      Eigen::VectorXd ref(shape.cells());
      for (int c = 0; c < shape.cells(); ++c)
        ref(c) = average_on(g, g.u, shape.origin + c * shape.cell_width, shape.origin + (c + 1) * shape.cell_width);
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(shape.cells());
      Eigen::VectorXd dist(R);
      for (int k = 0; k < R; ++k) {
        mean += per[k][ti];
        dist(k) = shape.cell_width * (per[k][ti] - ref).cwiseAbs().sum();
      }
      mean /= R;
      ConvergenceRow row;
      row.N = N;
      row.t = times[ti];
      row.distance = shape.cell_width * (mean - ref).cwiseAbs().sum();
      row.mean_replica_distance = dist.mean();
      row.stderr_ = R > 1 ? std::sqrt((dist.array() - dist.mean()).square().sum() / (R - 1) / R) : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

Report run_hydrodynamic_experiment(const ExperimentConfig& cfg) {
  Report r;
  r.command = "hydro-convergence";
  const std::vector<ConvergenceRow> rows = hydrodynamic_rows(cfg);
  Table t{"convergence", {"N", "t", "distance", "stderr", "mean_replica_distance"}, {}};
  for (const auto& row : rows)
    t.add({fmt(static_cast<long long>(row.N)), fmt(row.t), fmt(row.distance), fmt(row.stderr_),
           fmt(row.mean_replica_distance)});
  r.tables.push_back(std::move(t));

  // Monotone decrease in N at every time, threshold at the largest N.
  std::map<double, std::vector<std::pair<int, double>>> by_t;
  for (const auto& row : rows) by_t[row.t].emplace_back(row.N, row.distance);
  bool monotone = true, below = true;
  for (auto& [t, v] : by_t) {
    std::sort(v.begin(), v.end());
    for (std::size_t k = 1; k < v.size(); ++k) monotone = monotone && v[k].second < v[k - 1].second;
    if (cfg.max_distance > 0.0) below = below && v.back().second < cfg.max_distance;
  }
  r.summary["monotone"] = monotone;
  r.summary["below_threshold"] = below;
  r.passed = monotone && below;
  return r;
}

}  // namespace latgas
