#include "latgas/flux_pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "latgas/equilibrium.hpp"
#include "latgas/parallel.hpp"

namespace latgas {

namespace {

constexpr double kGolden = 0.6180339887498949;

double golden_extremum(const std::function<double(double)>& f, double lo, double hi, bool want_max) {
  const double s = want_max ? -1.0 : 1.0;
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = s * f(x1);
  double f2 = s * f(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = s * f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = s * f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

void finish_table(FluxTable& t) {
  const int n = static_cast<int>(t.grid.size()) - 1;
  t.lipschitz = 0.0;
  for (int i = 0; i < n; ++i)
    t.lipschitz = std::max(t.lipschitz, std::abs(t.values(i + 1) - t.values(i)) / (t.grid(i + 1) - t.grid(i)));
  t.eps_flat = 1e-9 * t.sup_abs();

  auto sgn = [&](int i) {
    const double d = t.values(i + 1) - t.values(i);
    return std::abs(d) <= t.eps_flat ? 0 : (d > 0 ? 1 : -1);
  };
  t.extrema.clear();
  int prev = 0;
  int prev_seg = -1;
  for (int i = 0; i < n; ++i) {
    const int s = sgn(i);
    if (s == 0) continue;
    if (prev != 0 && s != prev) {
      FluxTable::Extremum e;
      e.is_max = prev > 0;
      if (prev_seg + 1 == i) {
        // Isolated vertex at grid i: parabola through i-1, i, i+1.
        const double fm = t.values(i - 1), f0 = t.values(i), fp = t.values(i + 1);
        const double den = fm - 2.0 * f0 + fp;
        const double h = t.grid(i + 1) - t.grid(i);
        double delta = den != 0.0 ? std::clamp(0.5 * (fm - fp) / den, -1.0, 1.0) : 0.0;
        if (t.exact) {
          e.rho = golden_extremum(t.exact, t.grid(i - 1), t.grid(i + 1), e.is_max);
          e.value = t.exact(e.rho);
        } else {
          e.rho = t.grid(i) + delta * h;
          e.value = f0 - 0.25 * (fm - fp) * delta;
        }
      } else {
        // Plateau between grid prev_seg + 1 and grid i.
        e.rho = 0.5 * (t.grid(prev_seg + 1) + t.grid(i));
        e.value = t.values(prev_seg + 1);
      }
      t.extrema.push_back(e);
    }
    prev = s;
    prev_seg = i;
  }
}

double cell_average(const Profile1D& f, double x0, double dx) {
  constexpr int kSub = 16;
  double s = 0.0;
  for (int k = 0; k < kSub; ++k) s += f(x0 + (k + 0.5) * dx / kSub);
  return s / kSub;
}

}  // namespace

double FluxTable::operator()(double rho) const {
  if (exact) return exact(rho);
  const int n = static_cast<int>(grid.size()) - 1;
  if (rho <= grid(0)) return values(0);
  if (rho >= grid(n)) return values(n);
  const double* g = grid.data();
  int i = static_cast<int>(std::upper_bound(g, g + n + 1, rho) - g) - 1;
  i = std::clamp(i, 0, n - 1);
  const double w = (rho - grid(i)) / (grid(i + 1) - grid(i));
  return (1.0 - w) * values(i) + w * values(i + 1);
}

double FluxTable::extreme_on(double lo, double hi, bool want_max) const {
  const FluxTable& f = *this;
  double r = want_max ? std::max(f(lo), f(hi)) : std::min(f(lo), f(hi));
  for (const auto& e : extrema)
    if (e.rho > lo && e.rho < hi) r = want_max ? std::max(r, e.value) : std::min(r, e.value);
  return r;
}

FluxTable tabulate_flux(std::function<double(double)> f, double upper, double drho, bool keep_exact) {
  if (!(upper > 0.0) || !(drho > 0.0)) throw std::invalid_argument("flux range and spacing must be positive");
  const int n = std::max(2, static_cast<int>(std::lround(upper / drho)));
  FluxTable t;
  t.drho = upper / n;
  t.grid = Eigen::VectorXd::LinSpaced(n + 1, 0.0, upper);
  t.values.resize(n + 1);
  for (int i = 0; i <= n; ++i) t.values(i) = f(t.grid(i));
  if (keep_exact) t.exact = std::move(f);
  finish_table(t);
  return t;
}

FluxTable flux_from_samples(const Eigen::VectorXd& rho, const Eigen::VectorXd& f) {
  if (rho.size() != f.size() || rho.size() < 3) throw std::invalid_argument("flux samples need >= 3 matching points");
  if (std::abs(rho(0)) > 1e-12) throw std::invalid_argument("flux samples must start at density 0");
  for (int i = 1; i < rho.size(); ++i)
    if (!(rho(i) > rho(i - 1))) throw std::invalid_argument("flux sample densities must increase");
  FluxTable t;
  t.grid = rho;
  t.values = f;
  t.drho = (rho.tail(rho.size() - 1) - rho.head(rho.size() - 1)).minCoeff();
  finish_table(t);
  return t;
}

void write_flux_csv(std::ostream& os, const FluxTable& flux) {
  os << "rho,f\n";
  char buf[64];
  for (int i = 0; i < flux.grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", flux.grid(i), flux.values(i));
    os << buf;
  }
}

FluxTable read_flux_csv(std::istream& is) {
  std::string line;
  std::vector<double> r, v;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == 'r' || line[0] == '#') continue;
    std::istringstream ss(line);
    double a, b;
    char comma;
    if (!(ss >> a >> comma >> b) || comma != ',') throw std::runtime_error("malformed flux CSV row: " + line);
    r.push_back(a);
    v.push_back(b);
  }
  return flux_from_samples(Eigen::Map<Eigen::VectorXd>(r.data(), r.size()),
                           Eigen::Map<Eigen::VectorXd>(v.data(), v.size()));
}

Eigen::VectorXd misanthrope_flux(const ModelSpec& model, double rho) {
  const Misanthrope& m = model.misanthrope();
  const Eigen::VectorXd gamma = m.kernel.drift();
  if (rho <= 0.0) return Eigen::VectorXd::Zero(gamma.size());
  const SiteMarginal th = marginal_for_density(rho, model);
  const int k = th.k_eff();
  double s = 0.0;
  for (int n = 1; n <= k; ++n)
    for (int j = 0; j <= k; ++j) s += th.probs(n) * th.probs(j) * m.rates(n, j);
  return gamma * s;
}

Eigen::VectorXd overtaking_flux(const ModelSpec& model, double rho) {
  const Overtaking& ov = model.overtaking();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(ov.dim);
  for (int i = 0; i < ov.dim; ++i) {
    double s = 0.0;
    double pw = 1.0;
    for (int j = 1; j <= ov.reach(); ++j) {
      s += j * (ov.beta(2 * i, j) - ov.beta(2 * i + 1, j)) * pw;
      pw *= rho;
    }
    h(i) = rho * (1.0 - rho) * s;
  }
  return h;
}

Eigen::VectorXd model_flux(const ModelSpec& model, double rho) {
  return model.is_overtaking() ? overtaking_flux(model, rho) : misanthrope_flux(model, rho);
}

FluxTable normal_flux(const ModelSpec& model, const Eigen::VectorXd& normal, double upper, double drho) {
  if (normal.size() != model.dim()) throw std::invalid_argument("normal dimension differs from model dimension");
  if (upper <= 0.0) {
    if (model.capacity() == kUnbounded) throw std::invalid_argument("unbounded occupancy needs an explicit upper density");
    upper = model.capacity();
  }
  if (model.is_overtaking()) {
    ModelSpec copy = model;
    Eigen::VectorXd n = normal;
    return tabulate_flux([copy, n](double r) { return overtaking_flux(copy, r).dot(n); }, upper, drho, true);
  }
  const double g = model.misanthrope().kernel.drift().dot(normal);
  ModelSpec copy = model;
  // f = (gamma . n) * sum theta theta b.
  auto f = [copy, g](double r) {
    if (g == 0.0 || r <= 0.0) return 0.0;
    const SiteMarginal th = marginal_for_density(r, copy);
    const auto& rates = copy.misanthrope().rates;
    double s = 0.0;
    for (int n = 1; n <= th.k_eff(); ++n)
      for (int j = 0; j <= th.k_eff(); ++j) s += th.probs(n) * th.probs(j) * rates(n, j);
    return g * s;
  };
  return tabulate_flux(f, upper, drho, false);
}

double godunov_flux(double u, double v, const FluxTable& flux) {
  return u <= v ? flux.extreme_on(u, v, false) : flux.extreme_on(v, u, true);
}

double Grid1D::value(double x) const {
  const int i = std::clamp(static_cast<int>(std::floor((x - a) / dx)), 0, cells() - 1);
  return u(i);
}

Eigen::VectorXd Trajectory::at(double t) const {
  if (!history.empty()) {
    if (t <= times.front()) return history.front();
    if (t >= times.back()) return history.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t m = static_cast<std::size_t>(it - times.begin()) - 1;
    const double w = (t - times[m]) / (times[m + 1] - times[m]);
    return (1.0 - w) * history[m] + w * history[m + 1];
  }
  for (const auto& s : snapshots)
    if (std::abs(s.t - t) < 1e-12) return s.u;
  if (std::abs(t - final.t) < 1e-12) return final.u;
  throw std::out_of_range("time not stored in trajectory");
}

Grid1D Trajectory::grid_at(double t) const {
  Grid1D g = initial;
  g.t = t;
  g.u = at(t);
  return g;
}

Trajectory solve_ibvp(const Profile1D& rho0, double a, double b, double lambda_a, double lambda_b,
                      const FluxTable& flux, double t_end, const SolveOptions& options) {
  if (!(a < b)) throw std::invalid_argument("interval requires a < b");
  if (!(options.dx > 0.0)) throw std::invalid_argument("dx must be positive");
  const int n = std::max(1, static_cast<int>(std::lround((b - a) / options.dx)));
  Grid1D g;
  g.a = a;
  g.b = b;
  g.dx = (b - a) / n;
  g.lambda_a = lambda_a;
  g.lambda_b = lambda_b;
  g.cfl = options.cfl;
  g.u.resize(n);
  for (int i = 0; i < n; ++i) g.u(i) = cell_average(rho0, a + i * g.dx, g.dx);
  return solve_ibvp(g, flux, t_end, options);
}

Trajectory solve_ibvp(const Grid1D& start, const FluxTable& flux, double t_end, const SolveOptions& options) {
  if (!(options.cfl > 0.0 && options.cfl <= 0.9)) throw std::invalid_argument("CFL number must lie in (0, 0.9]");
  if (!(t_end >= 0.0)) throw std::invalid_argument("negative final time");
  const double K = flux.upper();
  auto in_range = [K](double v) { return v >= -1e-12 && v <= K + 1e-12; };
  if (!in_range(start.lambda_a) || !in_range(start.lambda_b))
    throw std::domain_error("boundary data outside [0, K]");
  for (int i = 0; i < start.cells(); ++i)
    if (!in_range(start.u(i))) throw std::domain_error("initial data outside [0, K]");

  Trajectory tr;
  tr.initial = start;
  tr.initial.cfl = options.cfl;
  tr.lipschitz = flux.lipschitz;
  const int n = start.cells();
  const double dx = start.dx;
  const double lo = std::min({start.u.minCoeff(), start.lambda_a, start.lambda_b});
  const double hi = std::max({start.u.maxCoeff(), start.lambda_a, start.lambda_b});
  const double dt_nominal = flux.lipschitz > 0.0 ? options.cfl * dx / flux.lipschitz : std::max(t_end, 1e-300);
  tr.dt = dt_nominal;

  std::vector<double> pending = options.snapshot_times;
  std::sort(pending.begin(), pending.end());
  std::size_t next_snap = 0;
  while (next_snap < pending.size() && pending[next_snap] <= 0.0) {
    tr.snapshots.push_back({pending[next_snap], start.u});
    ++next_snap;
  }

  Eigen::VectorXd u = start.u;
  Eigen::VectorXd un(n);
  Eigen::VectorXd F(n + 1);
  double t = 0.0;
  double boundary_sum = 0.0;
  double boundary_comp = 0.0;
  if (options.keep_history) {
    tr.times.push_back(0.0);
    tr.history.push_back(u);
  }
  while (t < t_end) {
    double dt = dt_nominal;
    if (t + dt >= t_end * (1.0 - 1e-14)) dt = t_end - t;
    F(0) = godunov_flux(start.lambda_a, u(0), flux);
    for (int i = 1; i < n; ++i) F(i) = godunov_flux(u(i - 1), u(i), flux);
    F(n) = godunov_flux(u(n - 1), start.lambda_b, flux);
    const double r = dt / dx;
    for (int i = 0; i < n; ++i) un(i) = u(i) - r * (F(i + 1) - F(i));

    // Kahan sum of dt (G_in - G_out) for the mass ledger.
    const double y = dt * (F(0) - F(n)) - boundary_comp;
    const double s = boundary_sum + y;
    boundary_comp = (s - boundary_sum) - y;
    boundary_sum = s;

    const double excursion = std::max(lo - un.minCoeff(), un.maxCoeff() - hi);
    tr.max_principle_violation = std::max(tr.max_principle_violation, std::max(excursion, 0.0));
    if (options.assert_max_principle && excursion > 1e-12)
      throw std::logic_error("discrete maximum principle violated");

    while (next_snap < pending.size() && pending[next_snap] <= t + dt) {
      const double w = (pending[next_snap] - t) / dt;
      tr.snapshots.push_back({pending[next_snap], (1.0 - w) * u + w * un});
      ++next_snap;
    }
    t += dt;
    u.swap(un);
    ++tr.steps;
    if (options.keep_history) {
      tr.times.push_back(t);
      tr.history.push_back(u);
    }
  }
  while (next_snap < pending.size()) {
    tr.snapshots.push_back({pending[next_snap], u});
    ++next_snap;
  }
  tr.final = start;
  tr.final.cfl = options.cfl;
  tr.final.t = t;
  tr.final.u = u;
  tr.mass_balance_error = std::abs(dx * (u.sum() - start.u.sum()) - boundary_sum);
  return tr;
}

Trajectory trajectory_from_function(const std::function<double(double, double)>& fn, double a, double b,
                                    double lambda_a, double lambda_b, double dx, double dt, double t_end) {
  const int n = std::max(1, static_cast<int>(std::lround((b - a) / dx)));
  Trajectory tr;
  Grid1D g;
  g.a = a;
  g.b = b;
  g.dx = (b - a) / n;
  g.lambda_a = lambda_a;
  g.lambda_b = lambda_b;
  g.u.resize(n);
  auto level = [&](double t) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = fn(t, g.center(i));
    return v;
  };
  g.u = level(0.0);
  tr.initial = g;
  tr.dt = dt;
  double t = 0.0;
  tr.times.push_back(0.0);
  while (t < t_end) {
    const double h = std::min(dt, t_end - t);
    tr.history.push_back(level(t + 0.5 * h));
    t += h;
    tr.times.push_back(t);
    ++tr.steps;
  }
  tr.history.push_back(level(t_end));
  tr.final = g;
  tr.final.t = t_end;
  tr.final.u = tr.history.back();
  return tr;
}

double SlabSolution::value(double t, const Eigen::VectorXd& x) const {
  Grid1D g = trajectory.grid_at(t);
  return g.value(slab_coordinates(slab, x));
}

namespace {

SlabSolution solve_slab_impl(FluxTable flux, const SlabDomain& slab,
                             const std::function<double(const Eigen::VectorXd&)>& rho0, double lambda_a,
                             double lambda_b, double t_end, const SolveOptions& options) {
  const int d = slab.dim();
  // Transverse probes: coordinate axes with the normal component removed.
  std::vector<Eigen::VectorXd> probes;
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(d, i);
    v -= v.dot(slab.normal) * slab.normal;
    if (v.norm() > 1e-9) probes.push_back(v);
  }
  for (int k = 0; k < 33; ++k) {
    const double s = slab.a + (k + 0.5) * (slab.b - slab.a) / 33.0;
    const Eigen::VectorXd base = s * slab.normal;
    const double ref = rho0(base);
    for (const auto& v : probes)
      for (double scale : {0.173, 0.5, 0.91})
        if (std::abs(rho0(base + scale * v) - ref) > 1e-12)
          throw std::invalid_argument("initial datum is not constant on slab hyperplanes");
  }
  SlabSolution sol;
  sol.slab = slab;
  sol.flux = std::move(flux);
  const Eigen::VectorXd n = slab.normal;
  sol.trajectory = solve_ibvp([&](double s) { return rho0(s * n); }, slab.a, slab.b, lambda_a, lambda_b, sol.flux,
                              t_end, options);
  return sol;
}

}  // namespace

SlabSolution solve_slab(const ModelSpec& model, const SlabDomain& slab,
                        const std::function<double(const Eigen::VectorXd&)>& rho0, double lambda_a,
                        double lambda_b, double t_end, const SolveOptions& options, double upper) {
  return solve_slab_impl(normal_flux(model, slab.normal, upper), slab, rho0, lambda_a, lambda_b, t_end, options);
}

SlabSolution solve_slab(const std::function<Eigen::VectorXd(double)>& h, const SlabDomain& slab,
                        const std::function<double(const Eigen::VectorXd&)>& rho0, double lambda_a,
                        double lambda_b, double t_end, double upper, const SolveOptions& options) {
  const Eigen::VectorXd n = slab.normal;
  FluxTable f = tabulate_flux([h, n](double r) { return h(r).dot(n); }, upper);
  return solve_slab_impl(std::move(f), slab, rho0, lambda_a, lambda_b, t_end, options);
}

// ---------------------------------------------------------------------------
// Entropy audit.

namespace {

double bump(double s) {
  if (s <= -1.0 || s >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  return q * q;
}

// Integral of bump over (-1, s).
double bump_cdf(double s) {
  s = std::clamp(s, -1.0, 1.0);
  return s - 2.0 * s * s * s / 3.0 + std::pow(s, 5) / 5.0 + 8.0 / 15.0;
}

struct Axis {
  double center, half;
  double value(double x) const { return bump((x - center) / half); }
  double integral(double x0, double x1) const {
    return half * (bump_cdf((x1 - center) / half) - bump_cdf((x0 - center) / half));
  }
};

}  // namespace

std::vector<TestFunction> default_test_family(double a, double b, double t_end, bool stationary) {
  std::vector<TestFunction> fam;
  const double L = b - a;
  const double eps = 0.1 * L;
  std::vector<std::pair<double, double>> space;
  for (double w : {L / 8.0, L / 4.0}) {
    const int count = static_cast<int>(std::floor((L + 2.0 * eps) / (0.5 * w) + 1e-9));
    for (int k = 0; k <= count; ++k) space.emplace_back(a - eps + k * 0.5 * w, w);
  }
  std::vector<std::pair<double, double>> time;
  if (stationary)
    time.emplace_back(0.0, 0.0);
  else
    time = {{0.0, t_end / 2}, {t_end / 4, t_end / 4}, {t_end / 2, t_end / 4}, {3 * t_end / 4, t_end / 4}, {0.0, t_end}};
  int id = 0;
  for (const auto& [tc, tw] : time)
    for (const auto& [xc, xw] : space) fam.push_back({id++, tc, tw, xc, xw});
  return fam;
}

const EntropyResidual* EntropyReport::worst_row() const {
  const EntropyResidual* w = nullptr;
  for (const auto& r : rows)
    if (!w || r.residual + r.tolerance < w->residual + w->tolerance) w = &r;
  return w;
}

EntropyReport entropy_audit(const Trajectory& tr, const FluxTable& flux, const AuditOptions& options) {
  EntropyReport rep;
  rep.stationary = options.stationary;
  rep.M = options.M > 0.0 ? options.M : 1.1 * flux.lipschitz;
  if (rep.M < flux.lipschitz) throw std::invalid_argument("penalty M below the flux Lipschitz constant");
  const Grid1D& g0 = tr.initial;
  const int n = g0.cells();
  const double a = g0.a, b = g0.b, dx = g0.dx;
  const double t_end = tr.final.t;
  if (!options.stationary && tr.history.empty()) throw std::invalid_argument("time-dependent audit needs the history");

  std::vector<TestFunction> fam =
      options.family.empty() ? default_test_family(a, b, t_end, options.stationary) : options.family;
  const double K = flux.upper();
  std::vector<double> cs(options.num_c);
  for (int k = 0; k < options.num_c; ++k) cs[k] = options.num_c > 1 ? K * k / (options.num_c - 1) : 0.5 * K;

  // f at every stored value.
  const std::vector<Eigen::VectorXd>& levels =
      options.stationary ? std::vector<Eigen::VectorXd>{tr.final.u} : tr.history;
  std::vector<Eigen::VectorXd> fvals(levels.size());
  for (std::size_t m = 0; m < levels.size(); ++m) fvals[m] = levels[m].unaryExpr([&](double v) { return flux(v); });
  const int steps = options.stationary ? 0 : static_cast<int>(tr.times.size()) - 1;
  const double dt_max = options.stationary ? 0.0 : tr.dt;

  std::vector<std::vector<EntropyResidual>> per_phi(fam.size());
  parallel_for(static_cast<int>(fam.size()), options.workers, [&](int p) {
    const TestFunction& tf = fam[p];
    const Axis X{tf.x_center, tf.x_half_width};
    const int i0 = std::clamp(static_cast<int>(std::floor((tf.x_center - tf.x_half_width - a) / dx)) - 1, 0, n - 1);
    const int i1 = std::clamp(static_cast<int>(std::ceil((tf.x_center + tf.x_half_width - a) / dx)) + 1, 0, n - 1);
    std::vector<double> xint(i1 - i0 + 1), xdiff(i1 - i0 + 1);
    for (int i = i0; i <= i1; ++i) {
      const double xl = a + i * dx;
      const double xr = xl + dx;
      xint[i - i0] = X.integral(xl, xr);
      xdiff[i - i0] = X.value(xr) - X.value(xl);
    }
    const double Xa = X.value(a), Xb = X.value(b);

    double T0 = 1.0, Tint = 1.0, t_tv = 0.0;
    std::vector<int> active;
    std::vector<double> tdiff, tint;
    if (!options.stationary) {
      const Axis T{tf.t_center, tf.t_half_width};
      T0 = T.value(0.0);
      Tint = T.integral(0.0, t_end);
      for (int m = 0; m < steps; ++m) {
        const double ta = tr.times[m], tb = tr.times[m + 1];
        if (tb <= tf.t_center - tf.t_half_width || ta >= tf.t_center + tf.t_half_width) continue;
        active.push_back(m);
        tdiff.push_back(T.value(tb) - T.value(ta));
        tint.push_back(T.integral(ta, tb));
      }
      // Total variation of T on [0, t_end].
      const double peak = std::clamp(tf.t_center, 0.0, t_end);
      t_tv = std::abs(T.value(peak) - T.value(0.0)) + std::abs(T.value(t_end) - T.value(peak));
    }
    double xmass = 0.0;
    for (double v : xint) xmass += v;
    const double x_tv = 2.0;
    const double tol = options.tolerance_constant * (dx + dt_max) *
                       (t_tv * xmass + rep.M * Tint * x_tv + 1.0);

    for (int sign : {1, -1})
      for (double c : cs) {
        const double fc = flux(c);
        auto phi_e = [&](double v) { return sign > 0 ? std::max(v - c, 0.0) : std::max(c - v, 0.0); };
        auto psi_e = [&](double v, double fv) {
          if (sign > 0) return v > c ? fv - fc : 0.0;
          return v < c ? fc - fv : 0.0;
        };
        double R = rep.M * Tint * (Xa * phi_e(g0.lambda_a) + Xb * phi_e(g0.lambda_b));
        if (options.stationary) {
          const Eigen::VectorXd& u = levels[0];
          for (int i = i0; i <= i1; ++i) R += psi_e(u(i), fvals[0](i)) * xdiff[i - i0];
        } else {
          for (int i = i0; i <= i1; ++i) R += T0 * phi_e(g0.u(i)) * xint[i - i0];
          for (std::size_t k = 0; k < active.size(); ++k) {
            const int m = active[k];
            const Eigen::VectorXd& u = levels[m];
            const Eigen::VectorXd& fu = fvals[m];
            double st = 0.0, sx = 0.0;
            for (int i = i0; i <= i1; ++i) {
              st += phi_e(u(i)) * xint[i - i0];
              sx += psi_e(u(i), fu(i)) * xdiff[i - i0];
            }
            R += st * tdiff[k] + sx * tint[k];
          }
        }
        per_phi[p].push_back({sign, c, tf.id, R, tol});
      }
  });

  rep.worst = std::numeric_limits<double>::infinity();
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (auto& v : per_phi)
    for (auto& r : v) {
      rep.worst = std::min(rep.worst, r.residual);
      rep.worst_margin = std::min(rep.worst_margin, r.residual + r.tolerance);
      rep.rows.push_back(r);
    }
  rep.passed = rep.worst_margin >= 0.0;
  return rep;
}

void write_snapshots_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,x_center,u\n";
  char buf[96];
  for (const auto& s : tr.snapshots)
    for (int i = 0; i < s.u.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.t, tr.initial.center(i), s.u(i));
      os << buf;
    }
}

void write_audit_csv(std::ostream& os, const EntropyReport& report) {
  os << "sign,c,phi_id,residual\n";
  char buf[96];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%c,%.17g,%d,%.17g\n", r.sign > 0 ? '+' : '-', r.c, r.phi_id, r.residual);
    os << buf;
  }
}

double front_position(const Grid1D& g, double level) {
  for (int i = 0; i + 1 < g.cells(); ++i) {
    const double u0 = g.u(i) - level;
    const double u1 = g.u(i + 1) - level;
    if (u0 == 0.0) return g.center(i);
    if (u0 * u1 < 0.0) return g.center(i) + g.dx * u0 / (u0 - u1);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace latgas
