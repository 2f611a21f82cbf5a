#include "latgas/hydrostatics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "latgas/parallel.hpp"

namespace latgas {

std::string to_string(PhaseLabel label) {
  switch (label) {
    case PhaseLabel::LD: return "LD";
    case PhaseLabel::HD: return "HD";
    case PhaseLabel::MC: return "MC";
    case PhaseLabel::mC: return "mC";
    case PhaseLabel::Coexistence: return "coexistence";
    case PhaseLabel::DegenerateFlat: return "degenerate-flat";
  }
  return "?";
}

PhaseLabel parse_phase_label(const std::string& s) {
  for (PhaseLabel l : {PhaseLabel::LD, PhaseLabel::HD, PhaseLabel::MC, PhaseLabel::mC, PhaseLabel::Coexistence,
                       PhaseLabel::DegenerateFlat})
    if (to_string(l) == s) return l;
  throw std::invalid_argument("unknown phase label: " + s);
}

namespace {

// Moves lam in direction dir while f stays within eps_flat of f(lam).
double extend_flat(const FluxTable& f, double lam, int dir) {
  const double K = f.upper();
  const double h = f.drho;
  const double f0 = f(lam);
  auto flat = [&](double x) { return std::abs(f(x) - f0) <= f.eps_flat; };
  double inside = lam;
  double out = lam;
  while (true) {
    const double next = std::clamp(inside + dir * h, 0.0, K);
    if (next == inside) return inside;
    if (!flat(next)) {
      out = next;
      break;
    }
    inside = next;
  }
  if (inside == lam) return lam;
  for (int it = 0; it < 60; ++it) {
    const double m = 0.5 * (inside + out);
    (flat(m) ? inside : out) = m;
  }
  return inside;
}

bool flat_between(const FluxTable& f, double x, double y) {
  const double lo = std::min(x, y), hi = std::max(x, y);
  return f.extreme_on(lo, hi, true) - f.extreme_on(lo, hi, false) <= 10.0 * f.eps_flat + 1e-15;
}

double slope(const FluxTable& f, double x) {
  const double h = f.drho;
  const double l = std::max(0.0, x - h), r = std::min(f.upper(), x + h);
  return (f(r) - f(l)) / (r - l);
}

}  // namespace

EffectiveEndpoints effective_endpoints(const FluxTable& flux, double la, double lb) {
  const double K = flux.upper();
  if (la < -1e-12 || lb < -1e-12 || la > K + 1e-12 || lb > K + 1e-12)
    throw std::domain_error("boundary densities outside the flux range");
  if (la <= lb) return {extend_flat(flux, la, -1), extend_flat(flux, lb, +1)};
  return {extend_flat(flux, la, +1), extend_flat(flux, lb, -1)};
}

bool PhasePoint::in_extremizer_set(double rho, const FluxTable& flux) const {
  const double lo = std::min(lambda_a_f, lambda_b_f), hi = std::max(lambda_a_f, lambda_b_f);
  if (label == PhaseLabel::DegenerateFlat) return rho >= lo - 1e-12 && rho <= hi + 1e-12;
  return rho >= lo - 1e-12 && rho <= hi + 1e-12 && std::abs(flux(rho) - extremum) <= kTieTolerance;
}

PhasePoint bulk_density(const FluxTable& flux, double la, double lb) {
  PhasePoint p;
  p.lambda_a = la;
  p.lambda_b = lb;
  const EffectiveEndpoints e = effective_endpoints(flux, la, lb);
  p.lambda_a_f = e.a;
  p.lambda_b_f = e.b;
  const double lo = std::min(e.a, e.b), hi = std::max(e.a, e.b);
  const bool want_max = la > lb;

  if (flux.sup_abs() == 0.0) {
    p.label = PhaseLabel::DegenerateFlat;
    p.unique = false;
    p.bulk = std::numeric_limits<double>::quiet_NaN();
    p.extremizers = {lo, hi};
    return p;
  }

  const double v = flux.extreme_on(lo, hi, want_max);
  p.extremum = v;
  std::vector<double> cand{lo};
  for (const auto& x : flux.extrema)
    if (x.rho > lo && x.rho < hi) cand.push_back(x.rho);
  cand.push_back(hi);
  for (double c : cand)
    if (std::abs(flux(c) - v) <= kTieTolerance && (p.extremizers.empty() || c - p.extremizers.back() > 1e-9))
      p.extremizers.push_back(c);

  bool flat_set = p.extremizers.size() >= 2;
  for (std::size_t k = 1; k < p.extremizers.size() && flat_set; ++k)
    flat_set = flat_between(flux, p.extremizers[k - 1], p.extremizers[k]);

  if (p.extremizers.size() >= 2 && !flat_set) {
    p.unique = false;
    p.label = PhaseLabel::Coexistence;
    p.bulk = std::numeric_limits<double>::quiet_NaN();
    return p;
  }

  const double dlo = std::min(la, lb), dhi = std::max(la, lb);
  constexpr double tol = 1e-9;
  if (flat_set) {
    // Minimizers form a plateau; report its point nearest to the data interval.
    const double s0 = p.extremizers.front(), s1 = p.extremizers.back();
    p.bulk = std::clamp(std::clamp(0.5 * (s0 + s1), dlo, dhi), s0, s1);
    if (la >= s0 - tol && la <= s1 + tol)
      p.label = PhaseLabel::LD;
    else if (lb >= s0 - tol && lb <= s1 + tol)
      p.label = PhaseLabel::HD;
    else
      p.label = want_max ? PhaseLabel::MC : PhaseLabel::mC;
    return p;
  }

  const double x = p.extremizers.front();
  p.bulk = x;
  if (x > lo + tol && x < hi - tol)
    p.label = want_max ? PhaseLabel::MC : PhaseLabel::mC;
  else if (la == lb)
    p.label = slope(flux, la) < -1e-12 ? PhaseLabel::HD : PhaseLabel::LD;
  else if (std::abs(x - e.a) <= tol)
    p.label = PhaseLabel::LD;
  else
    p.label = PhaseLabel::HD;
  return p;
}

std::map<PhaseLabel, int> count_phase_regions(const std::vector<PhaseLabel>& labels, int side) {
  std::map<PhaseLabel, int> comps;
  std::vector<char> seen(labels.size(), 0);
  std::queue<int> q;
  for (int start = 0; start < static_cast<int>(labels.size()); ++start) {
    if (seen[start] || labels[start] == PhaseLabel::Coexistence) continue;
    const PhaseLabel lab = labels[start];
    ++comps[lab];
    seen[start] = 1;
    q.push(start);
    while (!q.empty()) {
      const int c = q.front();
      q.pop();
      const int i = c / side, j = c % side;
      const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= side || n[1] < 0 || n[1] >= side) continue;
        const int k = n[0] * side + n[1];
        if (!seen[k] && labels[k] == lab) {
          seen[k] = 1;
          q.push(k);
        }
      }
    }
  }
  return comps;
}

PhaseDiagram phase_diagram(const FluxTable& flux, int resolution, int workers) {
  if (resolution < 2) throw std::invalid_argument("phase diagram resolution must be >= 2");
  PhaseDiagram d;
  d.resolution = resolution;
  d.upper = flux.upper();
  d.side = static_cast<int>(std::lround(d.upper * resolution)) + 1;
  d.points.resize(static_cast<std::size_t>(d.side) * d.side);
  const int side = d.side;
  auto coord = [&](int i) { return std::min(d.upper, static_cast<double>(i) / resolution); };
  parallel_for(side, workers, [&](int i) {
    for (int j = 0; j < side; ++j) d.points[static_cast<std::size_t>(i) * side + j] = bulk_density(flux, coord(i), coord(j));
  });
  std::vector<PhaseLabel> labels(d.points.size());
  for (std::size_t k = 0; k < labels.size(); ++k) labels[k] = d.points[k].label;
  d.components = count_phase_regions(labels, side);
  d.phase_count = 0;
  for (const auto& [l, n] : d.components) d.phase_count += n;
  return d;
}

void write_phase_csv(std::ostream& os, const PhaseDiagram& d) {
  os << "lambda_a,lambda_b,bulk,label\n";
  char buf[128];
  for (const auto& p : d.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s\n", p.lambda_a, p.lambda_b, p.bulk,
                  to_string(p.label).c_str());
    os << buf;
  }
}

PhaseDiagram read_phase_csv(std::istream& is) {
  std::string line;
  PhaseDiagram d;
  while (std::getline(is, line)) {
    if (line.empty() || line.rfind("lambda_a", 0) == 0) continue;
    std::istringstream ss(line);
    std::string f[4];
    for (auto& s : f)
      if (!std::getline(ss, s, ',')) throw std::runtime_error("malformed phase CSV row: " + line);
    PhasePoint p;
    p.lambda_a = std::stod(f[0]);
    p.lambda_b = std::stod(f[1]);
    p.bulk = std::strtod(f[2].c_str(), nullptr);
    p.unique = std::isfinite(p.bulk);
    p.label = parse_phase_label(f[3]);
    d.points.push_back(p);
  }
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d.points.size()))));
  if (side < 2 || static_cast<std::size_t>(side) * side != d.points.size())
    throw std::runtime_error("phase CSV is not a square grid");
  d.side = side;
  d.upper = d.points.back().lambda_a;
  d.resolution = static_cast<int>(std::lround((side - 1) / d.upper));
  std::vector<PhaseLabel> labels(d.points.size());
  for (std::size_t k = 0; k < labels.size(); ++k) labels[k] = d.points[k].label;
  d.components = count_phase_regions(labels, side);
  for (const auto& [l, n] : d.components) d.phase_count += n;
  return d;
}

double StationaryProfile::value(double x) const {
  const auto it = std::upper_bound(breakpoints.begin() + 1, breakpoints.end() - 1, x);
  return values[static_cast<std::size_t>(it - (breakpoints.begin() + 1))];
}

StationaryProfile build_stationary_profile(const FluxTable& flux, double la, double lb,
                                           std::vector<double> breakpoints, std::vector<double> values) {
  if (breakpoints.size() != values.size() + 1 || values.empty())
    throw std::invalid_argument("profile needs n values and n + 1 breakpoints");
  for (std::size_t k = 1; k < breakpoints.size(); ++k)
    if (!(breakpoints[k] > breakpoints[k - 1])) throw std::invalid_argument("breakpoints must increase");
  const PhasePoint p = bulk_density(flux, la, lb);
  for (double v : values)
    if (!p.in_extremizer_set(v, flux)) throw std::invalid_argument("profile value outside the extremizer set");
  for (std::size_t k = 1; k < values.size(); ++k) {
    const double u = values[k - 1], w = values[k];
    const bool equal_f = flat_between(flux, u, w);
    if (la < lb && !(u <= w || equal_f)) throw std::invalid_argument("profile must be nondecreasing in the f-order");
    if (la > lb && !(w <= u || equal_f)) throw std::invalid_argument("profile must be nonincreasing in the f-order");
  }
  StationaryProfile s;
  s.breakpoints = std::move(breakpoints);
  s.values = std::move(values);
  s.lambda_a = la;
  s.lambda_b = lb;
  return s;
}

StationaryCheck verify_stationary(const StationaryProfile& profile, const FluxTable& flux,
                                  const StationaryCheckOptions& options) {
  StationaryCheck out;
  const double a = profile.a(), b = profile.b();
  const Trajectory still = trajectory_from_function([&](double, double x) { return profile.value(x); }, a, b,
                                                    profile.lambda_a, profile.lambda_b, options.dx, 1.0, 0.0);
  AuditOptions ao;
  ao.stationary = true;
  ao.M = options.M;
  out.audit = entropy_audit(still, flux, ao);

  out.crossing_time = flux.lipschitz > 0.0 ? (b - a) / flux.lipschitz : 0.0;
  SolveOptions so;
  so.dx = options.dx;
  so.cfl = options.cfl;
  so.keep_history = false;
  const Trajectory tr = solve_ibvp(still.initial, flux, out.crossing_time, so);
  out.drift = tr.initial.dx * (tr.final.u - tr.initial.u).cwiseAbs().sum();
  return out;
}

DomainRegion DomainPrediction::region(const Eigen::VectorXd& x) const {
  if (!domain.contains(x)) return DomainRegion::Outside;
  const double s = slab_coordinates(domain.inner, x);
  if (s <= domain.inner.a) return DomainRegion::LeftCollar;
  if (s >= domain.inner.b) return DomainRegion::RightCollar;
  return DomainRegion::Inner;
}

const DensityBand& DomainPrediction::band(DomainRegion r) const {
  switch (r) {
    case DomainRegion::LeftCollar: return left_collar;
    case DomainRegion::RightCollar: return right_collar;
    default: return inner;
  }
}

DomainPrediction perturbed_domain_prediction(const FluxTable& flux, double la, double lb,
                                             const PerturbedDomain& domain) {
  DomainPrediction d;
  d.point = bulk_density(flux, la, lb);
  if (!d.point.unique) throw std::invalid_argument("prediction requires a unique bulk density");
  d.domain = domain;
  const double r = d.point.bulk;
  d.rho_star = r;
  d.inner = {r, r};
  auto band = [](double x, double y) { return DensityBand{std::min(x, y), std::max(x, y)}; };
  d.left_collar = std::abs(r - la) <= 1e-9 ? DensityBand{r, r} : band(d.point.lambda_a_f, r);
  d.right_collar = std::abs(r - lb) <= 1e-9 ? DensityBand{r, r} : band(r, d.point.lambda_b_f);
  return d;
}

}  // namespace latgas
