#include "latgas/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>

#include "latgas/equilibrium.hpp"
#include "latgas/parallel.hpp"

namespace latgas {

namespace {

/// Binary indexed tree over nonnegative slot rates.
class RateTree {
 public:
  void reset(std::vector<double> w) {
    vals_ = std::move(w);
    n_ = static_cast<int>(vals_.size());
    tree_.assign(n_ + 1, 0.0);
    for (int i = 1; i <= n_; ++i) {
      tree_[i] += vals_[i - 1];
      const int j = i + (i & -i);
      if (j <= n_) tree_[j] += tree_[i];
    }
    top_ = n_ > 0 ? static_cast<int>(std::bit_floor(static_cast<unsigned>(n_))) : 0;
    updates_ = 0;
  }

  void set(int i, double v) {
    const double d = v - vals_[i];
    if (d == 0.0) return;
    vals_[i] = v;
    for (int k = i + 1; k <= n_; k += k & -k) tree_[k] += d;
    if (++updates_ > (1 << 20)) reset(std::move(vals_));
  }

  double total() const {
    double s = 0.0;
    for (int k = n_; k > 0; k -= k & -k) s += tree_[k];
    return s;
  }

  /// Slot i with prefix(i) <= u < prefix(i+1), skipping zero-rate slots.
  int find(double u) const {
    int pos = 0;
    for (int step = top_; step > 0; step >>= 1)
      if (pos + step <= n_ && tree_[pos + step] <= u) {
        pos += step;
        u -= tree_[pos];
      }
    if (pos >= n_) pos = n_ - 1;
    while (pos > 0 && vals_[pos] <= 0.0) --pos;
    return pos;
  }

  double value(int i) const { return vals_[i]; }

 private:
  int n_ = 0;
  int top_ = 0;
  int updates_ = 0;
  std::vector<double> vals_;
  std::vector<double> tree_;
};

/// Marginal cache keyed by density.
class MarginalCache {
 public:
  explicit MarginalCache(const ModelSpec& m) : model_(m) {}
  const SiteMarginal& operator()(double rho) {
    auto it = cache_.find(rho);
    if (it == cache_.end()) it = cache_.emplace(rho, marginal_for_density(rho, model_)).first;
    return it->second;
  }

 private:
  const ModelSpec& model_;
  std::map<double, SiteMarginal> cache_;
};

/// Precomputed neighbourhood tables shared by the single and coupled engines.
struct Tables {
  ModelSpec model;
  LatticeDomain lattice;
  bool overtaking = false;
  int num_sites = 0;
  int num_slots = 0;

  // Misanthrope.
  int ndisp = 0;
  std::vector<double> p;
  std::vector<int> target;  // slot * ndisp + k
  const MisanthropeRates* rates = nullptr;

  // Overtaking.
  int ndir = 0;
  int reach = 0;
  std::vector<int> ray;      // (slot * ndir + a) * reach + (j - 1)
  std::vector<double> beta;  // a * (reach + 1) + j

  // Reservoir.
  std::vector<double> lambda;  // per slot, zero on sites
  std::vector<ReservoirRates> res_tables;
  std::vector<int> res_index;  // per slot

  std::vector<int> dep_offset;
  std::vector<int> dep;

  Tables(ModelSpec m, LatticeDomain l) : model(std::move(m)), lattice(std::move(l)) {
    if (model.dim() != lattice.dim()) throw std::invalid_argument("model and lattice dimensions differ");
    overtaking = model.is_overtaking();
    num_sites = lattice.num_sites();
    num_slots = lattice.num_slots();
    const int range = model.range();
    if (range > lattice.range()) throw std::invalid_argument("lattice shell thinner than the model range");

    std::vector<Point> back;  // displacements whose sources depend on a site
    if (!overtaking) {
      const auto& mis = model.misanthrope();
      rates = &mis.rates;
      ndisp = static_cast<int>(mis.kernel.support.size());
      for (const auto& e : mis.kernel.support) {
        p.push_back(e.p);
        back.push_back(-e.z);
      }
      target.resize(static_cast<std::size_t>(num_slots) * ndisp);
      for (int s = 0; s < num_slots; ++s)
        for (int k = 0; k < ndisp; ++k) target[s * ndisp + k] = lattice.shifted(s, mis.kernel.support[k].z);
    } else {
      const auto& ov = model.overtaking();
      ndir = ov.num_directions();
      reach = ov.reach();
      beta.assign(static_cast<std::size_t>(ndir) * (reach + 1), 0.0);
      for (int a = 0; a < ndir; ++a)
        for (int j = 1; j <= reach; ++j) beta[a * (reach + 1) + j] = ov.beta(a, j);
      ray.resize(static_cast<std::size_t>(num_slots) * ndir * reach);
      for (int s = 0; s < num_slots; ++s)
        for (int a = 0; a < ndir; ++a) {
          const Point alpha = ov.direction_vector(a);
          for (int j = 1; j <= reach; ++j) ray[(s * ndir + a) * reach + j - 1] = lattice.shifted(s, alpha * j);
        }
      for (int a = 0; a < ndir; ++a)
        for (int j = 1; j <= reach; ++j) back.push_back(-ov.direction_vector(a) * j);
    }

    lambda.assign(num_slots, 0.0);
    res_index.assign(num_slots, -1);
    std::map<double, int> seen;
    for (int s = num_sites; s < num_slots; ++s) {
      const double v = lattice.reservoir_at(s);
      lambda[s] = v;
      auto it = seen.find(v);
      if (it == seen.end()) {
        it = seen.emplace(v, static_cast<int>(res_tables.size())).first;
        res_tables.push_back(reservoir_rates(model, v));
      }
      res_index[s] = it->second;
    }

    dep_offset.assign(num_sites + 1, 0);
    for (int x = 0; x < num_sites; ++x) {
      std::vector<int> d{x};
      for (const auto& z : back) {
        const int s = lattice.shifted(x, z);
        if (s >= 0) d.push_back(s);
      }
      std::sort(d.begin(), d.end());
      d.erase(std::unique(d.begin(), d.end()), d.end());
      dep.insert(dep.end(), d.begin(), d.end());
      dep_offset[x + 1] = static_cast<int>(dep.size());
    }
  }

  bool site(int s) const { return s >= 0 && s < num_sites; }
  double b(int n, int m) const { return (*rates)(n, m); }
  const ReservoirRates& table(int shell_slot) const { return res_tables[res_index[shell_slot]]; }
  int ray_at(int s, int a, int j) const { return ray[(s * ndir + a) * reach + j - 1]; }
  double beta_at(int a, int j) const { return beta[a * (reach + 1) + j]; }
};

template <class Dyn>
std::uint64_t run_engine(Dyn& dyn, const Tables& T, Rng& rng, double& t_proc, double t_stop,
                         std::uint64_t max_events) {
  RateTree tree;
  {
    std::vector<double> w(T.num_slots);
    for (int s = 0; s < T.num_slots; ++s) w[s] = dyn.slot_rate(s);
    tree.reset(std::move(w));
  }
  std::vector<int> changed;
  std::uint64_t events = 0;
  while (events < max_events) {
    const double total = tree.total();
    if (!(total > 1e-300)) {
      t_proc = std::max(t_proc, t_stop);
      break;
    }
    if (!std::isfinite(total)) throw std::overflow_error("event rate overflow");
    const double dt = rng.exponential(total);
    if (t_proc + dt >= t_stop) {
      t_proc = t_stop;
      break;
    }
    t_proc += dt;
    const int slot = tree.find(rng.uniform() * total);
    const double r = dyn.slot_rate(slot);
    if (!(r > 0.0)) {
      tree.set(slot, 0.0);
      continue;
    }
    changed.clear();
    dyn.fire(slot, rng.uniform() * r, dt, changed);
    ++events;
    for (int x : changed)
      for (int k = T.dep_offset[x]; k < T.dep_offset[x + 1]; ++k) tree.set(T.dep[k], dyn.slot_rate(T.dep[k]));
  }
  return events;
}

inline void apply(const Tables& T, std::vector<int>& eta, const Move& m, std::vector<int>& changed) {
  if (T.site(m.from)) {
    --eta[m.from];
    changed.push_back(m.from);
  }
  if (T.site(m.to)) {
    ++eta[m.to];
    changed.push_back(m.to);
  }
}

struct SingleDyn {
  const Tables& T;
  bool closed;
  std::vector<int>& eta;
  EventLedger* ledger;
  const EventObserver* observer;

  template <class F>
  void for_each(int s, F&& f) const {
    if (!T.overtaking) {
      if (T.site(s)) {
        const int n = eta[s];
        if (n == 0) return;
        for (int k = 0; k < T.ndisp; ++k) {
          const int t = T.target[s * T.ndisp + k];
          if (t < 0) continue;
          if (T.site(t))
            f(T.p[k] * T.b(n, eta[t]), Move{s, t});
          else if (!closed)
            f(T.p[k] * T.table(t).exit(n), Move{s, t});
        }
      } else if (!closed) {
        const ReservoirRates& tab = T.table(s);
        for (int k = 0; k < T.ndisp; ++k) {
          const int t = T.target[s * T.ndisp + k];
          if (T.site(t)) f(T.p[k] * tab.entry(eta[t]), Move{s, t});
        }
      }
      return;
    }
    const bool from_site = T.site(s);
    if (from_site ? eta[s] == 0 : closed) return;
    for (int a = 0; a < T.ndir; ++a) {
      double prod = from_site ? 1.0 : T.lambda[s];
      for (int j = 1; j <= T.reach && prod > 0.0; ++j) {
        const int t = T.ray_at(s, a, j);
        if (t < 0) break;
        double v;
        if (T.site(t))
          v = eta[t];
        else if (closed)
          break;
        else
          v = T.lambda[t];
        const double bj = T.beta_at(a, j);
        if (bj > 0.0 && (from_site || T.site(t))) {
          const double r = bj * prod * (1.0 - v);
          if (r > 0.0) f(r, Move{s, t});
        }
        prod *= v;
      }
    }
  }

  double slot_rate(int s) const {
    double r = 0.0;
    for_each(s, [&](double w, const Move&) { r += w; });
    return r;
  }

  void fire(int s, double u, double holding, std::vector<int>& changed) {
    Move chosen{-1, -1};
    double acc = 0.0;
    for_each(s, [&](double w, const Move& m) {
      if (chosen.from >= 0 && acc > u) return;
      acc += w;
      chosen = m;
    });
    if (observer) (*observer)(eta, chosen, holding);
    apply(T, eta, chosen, changed);
    if (ledger) {
      ++ledger->events;
      if (!T.site(chosen.from))
        ++ledger->births;
      else if (!T.site(chosen.to))
        ++ledger->deaths;
      else
        ++ledger->jumps;
    }
  }
};

struct CoupledDyn {
  const Tables& T;
  const ReservoirRates& xi_table;
  double c;
  std::vector<int>& eta;
  std::vector<int>& xi;
  CoupledLedger* ledger;
  bool check_order;
  bool throw_on_violation;
  mutable std::vector<double> cur, nxt;

  // Coupled Bernoulli reservoir pair (lambda, c): P(1,1), P(1,0), P(0,1), P(0,0).
  static std::array<double, 4> bernoulli_pair(double l, double cc) {
    return {std::min(l, cc), std::max(l - cc, 0.0), std::max(cc - l, 0.0), 1.0 - std::max(l, cc)};
  }

  // f(rate_eta, rate_xi, move_eta, move_xi)
  template <class F>
  void for_each(int s, F&& f) const {
    if (!T.overtaking) {
      if (T.site(s)) {
        const int ne = eta[s];
        const int nx = xi[s];
        if (ne == 0 && nx == 0) return;
        for (int k = 0; k < T.ndisp; ++k) {
          const int t = T.target[s * T.ndisp + k];
          if (t < 0) continue;
          const Move m{s, t};
          if (T.site(t))
            f(T.p[k] * T.b(ne, eta[t]), T.p[k] * T.b(nx, xi[t]), m, m);
          else
            f(T.p[k] * T.table(t).exit(ne), T.p[k] * xi_table.exit(nx), m, m);
        }
      } else {
        const ReservoirRates& tab = T.table(s);
        for (int k = 0; k < T.ndisp; ++k) {
          const int t = T.target[s * T.ndisp + k];
          if (!T.site(t)) continue;
          const Move m{s, t};
          f(T.p[k] * tab.entry(eta[t]), T.p[k] * xi_table.entry(xi[t]), m, m);
        }
      }
      return;
    }

    // Overtaking: distribution of the first-vacancy distances (k, l) of the
    // two copies along each ray, averaging over coupled reservoir sites.
    const bool from_site = T.site(s);
    if (from_site && eta[s] == 0 && xi[s] == 0) return;
    const int J = T.reach;
    const int w = J + 2;  // state codes -1 (no jump), 0 (scanning), 1..J (vacancy found)
    auto at = [w](int se, int sx) { return (se + 1) * w + (sx + 1); };
    cur.assign(w * w, 0.0);
    nxt.assign(w * w, 0.0);
    for (int a = 0; a < T.ndir; ++a) {
      std::fill(cur.begin(), cur.end(), 0.0);
      if (from_site) {
        cur[at(eta[s] ? 0 : -1, xi[s] ? 0 : -1)] = 1.0;
      } else {
        const auto pr = bernoulli_pair(T.lambda[s], c);
        cur[at(0, 0)] += pr[0];
        cur[at(0, -1)] += pr[1];
        cur[at(-1, 0)] += pr[2];
        cur[at(-1, -1)] += pr[3];
      }
      for (int j = 1; j <= J; ++j) {
        const int t = T.ray_at(s, a, j);
        if (t < 0) break;
        std::fill(nxt.begin(), nxt.end(), 0.0);
        std::array<double, 4> pr;
        if (T.site(t))
          pr = {eta[t] && xi[t] ? 1.0 : 0.0, eta[t] && !xi[t] ? 1.0 : 0.0, !eta[t] && xi[t] ? 1.0 : 0.0,
                !eta[t] && !xi[t] ? 1.0 : 0.0};
        else
          pr = bernoulli_pair(T.lambda[t], c);
        bool scanning = false;
        for (int se = -1; se <= J; ++se)
          for (int sx = -1; sx <= J; ++sx) {
            const double mass = cur[at(se, sx)];
            if (mass == 0.0) continue;
            if (se != 0 && sx != 0) {
              nxt[at(se, sx)] += mass;
              continue;
            }
            const int occ_e[4] = {1, 1, 0, 0};
            const int occ_x[4] = {1, 0, 1, 0};
            for (int o = 0; o < 4; ++o) {
              if (pr[o] == 0.0) continue;
              const int ne = se == 0 ? (occ_e[o] ? 0 : j) : se;
              const int nx = sx == 0 ? (occ_x[o] ? 0 : j) : sx;
              nxt[at(ne, nx)] += mass * pr[o];
              scanning |= (ne == 0 || nx == 0);
            }
          }
        std::swap(cur, nxt);
        if (!scanning) break;
      }
      for (int se = -1; se <= J; ++se)
        for (int sx = -1; sx <= J; ++sx) {
          const double mass = cur[at(se, sx)];
          if (mass == 0.0) continue;
          Move me{-1, -1};
          Move mx{-1, -1};
          double be = 0.0;
          double bx = 0.0;
          if (se > 0) {
            const int t = T.ray_at(s, a, se);
            if (from_site || T.site(t)) {
              be = T.beta_at(a, se);
              me = Move{s, t};
            }
          }
          if (sx > 0) {
            const int t = T.ray_at(s, a, sx);
            if (from_site || T.site(t)) {
              bx = T.beta_at(a, sx);
              mx = Move{s, t};
            }
          }
          if (be > 0.0 || bx > 0.0) f(mass * be, mass * bx, me, mx);
        }
    }
  }

  double slot_rate(int s) const {
    double r = 0.0;
    for_each(s, [&](double re, double rx, const Move&, const Move&) { r += std::max(re, rx); });
    return r;
  }

  void fire(int s, double u, double, std::vector<int>& changed) {
    double acc = 0.0;
    bool done = false;
    double re_c = 0.0, rx_c = 0.0, off = 0.0;
    Move me_c, mx_c;
    for_each(s, [&](double re, double rx, const Move& me, const Move& mx) {
      if (done) return;
      const double w = std::max(re, rx);
      re_c = re;
      rx_c = rx;
      me_c = me;
      mx_c = mx;
      off = u - acc;
      acc += w;
      if (acc > u) done = true;
    });
    const double joint = std::min(re_c, rx_c);
    int kind;  // 0 joint, 1 eta only, 2 xi only
    if (off < joint)
      kind = 0;
    else
      kind = re_c > rx_c ? 1 : 2;
    if (kind != 2) {
      apply(T, eta, me_c, changed);
      if (ledger) ledger->eta_net_births += (T.site(me_c.to) ? 1 : 0) - (T.site(me_c.from) ? 1 : 0);
    }
    if (kind != 1) {
      apply(T, xi, mx_c, changed);
      if (ledger) ledger->xi_net_births += (T.site(mx_c.to) ? 1 : 0) - (T.site(mx_c.from) ? 1 : 0);
    }
    if (ledger) {
      ++ledger->events;
      ++(kind == 0 ? ledger->joint : kind == 1 ? ledger->eta_only : ledger->xi_only);
    }
    if (check_order)
      for (int x : changed)
        if (eta[x] > xi[x]) {
          if (ledger) ++ledger->order_violations;
          if (throw_on_violation) throw OrderViolation("coupled process lost its order at a site");
        }
  }
};

}  // namespace

// ---------------------------------------------------------------------------

struct OpenSystem::Impl {
  Tables tables;
  bool closed;
  Impl(ModelSpec m, LatticeDomain l, bool c) : tables(std::move(m), std::move(l)), closed(c) {}
};

OpenSystem::OpenSystem(ModelSpec model, LatticeDomain lattice, bool closed)
    : impl_(std::make_unique<Impl>(std::move(model), std::move(lattice), closed)) {}
OpenSystem::~OpenSystem() = default;
OpenSystem::OpenSystem(OpenSystem&&) noexcept = default;
OpenSystem& OpenSystem::operator=(OpenSystem&&) noexcept = default;

const ModelSpec& OpenSystem::model() const { return impl_->tables.model; }
const LatticeDomain& OpenSystem::lattice() const { return impl_->tables.lattice; }

SimState OpenSystem::init_from_profile(const MacroField& rho0, std::uint64_t seed) const {
  const Tables& T = impl_->tables;
  MarginalCache cache(T.model);
  SimState st;
  st.rng = Rng(seed);
  st.eta.assign(T.num_sites, 0);
  for (int x = 0; x < T.num_sites; ++x) {
    const double rho = rho0(T.lattice.position(x));
    st.eta[x] = sample_site(cache(rho), st.rng.uniform());
  }
  return st;
}

void OpenSystem::run(SimState& state, double t_end, EventLedger* ledger, std::uint64_t max_events,
                     const EventObserver* observer) const {
  const Tables& T = impl_->tables;
  if (static_cast<int>(state.eta.size()) != T.num_sites) throw std::invalid_argument("state size mismatch");
  const double N = T.lattice.scale();
  double t_proc = state.t_macro * N;
  SingleDyn dyn{T, impl_->closed, state.eta, ledger, observer};
  run_engine(dyn, T, state.rng, t_proc, t_end * N, max_events);
  state.t_macro = t_proc / N;
}

double OpenSystem::total_rate(const std::vector<int>& eta) const {
  const Tables& T = impl_->tables;
  std::vector<int> copy = eta;
  SingleDyn dyn{T, impl_->closed, copy, nullptr, nullptr};
  double r = 0.0;
  for (int s = 0; s < T.num_slots; ++s) r += dyn.slot_rate(s);
  return r;
}

struct CoupledSystem::Impl {
  Tables tables;
  double c;
  ReservoirRates xi_table;
  Impl(ModelSpec m, LatticeDomain l, double cc)
      : tables(std::move(m), std::move(l)), c(cc), xi_table(reservoir_rates(tables.model, cc)) {}
};

CoupledSystem::CoupledSystem(ModelSpec model, LatticeDomain lattice, double xi_reservoir)
    : impl_(std::make_unique<Impl>(std::move(model), std::move(lattice), xi_reservoir)) {}
CoupledSystem::~CoupledSystem() = default;
CoupledSystem::CoupledSystem(CoupledSystem&&) noexcept = default;
CoupledSystem& CoupledSystem::operator=(CoupledSystem&&) noexcept = default;

const ModelSpec& CoupledSystem::model() const { return impl_->tables.model; }
const LatticeDomain& CoupledSystem::lattice() const { return impl_->tables.lattice; }
double CoupledSystem::xi_reservoir() const { return impl_->c; }

CoupledState CoupledSystem::init_coupled(const MacroField& rho_eta, const MacroField& rho_xi,
                                         std::uint64_t seed) const {
  const Tables& T = impl_->tables;
  MarginalCache cache(T.model);
  CoupledState st;
  st.rng = Rng(seed);
  st.eta.assign(T.num_sites, 0);
  st.xi.assign(T.num_sites, 0);
  for (int x = 0; x < T.num_sites; ++x) {
    const Eigen::VectorXd pos = T.lattice.position(x);
    const SiteMarginal& a = cache(rho_eta(pos));
    const SiteMarginal& b = cache(rho_xi(pos));
    const auto [n, m] = sample_coupled(a, b, st.rng.uniform());
    st.eta[x] = n;
    st.xi[x] = m;
  }
  return st;
}

void CoupledSystem::run(CoupledState& state, double t_end, CoupledLedger* ledger, std::uint64_t max_events,
                        bool check_order, bool throw_on_violation) const {
  const Tables& T = impl_->tables;
  if (static_cast<int>(state.eta.size()) != T.num_sites || state.xi.size() != state.eta.size())
    throw std::invalid_argument("coupled state size mismatch");
  const double N = T.lattice.scale();
  double t_proc = state.t_macro * N;
  CoupledDyn dyn{T, impl_->xi_table, impl_->c, state.eta, state.xi, ledger, check_order, throw_on_violation, {}, {}};
  run_engine(dyn, T, state.rng, t_proc, t_end * N, max_events);
  state.t_macro = t_proc / N;
}

// ---------------------------------------------------------------------------

DensityProfile empirical_density(const LatticeDomain& lattice, const std::vector<int>& eta, double cell_width) {
  if (!(cell_width * lattice.scale() >= 1.0 - 1e-12)) throw std::invalid_argument("cell width below one lattice spacing");
  const SlabDomain& slab = lattice.domain().inner;
  const int cells = std::max(1, static_cast<int>(std::lround((slab.b - slab.a) / cell_width)));
  DensityProfile prof;
  prof.origin = slab.a;
  prof.cell_width = (slab.b - slab.a) / cells;
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(cells);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(cells);
  for (int x = 0; x < lattice.num_sites(); ++x) {
    const double s = slab_coordinates(slab, lattice.position(x));
    if (s <= slab.a || s >= slab.b) continue;
    const int c = std::clamp(static_cast<int>(std::floor((s - slab.a) / prof.cell_width)), 0, cells - 1);
    mass(c) += eta[x];
    count(c) += 1.0;
  }
  prof.values = (count.array() > 0).select(mass.array() / count.array().max(1.0), 0.0).matrix();
  prof.stderr_ = Eigen::VectorXd::Zero(cells);
  return prof;
}

double region_density(const LatticeDomain& lattice, const std::vector<int>& eta,
                      const std::function<bool(const Eigen::VectorXd&)>& region) {
  double mass = 0.0;
  long count = 0;
  for (int x = 0; x < lattice.num_sites(); ++x)
    if (region(lattice.position(x))) {
      mass += eta[x];
      ++count;
    }
  return count > 0 ? mass / count : 0.0;
}

double kruzkov_monitor(const LatticeDomain& lattice, const std::vector<int>& eta, const std::vector<int>& xi,
                       const MacroField& phi, int sign) {
  double s = 0.0;
  for (int x = 0; x < lattice.num_sites(); ++x) {
    const int diff = eta[x] - xi[x];
    const int part = sign > 0 ? std::max(diff, 0) : std::max(-diff, 0);
    if (part) s += phi(lattice.position(x)) * part;
  }
  return s / std::pow(static_cast<double>(lattice.scale()), lattice.dim());
}

StationaryEstimate stationary_profile(const OpenSystem& system, const MacroField& rho0,
                                      const StationaryOptions& opt) {
  if (!(opt.burn_in < opt.horizon)) throw std::invalid_argument("burn-in must precede the horizon");
  if (opt.replicas < 1) throw std::invalid_argument("need at least one replica");
  const LatticeDomain& L = system.lattice();
  const SlabDomain& slab = L.domain().inner;
  const int nobs = static_cast<int>(opt.observables.size());

  struct Replica {
    Eigen::VectorXd profile;
    double first = 0.0, second = 0.0;
    std::vector<double> obs;
  };
  std::vector<Replica> reps(opt.replicas);
  const int samples = std::max(2, static_cast<int>(std::floor((opt.horizon - opt.burn_in) / opt.sample_dt + 1e-9)));

  auto central = [&](const DensityProfile& p) {
    const double lo = slab.a + (slab.b - slab.a) / 3.0;
    const double hi = slab.a + 2.0 * (slab.b - slab.a) / 3.0;
    double s = 0.0;
    int n = 0;
    for (int i = 0; i < p.cells(); ++i)
      if (p.center(i) >= lo && p.center(i) <= hi) {
        s += p.values(i);
        ++n;
      }
    return n ? s / n : 0.0;
  };

  parallel_for(opt.replicas, opt.workers, [&](int r) {
    Rng seeder = Rng::stream(opt.seed, static_cast<std::uint64_t>(r));
    SimState st = system.init_from_profile(rho0, seeder.next());
    system.run(st, opt.burn_in);
    Replica& rep = reps[r];
    rep.obs.assign(nobs, 0.0);
    for (int k = 1; k <= samples; ++k) {
      system.run(st, opt.burn_in + k * (opt.horizon - opt.burn_in) / samples);
      DensityProfile p = empirical_density(L, st.eta, opt.cell_width);
      if (rep.profile.size() == 0) rep.profile = Eigen::VectorXd::Zero(p.cells());
      rep.profile += p.values;
      (2 * k <= samples ? rep.first : rep.second) += central(p);
      for (int o = 0; o < nobs; ++o) rep.obs[o] += opt.observables[o](L, st.eta);
    }
    rep.profile /= samples;
    rep.first /= samples / 2;
    rep.second /= samples - samples / 2;
    for (double& v : rep.obs) v /= samples;
  });

  StationaryEstimate est;
  const int R = opt.replicas;
  DensityProfile shape = empirical_density(L, std::vector<int>(L.num_sites(), 0), opt.cell_width);
  est.profile = shape;
  const int cells = shape.cells();
  Eigen::MatrixXd all(R, cells);
  for (int r = 0; r < R; ++r) all.row(r) = reps[r].profile.transpose();
  est.profile.values = all.colwise().mean().transpose();
  auto se_of = [R](const Eigen::VectorXd& v) {
    if (R < 2) return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / (R - 1) / R);
  };
  est.profile.stderr_ = Eigen::VectorXd::Zero(cells);
  for (int i = 0; i < cells; ++i) est.profile.stderr_(i) = se_of(all.col(i));

  Eigen::VectorXd bulk(R), diff(R);
  for (int r = 0; r < R; ++r) {
    DensityProfile p = shape;
    p.values = reps[r].profile;
    bulk(r) = central(p);
    diff(r) = reps[r].first - reps[r].second;
  }
  est.bulk = bulk.mean();
  est.bulk_stderr = se_of(bulk);
  if (R >= 2) est.nonstationary = std::abs(diff.mean()) > 3.0 * se_of(diff) + 1e-12;
  for (int o = 0; o < nobs; ++o) {
    Eigen::VectorXd v(R);
    for (int r = 0; r < R; ++r) v(r) = reps[r].obs[o];
    est.observable_mean.push_back(v.mean());
    est.observable_stderr.push_back(se_of(v));
  }
  return est;
}

Observable local_observable(const LocalFunction& g, const Eigen::VectorXd& x) {
  return [g, x](const LatticeDomain& L, const std::vector<int>& eta) {
    Point center(L.dim());
    for (int i = 0; i < L.dim(); ++i) center(i) = static_cast<int>(std::floor(x(i) * L.scale()));
    auto access = [&](const Point& offset) {
      const int s = L.locate(center + offset);
      return L.is_site(s) ? eta[s] : 0;
    };
    return g(access);
  };
}

double local_equilibrium_probe(const OpenSystem& system, const MacroField& rho0, const LocalFunction& g,
                               const Eigen::VectorXd& x, StationaryOptions options, double* stderr_out) {
  options.observables = {local_observable(g, x)};
  const StationaryEstimate est = stationary_profile(system, rho0, options);
  if (stderr_out) *stderr_out = est.observable_stderr[0];
  return est.observable_mean[0];
}

double product_expectation(const LocalFunction& g, const std::vector<Point>& window, double rho,
                           const ModelSpec& model) {
  const SiteMarginal th = marginal_for_density(rho, model);
  const int states = th.k_eff() + 1;
  const int n = static_cast<int>(window.size());
  std::vector<int> occ(n, 0);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) w *= th.probs(occ[i]);
    if (w > 0.0) {
      auto access = [&](const Point& z) {
        for (int i = 0; i < n; ++i)
          if (window[i] == z) return occ[i];
        return 0;
      };
      total += w * g(access);
    }
    int i = 0;
    while (i < n && ++occ[i] == states) occ[i++] = 0;
    if (i == n) break;
  }
  return total;
}

}  // namespace latgas
