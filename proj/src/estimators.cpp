#include "pathcurv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pathcurv/errors.hpp"
#include "pathcurv/parallel.hpp"
#include "pathcurv/rng.hpp"
#include "pathcurv/stats.hpp"

namespace pathcurv {

double EstimateReport::extra(const std::string& key) const {
  for (const auto& kv : extras)
    if (kv.first == key) return kv.second;
  throw std::out_of_range("no extra named '" + key + "'");
}

namespace {

Point point_of(const FrameState& st) {
  Point p;
  p.chart = st.chart;
  p.u = st.u;
  return p;
}

double sqnorm(const Vec& v) { return dot(v, v); }

double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Grid index of an absolute time, same 1e-9 relative tolerance as PathSample.
int grid_index(double t, double dt, int m, const std::string& what) {
  const int k = static_cast<int>(std::llround(t / dt));
  if (k < 0 || k > m || std::fabs(k * dt - t) > 1e-9 * std::max(1.0, std::fabs(t)))
    throw TimesNotOnGrid(what + ": time " + fmt(t) + " is not a node of the dt grid");
  return k;
}

void validate_exponent(const std::string& what, double v) {
  if (!(v >= 1.0 && v <= 2.0)) throw ConfigError(what + " must lie in [1, 2], got " + fmt(v));
}

// Frame components of grad f at x for a one-point functional.
Vec frame_grad_at(const Manifold& M, const Cylindrical& F, const Point& x) {
  const Mat U0 = initial_frame(M, x.chart, x.u);
  return matvec_t(U0, F.base_partials(M, {x}, 0));
}

void require_endpoint(const Cylindrical& F, double T, const std::string& id) {
  if (F.n_times() != 1 || F.cutoff)
    throw ConfigError(id + " needs a one-point functional without cutoff");
  if (std::fabs(F.times[0] - T) > 1e-9 * std::max(1.0, T))
    throw ConfigError(id + " needs the functional sampled at the horizon T");
}

const Cutoff& require_localized(const Manifold& M, const CurvatureBounds& bounds,
                                const Cylindrical& F, const Point& x, const EstimatorConfig& cfg,
                                const std::string& id) {
  if (!F.cutoff) throw ConfigError(id + " needs a functional localized by a radius cutoff");
  const Cutoff& cut = *F.cutoff;
  if (!(2.0 * cut.R < M.injectivity_bound()))
    throw ConfigError(id + ": cutoff radius " + fmt(cut.R) +
                      " is not below half the injectivity bound " + fmt(M.injectivity_bound()));
  if (!cfg.override_c_check) {
    const double cmin = local_curvature_inf(M, x, cut.R, 4096, cfg.seed).value;
    if (bounds.K2 > cmin + 1e-12)
      throw ConfigError(id + ": lower constant " + fmt(bounds.K2) +
                        " exceeds the curvature infimum " + fmt(cmin) + " on the cutoff ball");
  }
  return cut;
}

// Simulates cfg.n_paths paths from x, building the transport pack when bounds
// are given, and reduces per-block slots that the caller merges in order.
template <class Slot, class Fn>
std::vector<Slot> run_blocks(const Manifold& M, const Point& x, double T,
                             const EstimatorConfig& cfg, const CurvatureBounds* bounds,
                             const Slot& proto, Fn&& fn) {
  const std::uint64_t nb = (cfg.n_paths + kPathBlock - 1) / kPathBlock;
  std::vector<Slot> slots(static_cast<std::size_t>(nb), proto);
  parallel_blocks(cfg.n_paths, kPathBlock,
                  [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
                    PathSample path;
                    TransportPack pack;
                    Slot& slot = slots[static_cast<std::size_t>(b)];
                    for (std::uint64_t i = first; i < last; ++i) {
                      simulate_path(M, x, T, cfg.dt, cfg.seed, i, path);
                      if (bounds) pack = build_transport(M, path, *bounds);
                      fn(slot, path, pack);
                    }
                  });
  return slots;
}

template <class Slot>
Slot merge_all(const std::vector<Slot>& slots, const Slot& proto) {
  Slot total = proto;
  for (const Slot& s : slots) total.merge(s);
  return total;
}

// Regroups block slots into at most `batches` contiguous batch slots for
// batch-mean standard errors of nonlinear statistics.
template <class Slot>
std::vector<Slot> regroup_batches(const std::vector<Slot>& slots, int batches, const Slot& proto) {
  const int nb = static_cast<int>(slots.size());
  const int eff = std::max(1, std::min(batches, nb));
  std::vector<Slot> out(static_cast<std::size_t>(eff), proto);
  for (int i = 0; i < nb; ++i)
    out[static_cast<std::size_t>(static_cast<std::int64_t>(i) * eff / nb)].merge(
        slots[static_cast<std::size_t>(i)]);
  return out;
}

struct ScalarSlot {
  ScalarAcc acc;
  void merge(const ScalarSlot& o) { acc.merge(o.acc); }
};

struct VecSlot {
  VecAcc acc;
  void merge(const VecSlot& o) { acc.merge(o.acc); }
};

struct CheckSlot {
  VecAcc vec;
  ScalarAcc rhs;
  VecAcc two;
  ScalarAcc aux;
  void merge(const CheckSlot& o) {
    vec.merge(o.vec);
    rhs.merge(o.rhs);
    two.merge(o.two);
    aux.merge(o.aux);
  }
};

EstimateReport scalar_report(const ScalarAcc& acc) {
  EstimateReport r;
  r.value = acc.mean();
  r.std_error = acc.std_error();
  r.n = acc.n;
  return r;
}

// |mean|^p with its delta-method stderr from a frame-component accumulator.
EstimateReport norm_power_report(const VecAcc& acc, double p) {
  EstimateReport r;
  r.value = std::pow(norm2(acc.mean()), p);
  r.std_error = norm_power_std_error(acc, p);
  r.n = acc.n;
  return r;
}

// |base + coef * mean|^q and its delta-method stderr.
EstimateReport affine_norm_power_report(const VecAcc& acc, const Vec& base, double coef,
                                        double q) {
  const Vec m = acc.mean();
  Vec v = base;
  for (int i = 0; i < acc.dim; ++i) v[i] += coef * m[i];
  EstimateReport r;
  const double rn = norm2(v);
  r.value = std::pow(rn, q);
  r.n = acc.n;
  if (rn > 0.0 && acc.n >= 2) {
    const double f = q * std::pow(rn, q - 2.0) * coef;
    Vec g = Vec::zero(acc.dim);
    for (int i = 0; i < acc.dim; ++i) g[i] = f * v[i];
    const Mat c = acc.mean_covariance();
    double var = 0.0;
    for (int i = 0; i < acc.dim; ++i)
      for (int j = 0; j < acc.dim; ++j) var += g[i] * c(i, j) * g[j];
    r.std_error = std::sqrt(var > 0.0 ? var : 0.0);
  }
  return r;
}

// Chart-component gradient report from frame-component accumulation; the
// scalar value is the g-norm (frame vectors are orthonormal).
EstimateReport frame_vector_report(const Manifold& M, const Point& x, const VecAcc& acc) {
  EstimateReport r;
  const Mat U0 = initial_frame(M, x.chart, x.u);
  const Vec mf = acc.mean();
  r.vec_value = matvec(U0, mf);
  const Mat cov = acc.mean_covariance();
  Vec se = Vec::zero(acc.dim);
  for (int j = 0; j < acc.dim; ++j) {
    double v = 0.0;
    for (int a = 0; a < acc.dim; ++a)
      for (int b = 0; b < acc.dim; ++b) v += U0(j, a) * cov(a, b) * U0(j, b);
    se[j] = std::sqrt(v > 0.0 ? v : 0.0);
  }
  r.vec_stderr = se;
  r.is_vector = true;
  r.value = norm2(mf);
  r.std_error = norm_power_std_error(acc, 1.0);
  r.n = acc.n;
  return r;
}

// Resolvent-damped gradient sample: sum over summands of Q_{0, t_i} c_i.
Vec q_damped_sum(const SummandSet& S, const TransportPack& pack) {
  Vec v = Vec::zero(S.dim);
  for (const Summand& t : S.terms)
    v = v + matvec(pack.q0[static_cast<std::size_t>(t.node)], t.frame_comps);
  return v;
}

EstimateReport grad_core(const Manifold& M, const Cylindrical& F, const Point& x, double T,
                         const EstimatorConfig& cfg) {
  const CurvatureBounds neutral = CurvatureBounds::constants(0.0, 0.0);
  VecSlot proto;
  proto.acc = VecAcc(M.dim());
  auto slots = run_blocks(M, x, T, cfg, &neutral, proto,
                          [&](VecSlot& slot, const PathSample& path, const TransportPack& pack) {
                            slot.acc.add(q_damped_sum(gradient_summands(M, F, path), pack));
                          });
  return frame_vector_report(M, x, merge_all(slots, proto).acc);
}

// ---- conditional expectation backends ----

struct CondMoments {
  bool ok = false;
  double m1 = 0.0;
  double m2 = 0.0;
};

// First two moments of the feature coordinate at lag tau from p. Features are
// embed components: chart coordinates on flat presets, ambient coordinates on
// spheres (eigenfunctions of the generator there).
CondMoments coord_moments(const Manifold& M, const Point& p, int coord, double tau) {
  CondMoments mm;
  switch (M.kind()) {
    case PresetKind::Euclidean: {
      const double xi = p.u[coord];
      mm = {true, xi, xi * xi + 2.0 * tau};
      break;
    }
    case PresetKind::EuclideanOU: {
      const double lam = M.lambda();
      const double xi = p.u[coord];
      const double e = std::exp(-lam * tau);
      const double var = std::fabs(lam) > 1e-12 ? (1.0 - e * e) / lam : 2.0 * tau;
      mm = {true, xi * e, xi * xi * e * e + var};
      break;
    }
    case PresetKind::Sphere: {
      const double n = static_cast<double>(M.dim());
      const double r = M.radius();
      const double yj = M.embed(p)[coord];
      const double e1 = std::exp(-n / (r * r) * tau);
      const double msq = r * r / (n + 1.0);
      const double e2 = std::exp(-2.0 * (n + 1.0) / (r * r) * tau);
      mm = {true, yj * e1, msq + e2 * (yj * yj - msq)};
      break;
    }
    default:
      break;
  }
  return mm;
}

// Gaussian law of the chart point at lag tau on flat presets: mean scaling
// and per-coordinate variance, or not available.
bool flat_law(const Manifold& M, double tau, double& mean_scale, double& var) {
  switch (M.kind()) {
    case PresetKind::Euclidean:
      mean_scale = 1.0;
      var = 2.0 * tau;
      return true;
    case PresetKind::EuclideanOU: {
      const double lam = M.lambda();
      mean_scale = std::exp(-lam * tau);
      var = std::fabs(lam) > 1e-12 ? (1.0 - mean_scale * mean_scale) / lam : 2.0 * tau;
      return true;
    }
    default:
      return false;
  }
}

std::optional<double> analytic_cond(const Manifold& M, const Cylindrical& F,
                                    const PathSample& path, int k_t, bool squared) {
  std::vector<int> nodes;
  nodes.reserve(F.times.size());
  for (double t : F.times) nodes.push_back(path.index_of(t));
  if (k_t >= nodes.back()) {
    const double v = evaluate(M, F, path);
    return squared ? v * v : v;
  }
  if (F.cutoff) return std::nullopt;
  const double s = F.scale;
  const Point pt = point_of(path.states[static_cast<std::size_t>(k_t)]);
  const double tau = (nodes.back() - k_t) * path.dt;
  switch (F.kind) {
    case BatteryKind::Coord:
    case BatteryKind::Eigen: {
      const CondMoments mm = coord_moments(M, pt, F.coord, tau);
      if (!mm.ok) return std::nullopt;
      return squared ? s * s * mm.m2 : s * mm.m1;
    }
    case BatteryKind::Sine: {
      double ms = 0.0, var = 0.0;
      if (!flat_law(M, tau, ms, var)) return std::nullopt;
      const double a = pt.u[F.coord] * ms;
      if (!squared) return s * std::sin(a) * std::exp(-0.5 * var);
      return s * s * 0.5 * (1.0 - std::cos(2.0 * a) * std::exp(-2.0 * var));
    }
    case BatteryKind::GaussBump: {
      double ms = 0.0, var = 0.0;
      if (!flat_law(M, tau, ms, var)) return std::nullopt;
      const int n = M.dim();
      const double w2 = F.bump_width * F.bump_width;
      double d2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = pt.u[i] * ms - F.bump_center[i];
        d2 += d * d;
      }
      // E exp(-|X - c|^2 / (2a)) for X ~ N(m, var I) is
      // (a / (a + var))^(n/2) exp(-|m - c|^2 / (2 (a + var))).
      const double a1 = w2, a2 = 0.5 * w2;
      const double v1 = std::pow(a1 / (a1 + var), 0.5 * n) * std::exp(-d2 / (2.0 * (a1 + var)));
      if (!squared) return s * v1;
      return s * s * std::pow(a2 / (a2 + var), 0.5 * n) * std::exp(-d2 / (2.0 * (a2 + var)));
    }
    case BatteryKind::TwoTime: {
      if (k_t < nodes[0]) return std::nullopt;
      const Point p1 = point_of(path.states[static_cast<std::size_t>(nodes[0])]);
      const double sa = std::sin(M.embed(p1)[F.coord]);
      const CondMoments mm = coord_moments(M, pt, F.coord, tau);
      if (!mm.ok) return std::nullopt;
      return squared ? s * s * sa * sa * mm.m2 : s * sa * mm.m1;
    }
    case BatteryKind::EpsFamily: {
      if (k_t < nodes[0]) return std::nullopt;
      const Point p1 = point_of(path.states[static_cast<std::size_t>(nodes[0])]);
      const double a = M.embed(p1)[F.coord];
      const CondMoments mm = coord_moments(M, pt, F.coord, tau);
      if (!mm.ok) return std::nullopt;
      if (!squared) return s * (a - 0.5 * mm.m1);
      return s * s * (a * a - a * mm.m1 + 0.25 * mm.m2);
    }
  }
  return std::nullopt;
}

struct NestedCond {
  double mean = 0.0;
  double half_a = 0.0;  // independent halves for unbiased products
  double half_b = 0.0;
};

NestedCond nested_conditional(const Manifold& M, const Cylindrical& F, const PathSample& path,
                              int k_t, bool squared, const EstimatorConfig& cfg) {
  const int m = path.n_steps;
  const int rem = m - k_t;
  const int mi = std::max(2, cfg.inner_paths);
  const int half = mi / 2;
  const int n_times = F.n_times();
  std::vector<int> nodes;
  nodes.reserve(static_cast<std::size_t>(n_times));
  for (double t : F.times) nodes.push_back(path.index_of(t));
  int limit = m;
  if (F.cutoff && F.cutoff->m_limit >= 0) limit = std::min(m, F.cutoff->m_limit);
  double rho_prefix = 0.0;
  if (F.cutoff)
    for (int k = 0; k <= std::min(k_t, limit); ++k)
      rho_prefix = std::max(
          rho_prefix, M.distance(point_of(path.states[static_cast<std::size_t>(k)]),
                                 F.cutoff->center));
  std::vector<Point> pts(static_cast<std::size_t>(n_times));
  for (int i = 0; i < n_times; ++i)
    if (nodes[static_cast<std::size_t>(i)] <= k_t)
      pts[static_cast<std::size_t>(i)] =
          point_of(path.states[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])]);
  // Child streams keyed by (outer path, node): never collide with outer ids.
  const std::uint64_t key = derive_stream(derive_stream(path.path_index, 0x6E657374ull),
                                          static_cast<std::uint64_t>(k_t));
  KahanSum ha, hb;
  PathSample inner;
  for (int j = 0; j < mi; ++j) {
    simulate_from(M, path.states[static_cast<std::size_t>(k_t)], rem, path.dt, cfg.seed,
                  derive_stream(key, static_cast<std::uint64_t>(j)), inner);
    for (int i = 0; i < n_times; ++i) {
      const int nd = nodes[static_cast<std::size_t>(i)];
      if (nd > k_t)
        pts[static_cast<std::size_t>(i)] =
            point_of(inner.states[static_cast<std::size_t>(nd - k_t)]);
    }
    double v = F.base_value(M, pts);
    if (F.cutoff) {
      double rho = rho_prefix;
      for (int k = k_t + 1; k <= limit; ++k)
        rho = std::max(rho, M.distance(point_of(inner.states[static_cast<std::size_t>(k - k_t)]),
                                       F.cutoff->center));
      v *= bump_l(rho, F.cutoff->R);
    }
    const double w = squared ? v * v : v;
    (j < half ? ha : hb).add(w);
  }
  NestedCond out;
  out.half_a = ha.value() / half;
  out.half_b = hb.value() / (mi - half);
  out.mean = (ha.value() + hb.value()) / mi;
  return out;
}

// ---- energy quadrature ----

// Midpoint cells over [k_lo, k_hi]: every anchor stays strictly inside the
// window, so an endpoint whose anchored density is empty never carries
// weight (trapezoid endpoints lose O(h) there); weights sum to the window.
struct QuadCells {
  std::vector<int> nodes;
  std::vector<double> w;
};

QuadCells anchor_cells(int k_lo, int k_hi, int count, double dt) {
  QuadCells q;
  const int span = k_hi - k_lo;
  if (span <= 0) return q;
  const int c = std::max(1, std::min(count, span));
  int prev = k_lo;
  for (int j = 1; j <= c; ++j) {
    const int b =
        k_lo + static_cast<int>(std::llround(static_cast<double>(j) * span / c));
    if (b > prev) {
      q.nodes.push_back(prev + (b - prev) / 2);
      q.w.push_back((b - prev) * dt);
    }
    prev = b;
  }
  return q;
}

double energy_quadrature(const SummandSet& S, const TransportPack& pack,
                         const std::vector<int>& nodes, const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j)
    total += w[j] * energy_sample(S, pack, nodes[j]);
  return total;
}

// ---- verdicts ----

CheckOutcome finish_check(const std::string& id, EstimateReport lhs, EstimateReport rhs,
                          const EstimatorConfig& cfg) {
  CheckOutcome out;
  out.check_id = id;
  out.margin = rhs.value - lhs.value;
  const double comb = std::hypot(lhs.std_error, rhs.std_error);
  if (cfg.power_frac > 0.0 && comb > cfg.power_frac * std::fabs(out.margin))
    throw InconclusivePower(id + ": combined stderr " + fmt(comb) +
                            " exceeds " + fmt(cfg.power_frac) + " of margin " + fmt(out.margin));
  // absolute floor so exact equality cases survive rounding when stderr is ~0
  const double floor = 1e-10 * std::max({std::fabs(lhs.value), std::fabs(rhs.value), 1.0});
  const double tol = std::max(cfg.tolerance < 0.0 ? 3.0 * comb : cfg.tolerance, floor);
  if (out.margin < -std::max(3.0 * comb, floor))
    out.verdict = "violated";
  else if (out.margin >= -tol)
    out.verdict = "holds";
  else
    out.verdict = "inconclusive";
  out.lhs = std::move(lhs);
  out.rhs = std::move(rhs);
  return out;
}

// ---- per-check bodies ----

CheckOutcome check_t12_2a(const std::string& id, const Manifold& M, const CurvatureBounds& bounds,
                          const Cylindrical& F, const Point& x, double T,
                          const EstimatorConfig& cfg) {
  require_endpoint(F, T, id);
  validate_exponent(id + ": p", cfg.p);
  const double p = cfg.p;
  CheckSlot proto;
  proto.vec = VecAcc(M.dim());
  auto slots = run_blocks(
      M, x, T, cfg, &bounds, proto,
      [&](CheckSlot& slot, const PathSample& path, const TransportPack& pack) {
        const SummandSet S = gradient_summands(M, F, path);
        const Vec& cT = S.terms.back().frame_comps;
        const int m = path.n_steps;
        slot.vec.add(matvec(pack.q0[static_cast<std::size_t>(m)], cT));
        const double int_k2 = pack.cum_plus[static_cast<std::size_t>(m)] -
                              pack.cum_minus[static_cast<std::size_t>(m)];
        slot.rhs.add(std::exp(-p * int_k2) * std::pow(norm2(cT), p));
      });
  const CheckSlot tot = merge_all(slots, proto);
  return finish_check(id, norm_power_report(tot.vec, p), scalar_report(tot.rhs), cfg);
}

CheckOutcome check_t12_2b(const std::string& id, const Manifold& M, const CurvatureBounds& bounds,
                          const Cylindrical& F, const Point& x, double T,
                          const EstimatorConfig& cfg) {
  require_endpoint(F, T, id);
  validate_exponent(id + ": q", cfg.q);
  const double q = cfg.q;
  const Vec c0 = frame_grad_at(M, F, x);
  CheckSlot proto;
  proto.vec = VecAcc(M.dim());
  auto slots = run_blocks(
      M, x, T, cfg, &bounds, proto,
      [&](CheckSlot& slot, const PathSample& path, const TransportPack& pack) {
        const SummandSet S = gradient_summands(M, F, path);
        const Vec& cT = S.terms.back().frame_comps;
        const int m = path.n_steps;
        slot.vec.add(matvec(pack.q0[static_cast<std::size_t>(m)], cT));
        const double aT = pack.damping_a(0, m);
        const double mu = pack.mu_total_mass(0);
        const Vec inner = c0 - (0.5 * aT) * cT;
        slot.rhs.add(std::pow(1.0 + mu, q - 1.0) *
                     (std::pow(norm2(inner), q) +
                      mu * std::pow(0.5 * aT, q) * std::pow(norm2(cT), q)));
      });
  const CheckSlot tot = merge_all(slots, proto);
  return finish_check(id, affine_norm_power_report(tot.vec, c0, -0.5, q),
                      scalar_report(tot.rhs), cfg);
}

CheckOutcome check_gradient_bound(const std::string& id, const Manifold& M,
                                  const CurvatureBounds& bounds, const Cylindrical& F,
                                  const Point& x, double T, const EstimatorConfig& cfg) {
  // T12-3 (|.|^q, two-sided weights) and T11-2 (q = 1, upper side).
  const bool upper_side = id == "T11-2";
  const double q = upper_side ? 1.0 : cfg.q;
  if (!upper_side) validate_exponent(id + ": q", cfg.q);
  CheckSlot proto;
  proto.vec = VecAcc(M.dim());
  auto slots = run_blocks(
      M, x, T, cfg, &bounds, proto,
      [&](CheckSlot& slot, const PathSample& path, const TransportPack& pack) {
        const SummandSet S = gradient_summands(M, F, path);
        slot.vec.add(q_damped_sum(S, pack));
        const GradientDensity D = modified_density(S, pack, 0);
        double integral = 0.0;
        for (int k = 0; k < pack.n_steps; ++k)
          integral += pack.mu_step_mass(k, 0) * std::pow(norm2(D.at_step(k)), q);
        const double head = std::pow(norm2(D.at_step(0)), q);
        if (upper_side)
          slot.rhs.add(head + integral);
        else
          slot.rhs.add(std::pow(1.0 + pack.mu_total_mass(0), q - 1.0) * (head + integral));
      });
  const CheckSlot tot = merge_all(slots, proto);
  return finish_check(id, norm_power_report(tot.vec, q), scalar_report(tot.rhs), cfg);
}

CheckOutcome check_energy_bound(const std::string& id, const Manifold& M,
                                const CurvatureBounds& bounds, const Cylindrical& F,
                                const Point& x, double T, const EstimatorConfig& cfg) {
  CheckSlot proto;
  proto.vec = VecAcc(M.dim());
  auto slots = run_blocks(
      M, x, T, cfg, &bounds, proto,
      [&](CheckSlot& slot, const PathSample& path, const TransportPack& pack) {
        const SummandSet S = gradient_summands(M, F, path);
        slot.vec.add(q_damped_sum(S, pack));
        slot.rhs.add(energy_sample(S, pack, 0));
      });
  const CheckSlot tot = merge_all(slots, proto);
  return finish_check(id, norm_power_report(tot.vec, 2.0), scalar_report(tot.rhs), cfg);
}

CheckOutcome check_log_sobolev(const std::string& id, const Manifold& M,
                               const CurvatureBounds& bounds, const Cylindrical& F,
                               const Point& x, double T, const EstimatorConfig& cfg) {
  const double t0v = cfg.t0 >= 0.0 ? cfg.t0 : 0.0;
  const double t1v = cfg.t1 >= 0.0 ? cfg.t1 : T;
  if (!(t0v < t1v && t1v <= T * (1.0 + 1e-12)))
    throw ConfigError(id + " needs 0 <= t0 < t1 <= T");
  const int m = grid_index(T, cfg.dt, std::numeric_limits<int>::max() / 2, id);
  const int k0 = grid_index(t0v, cfg.dt, m, id);
  const int k1 = grid_index(t1v, cfg.dt, m, id);
  const QuadCells cells = anchor_cells(k0, k1, cfg.quad_anchors, cfg.dt);
  const std::vector<int>& nodes = cells.nodes;
  const std::vector<double>& w = cells.w;
  CheckSlot proto;
  proto.two = VecAcc(2);
  auto slots = run_blocks(
      M, x, T, cfg, &bounds, proto,
      [&](CheckSlot& slot, const PathSample& path, const TransportPack& pack) {
        const double g1 = conditional_exp(M, F, path, t1v, true, cfg);
        if (k0 == 0) {
          const double fv = evaluate(M, F, path);
          Vec pr = Vec::zero(2);
          pr[0] = xlogx(g1);
          pr[1] = fv * fv;
          slot.two.add(pr);
        } else {
          const double g0 = conditional_exp(M, F, path, t0v, true, cfg);
          slot.aux.add(xlogx(g1) - xlogx(g0));
        }
        const SummandSet S = gradient_summands(M, F, path);
        slot.rhs.add(energy_quadrature(S, pack, nodes, w));
      });
  const CheckSlot tot = merge_all(slots, proto);
  EstimateReport lhs;
  if (k0 == 0) {
    const Vec mv = tot.two.mean();
    lhs.value = mv[0] - xlogx(mv[1]);
    lhs.n = tot.two.n;
    if (tot.two.n >= 2) {
      Vec g = Vec::zero(2);
      g[0] = 1.0;
      g[1] = mv[1] > 0.0 ? -(1.0 + std::log(mv[1])) : 0.0;
      const Mat c = tot.two.mean_covariance();
      double var = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) var += g[i] * c(i, j) * g[j];
      lhs.std_error = std::sqrt(var > 0.0 ? var : 0.0);
    }
  } else {
    lhs = scalar_report(tot.aux);
  }
  EstimateReport rhs = scalar_report(tot.rhs);
  rhs.value *= 4.0;
  rhs.std_error *= 4.0;
  return finish_check(id, std::move(lhs), std::move(rhs), cfg);
}

CheckOutcome check_poincare(const std::string& id, const Manifold& M,
                            const CurvatureBounds& bounds, const Cylindrical& F, const Point& x,
                            double T, const EstimatorConfig& cfg) {
  const double tv = cfg.t1 >= 0.0 ? cfg.t1 : T;
  if (!(tv >= 0.0 && tv <= T * (1.0 + 1e-12))) throw ConfigError(id + " needs 0 <= t <= T");
  const int m = grid_index(T, cfg.dt, std::numeric_limits<int>::max() / 2, id);
  const int k_t = grid_index(tv, cfg.dt, m, id);
  const QuadCells cells = anchor_cells(0, k_t, cfg.quad_anchors, cfg.dt);
  const std::vector<int>& nodes = cells.nodes;
  const std::vector<double>& w = cells.w;
  CheckSlot proto;
  proto.two = VecAcc(2);
  auto slots = run_blocks(
      M, x, T, cfg, &bounds, proto,
      [&](CheckSlot& slot, const PathSample& path, const TransportPack& pack) {
        const double fv = evaluate(M, F, path);
        double gsq = 0.0;
        if (k_t >= m) {
          gsq = fv * fv;
        } else if (const auto a = analytic_cond(M, F, path, k_t, false)) {
          gsq = *a * *a;
        } else if (cfg.allow_nested) {
          const NestedCond nc = nested_conditional(M, F, path, k_t, false, cfg);
          gsq = nc.half_a * nc.half_b;
        } else {
          throw NoBackend(id + ": no analytic conditional and nesting is disabled");
        }
        Vec pr = Vec::zero(2);
        pr[0] = gsq;
        pr[1] = fv;
        slot.two.add(pr);
        const SummandSet S = gradient_summands(M, F, path);
        slot.rhs.add(energy_quadrature(S, pack, nodes, w));
      });
  const CheckSlot tot = merge_all(slots, proto);
  const Vec mv = tot.two.mean();
  // Unbiased (E F)^2 from the second component's running sums.
  const double sf = tot.two.sum[1].value();
  const double qf = tot.two.cross[1 * kMaxDim + 1].value();
  const double dn = static_cast<double>(tot.two.n);
  const double ef_sq = tot.two.n >= 2 ? (sf * sf - qf) / (dn * (dn - 1.0)) : mv[1] * mv[1];
  EstimateReport lhs;
  lhs.value = mv[0] - ef_sq;
  lhs.n = tot.two.n;
  if (tot.two.n >= 2) {
    Vec g = Vec::zero(2);
    g[0] = 1.0;
    g[1] = -2.0 * mv[1];
    const Mat c = tot.two.mean_covariance();
    double var = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) var += g[i] * c(i, j) * g[j];
    lhs.std_error = std::sqrt(var > 0.0 ? var : 0.0);
  }
  EstimateReport rhs = scalar_report(tot.rhs);
  rhs.value *= 2.0;
  rhs.std_error *= 2.0;
  return finish_check(id, std::move(lhs), std::move(rhs), cfg);
}

CheckOutcome check_c22_grad(const std::string& id, const Manifold& M,
                            const CurvatureBounds& bounds, const Cylindrical& F, const Point& x,
                            double T, const EstimatorConfig& cfg) {
  require_endpoint(F, T, id);
  validate_exponent(id + ": p", cfg.p);
  if (!bounds.is_constant()) throw ConfigError(id + " needs constant bounds");
  const double p = cfg.p;
  CheckSlot proto;
  proto.vec = VecAcc(M.dim());
  auto slots = run_blocks(
      M, x, T, cfg, &bounds, proto,
      [&](CheckSlot& slot, const PathSample& path, const TransportPack& pack) {
        const SummandSet S = gradient_summands(M, F, path);
        const Vec& cT = S.terms.back().frame_comps;
        slot.vec.add(matvec(pack.q0[static_cast<std::size_t>(path.n_steps)], cT));
        slot.rhs.add(std::pow(norm2(cT), p));
      });
  const CheckSlot tot = merge_all(slots, proto);
  EstimateReport rhs = scalar_report(tot.rhs);
  const double factor = std::exp(-bounds.K2 * p * T);
  rhs.value *= factor;
  rhs.std_error *= factor;
  return finish_check(id, norm_power_report(tot.vec, p), std::move(rhs), cfg);
}

CheckOutcome check_c22_second(const std::string& id, const Manifold& M,
                              const CurvatureBounds& bounds, const Cylindrical& F, const Point& x,
                              double T, const EstimatorConfig& cfg) {
  require_endpoint(F, T, id);
  validate_exponent(id + ": q", cfg.q);
  if (!bounds.is_constant()) throw ConfigError(id + " needs constant bounds");
  const double q = cfg.q;
  const Vec c0 = frame_grad_at(M, F, x);
  const double aT = std::exp(-0.5 * (bounds.K1 + bounds.K2) * T);
  const double tail = (std::exp(0.5 * (bounds.K1 - bounds.K2) * T) - 1.0) *
                      std::pow(0.5 * aT, q);
  CheckSlot proto;
  proto.vec = VecAcc(M.dim());
  auto slots = run_blocks(
      M, x, T, cfg, &bounds, proto,
      [&](CheckSlot& slot, const PathSample& path, const TransportPack& pack) {
        const SummandSet S = gradient_summands(M, F, path);
        const Vec& cT = S.terms.back().frame_comps;
        slot.vec.add(matvec(pack.q0[static_cast<std::size_t>(path.n_steps)], cT));
        const Vec inner = c0 - (0.5 * aT) * cT;
        slot.rhs.add(std::pow(norm2(inner), q) + tail * std::pow(norm2(cT), q));
      });
  const CheckSlot tot = merge_all(slots, proto);
  EstimateReport rhs = scalar_report(tot.rhs);
  const double factor = std::exp(0.5 * (bounds.K1 - bounds.K2) * (q - 1.0) * T);
  rhs.value *= factor;
  rhs.std_error *= factor;
  return finish_check(id, affine_norm_power_report(tot.vec, c0, -0.5, q), std::move(rhs), cfg);
}

CheckOutcome check_exit(const std::string& id, const Manifold& M, const Cylindrical& F,
                        const Point& x, const EstimatorConfig& cfg) {
  if (!F.cutoff) throw ConfigError(id + " needs a cutoff radius (functional.cutoff_R)");
  const double R = F.cutoff->R;
  const std::vector<double> Ts =
      cfg.T_list.empty() ? std::vector<double>{0.05, 0.1, 0.2} : cfg.T_list;
  const ExitCurve curve = exit_stats(M, x, R, Ts, cfg.dt, cfg.n_paths, cfg.seed);
  if (curve.all_zero) {
    std::string msg = id + ": no exits at any horizon; 95% upper bounds:";
    for (std::size_t i = 0; i < curve.T.size(); ++i)
      msg += " p(" + fmt(curve.T[i]) + ") <= " + fmt(curve.upper95[i]);
    throw AllZeroExits(msg);
  }
  EstimateReport lhs;
  lhs.value = curve.c_hat;
  lhs.n = curve.n_paths;
  // OLS slope stderr of -log p against 1/T over the fitted horizons.
  if (curve.n_fit >= 3) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < curve.T.size(); ++i)
      if (curve.p_hat[i] > 0.0) {
        xs.push_back(1.0 / curve.T[i]);
        ys.push_back(-std::log(curve.p_hat[i]));
      }
    const int nf = static_cast<int>(xs.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < nf; ++i) {
      mx += xs[static_cast<std::size_t>(i)];
      my += ys[static_cast<std::size_t>(i)];
    }
    mx /= nf;
    my /= nf;
    double sxx = 0.0, ssr = 0.0;
    for (int i = 0; i < nf; ++i) {
      const double dx = xs[static_cast<std::size_t>(i)] - mx;
      sxx += dx * dx;
      const double resid = ys[static_cast<std::size_t>(i)] - my - curve.c_hat * dx;
      ssr += resid * resid;
    }
    if (sxx > 0.0) lhs.std_error = std::sqrt(ssr / (nf - 2) / sxx);
  }
  EstimateReport rhs;
  rhs.value = R * R / 4.0;
  rhs.n = curve.n_paths;
  rhs.add_extra("r2", curve.r2);
  rhs.add_extra("intercept", curve.intercept);
  rhs.add_extra("n_fit", static_cast<double>(curve.n_fit));
  for (std::size_t i = 0; i < curve.T.size(); ++i) {
    const std::string tag = "_T" + std::to_string(i + 1);
    rhs.add_extra("p_hat" + tag, curve.p_hat[i]);
    rhs.add_extra("stderr" + tag, curve.std_err[i]);
    rhs.add_extra("upper95" + tag, curve.upper95[i]);
  }
  CheckOutcome out;
  out.check_id = id;
  out.margin = rhs.value - lhs.value;
  out.verdict = (curve.n_fit < 2 || curve.r2 <= 0.9) ? "inconclusive" : "holds";
  out.lhs = std::move(lhs);
  out.rhs = std::move(rhs);
  return out;
}

// ---- multi-horizon machinery (RIC and slope limits) ----

struct MultiTSlot {
  std::vector<VecAcc> y;    // resolvent-damped gradient terms per horizon
  std::vector<ScalarAcc> w; // scalar side per horizon
  std::vector<ScalarAcc> f; // endpoint values per horizon (variance form)
  void merge(const MultiTSlot& o) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i].merge(o.y[i]);
    for (std::size_t i = 0; i < w.size(); ++i) w[i].merge(o.w[i]);
    for (std::size_t i = 0; i < f.size(); ++i) f[i].merge(o.f[i]);
  }
};

std::vector<double> sorted_horizons(std::vector<double> T_list) {
  if (T_list.empty()) T_list = {0.02, 0.04, 0.08};
  std::sort(T_list.begin(), T_list.end());
  if (T_list.size() < 2) throw ConfigError("short-time statistics need at least two horizons");
  if (T_list.front() <= 0.0) throw ConfigError("horizons must be positive");
  return T_list;
}

double richardson(const std::vector<double>& d) { return 2.0 * d[0] - d[1]; }

}  // namespace

EstimateReport estimate_pt(const Manifold& M, const Cylindrical& F, const Point& x, double T,
                           const EstimatorConfig& cfg) {
  ScalarSlot proto;
  auto slots = run_blocks(M, x, T, cfg, nullptr, proto,
                          [&](ScalarSlot& slot, const PathSample& path, const TransportPack&) {
                            slot.acc.add(evaluate(M, F, path));
                          });
  return scalar_report(merge_all(slots, proto).acc);
}

EstimateReport grad_bismut(const Manifold& M, const Cylindrical& F, const Point& x, double T,
                           const EstimatorConfig& cfg) {
  if (F.n_times() != 1 || F.cutoff)
    throw ConfigError("grad_bismut needs a one-point functional without cutoff");
  return grad_core(M, F, x, T, cfg);
}

EstimateReport grad_cylindrical(const Manifold& M, const Cylindrical& F, const Point& x, double T,
                                const EstimatorConfig& cfg) {
  return grad_core(M, F, x, T, cfg);
}

EstimateReport grad_fd(const Manifold& M, const Cylindrical& F, const Point& x, double T,
                       const EstimatorConfig& cfg) {
  const int n = M.dim();
  const double del = cfg.fd_delta;
  if (!(del > 0.0)) throw ConfigError("grad_fd needs fd_delta > 0");
  std::vector<Point> plus(static_cast<std::size_t>(n), x);
  std::vector<Point> minus(static_cast<std::size_t>(n), x);
  for (int i = 0; i < n; ++i) {
    plus[static_cast<std::size_t>(i)].u[i] += del;
    minus[static_cast<std::size_t>(i)].u[i] -= del;
    M.require_in_chart(x.chart, plus[static_cast<std::size_t>(i)].u);
    M.require_in_chart(x.chart, minus[static_cast<std::size_t>(i)].u);
  }
  const std::uint64_t nb = (cfg.n_paths + kPathBlock - 1) / kPathBlock;
  VecSlot proto;
  proto.acc = VecAcc(n);
  std::vector<VecSlot> slots(static_cast<std::size_t>(nb), proto);
  parallel_blocks(cfg.n_paths, kPathBlock,
                  [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
                    PathSample pp, pm;
                    VecSlot& slot = slots[static_cast<std::size_t>(b)];
                    for (std::uint64_t i = first; i < last; ++i) {
                      Vec d = Vec::zero(n);
                      for (int j = 0; j < n; ++j) {
                        simulate_path(M, plus[static_cast<std::size_t>(j)], T, cfg.dt, cfg.seed,
                                      i, pp);
                        simulate_path(M, minus[static_cast<std::size_t>(j)], T, cfg.dt, cfg.seed,
                                      i, pm);
                        d[j] = (evaluate(M, F, pp) - evaluate(M, F, pm)) / (2.0 * del);
                      }
                      slot.acc.add(d);
                    }
                  });
  const VecAcc acc = merge_all(slots, proto).acc;
  const Vec partials = acc.mean();  // coordinate partials of E F at x
  const Mat gi = M.metric_inverse_at(x.chart, x.u);
  EstimateReport r;
  r.vec_value = matvec(gi, partials);
  const Mat cov = acc.mean_covariance();
  Vec se = Vec::zero(n);
  for (int j = 0; j < n; ++j) {
    double v = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) v += gi(j, a) * cov(a, b) * gi(j, b);
    se[j] = std::sqrt(v > 0.0 ? v : 0.0);
  }
  r.vec_stderr = se;
  r.is_vector = true;
  r.value = std::sqrt(std::max(0.0, dot(partials, r.vec_value)));
  if (r.value > 0.0 && acc.n >= 2) {
    Vec g = (1.0 / r.value) * r.vec_value;  // d|grad|/d(partials)
    double var = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) var += g[a] * cov(a, b) * g[b];
    r.std_error = std::sqrt(var > 0.0 ? var : 0.0);
  }
  r.n = acc.n;
  return r;
}

double conditional_exp(const Manifold& M, const Cylindrical& F, const PathSample& path, double t,
                       bool squared, const EstimatorConfig& cfg, CondMode mode) {
  const int k_t = path.index_of(t);
  if (mode != CondMode::Nested) {
    if (const auto a = analytic_cond(M, F, path, k_t, squared)) return *a;
    if (mode == CondMode::Analytic)
      throw NoBackend("no analytic conditional for this functional on " + M.name());
    if (!cfg.allow_nested)
      throw NoBackend("no analytic conditional and nesting is disabled (allow_nested)");
  }
  return nested_conditional(M, F, path, k_t, squared, cfg).mean;
}

CheckOutcome check_inequality(const std::string& check_id, const Manifold& M,
                              const CurvatureBounds& bounds, const Cylindrical& F, const Point& x,
                              double T, const EstimatorConfig& cfg) {
  if (check_id == "T12-2a") return check_t12_2a(check_id, M, bounds, F, x, T, cfg);
  if (check_id == "T12-2b") return check_t12_2b(check_id, M, bounds, F, x, T, cfg);
  if (check_id == "T12-3") return check_gradient_bound(check_id, M, bounds, F, x, T, cfg);
  if (check_id == "T12-4") return check_log_sobolev(check_id, M, bounds, F, x, T, cfg);
  if (check_id == "T12-5") return check_poincare(check_id, M, bounds, F, x, T, cfg);
  if (check_id == "T11-2") {
    require_localized(M, bounds, F, x, cfg, check_id);
    return check_gradient_bound(check_id, M, bounds, F, x, T, cfg);
  }
  if (check_id == "T11-3") {
    require_localized(M, bounds, F, x, cfg, check_id);
    return check_energy_bound(check_id, M, bounds, F, x, T, cfg);
  }
  if (check_id == "T11-4") {
    require_localized(M, bounds, F, x, cfg, check_id);
    return check_log_sobolev(check_id, M, bounds, F, x, T, cfg);
  }
  if (check_id == "T11-5") {
    require_localized(M, bounds, F, x, cfg, check_id);
    return check_poincare(check_id, M, bounds, F, x, T, cfg);
  }
  if (check_id == "C22-grad") return check_c22_grad(check_id, M, bounds, F, x, T, cfg);
  if (check_id == "C22-second") return check_c22_second(check_id, M, bounds, F, x, T, cfg);
  if (check_id == "EXIT") return check_exit(check_id, M, F, x, cfg);
  if (check_id == "RIC") {
    EstimateReport est = ricci_short_time(M, F, x, cfg.p, cfg.T_list, cfg);
    CheckOutcome out;
    out.check_id = check_id;
    out.verdict = "estimate";
    EstimateReport ref;
    if (const auto c = M.einstein_constant()) {
      ref.value = *c;
      out.margin = *c - est.value;
    }
    out.rhs = std::move(ref);
    out.lhs = std::move(est);
    return out;
  }
  if (check_id == "SLOPE-LOWER" || check_id == "SLOPE-UPPER") {
    const std::string side = check_id == "SLOPE-LOWER" ? "lower" : "upper";
    EstimateReport est = slope_detector(M, bounds, side, F, x, cfg.T_list, cfg);
    EstimateReport floor;  // a correct bound keeps the gap slope nonnegative
    return finish_check(check_id, std::move(floor), std::move(est), cfg);
  }
  throw ConfigError("unknown check id '" + check_id + "'");
}

EstimateReport ricci_short_time(const Manifold& M, const Cylindrical& f, const Point& x, double p,
                                std::vector<double> T_list, const EstimatorConfig& cfg) {
  validate_exponent("RIC: p", p);
  if (f.n_times() != 1 || f.cutoff)
    throw ConfigError("RIC needs a one-point functional without cutoff");
  const std::vector<double> Ts = sorted_horizons(std::move(T_list));
  const int nT = static_cast<int>(Ts.size());
  const double Tmax = Ts.back();
  const int m = grid_index(Tmax, cfg.dt, std::numeric_limits<int>::max() / 2, "RIC");
  std::vector<int> ks(static_cast<std::size_t>(nT));
  for (int i = 0; i < nT; ++i) ks[static_cast<std::size_t>(i)] = grid_index(Ts[i], cfg.dt, m, "RIC");
  const CurvatureBounds neutral = CurvatureBounds::constants(0.0, 0.0);
  MultiTSlot proto;
  proto.y.assign(static_cast<std::size_t>(nT), VecAcc(M.dim()));
  proto.w.assign(static_cast<std::size_t>(nT), ScalarAcc{});
  proto.f.assign(static_cast<std::size_t>(nT), ScalarAcc{});
  auto slots = run_blocks(
      M, x, Tmax, cfg, &neutral, proto,
      [&](MultiTSlot& slot, const PathSample& path, const TransportPack& pack) {
        for (int i = 0; i < nT; ++i) {
          const int k = ks[static_cast<std::size_t>(i)];
          const FrameState& st = path.states[static_cast<std::size_t>(k)];
          const Point pt = point_of(st);
          const Vec c = matvec_t(st.U, f.base_partials(M, {pt}, 0));
          slot.y[static_cast<std::size_t>(i)].add(matvec(pack.q0[static_cast<std::size_t>(k)], c));
          slot.w[static_cast<std::size_t>(i)].add(std::pow(norm2(c), p));
          slot.f[static_cast<std::size_t>(i)].add(f.base_value(M, {pt}));
        }
      });
  const MultiTSlot tot = merge_all(slots, proto);
  const auto quotients = [&](const MultiTSlot& s, std::vector<double>& va,
                             std::vector<double>& vb) {
    va.assign(static_cast<std::size_t>(nT), 0.0);
    vb.assign(static_cast<std::size_t>(nT), 0.0);
    for (int i = 0; i < nT; ++i) {
      const double gp = norm2(s.y[static_cast<std::size_t>(i)].mean());
      const double t = Ts[static_cast<std::size_t>(i)];
      va[static_cast<std::size_t>(i)] =
          (s.w[static_cast<std::size_t>(i)].mean() - std::pow(gp, p)) / (p * t);
      vb[static_cast<std::size_t>(i)] =
          (s.f[static_cast<std::size_t>(i)].variance() / (2.0 * t) - gp * gp) / t;
    }
  };
  std::vector<double> va, vb;
  quotients(tot, va, vb);
  const double ra = richardson(va);
  const double rb = richardson(vb);
  const auto batches = regroup_batches(slots, cfg.batches, proto);
  const int nB = static_cast<int>(batches.size());
  ScalarAcc ra_acc, rb_acc, lin_acc;
  std::vector<double> bva, bvb;
  for (const MultiTSlot& b : batches) {
    quotients(b, bva, bvb);
    ra_acc.add(richardson(bva));
    rb_acc.add(richardson(bvb));
    if (nT >= 3) {
      const double pred =
          bva[0] + (bva[1] - bva[0]) * (Ts[2] - Ts[0]) / (Ts[1] - Ts[0]);
      lin_acc.add(bva[2] - pred);
    }
  }
  EstimateReport r;
  r.value = ra;
  r.std_error = nB >= 2 ? ra_acc.std_error() : 0.0;
  r.n = cfg.n_paths;
  for (int i = 0; i < nT; ++i) {
    const std::string tag = "_" + std::to_string(i + 1);
    r.add_extra("T" + tag, Ts[static_cast<std::size_t>(i)]);
    r.add_extra("vA" + tag, va[static_cast<std::size_t>(i)]);
    r.add_extra("vB" + tag, vb[static_cast<std::size_t>(i)]);
  }
  r.add_extra("form_b", rb);
  r.add_extra("form_b_stderr", nB >= 2 ? rb_acc.std_error() : 0.0);
  if (nT >= 3) {
    const double pred = va[0] + (va[1] - va[0]) * (Ts[2] - Ts[0]) / (Ts[1] - Ts[0]);
    r.add_extra("linearity_resid", va[2] - pred);
    r.add_extra("linearity_stderr", nB >= 2 ? lin_acc.std_error() : 0.0);
  }
  if (const auto c = M.einstein_constant()) r.add_extra("reference", *c);
  return r;
}

EstimateReport slope_detector(const Manifold& M, const CurvatureBounds& bounds,
                              const std::string& side, const Cylindrical& f, const Point& x,
                              std::vector<double> T_list, const EstimatorConfig& cfg) {
  const bool lower = side == "lower";
  if (!lower && side != "upper") throw ConfigError("slope side must be 'lower' or 'upper'");
  if (f.n_times() != 1 || f.cutoff)
    throw ConfigError("slope detection needs a one-point functional without cutoff");
  const double p = cfg.p;
  validate_exponent("slope: p", p);
  const std::vector<double> Ts = sorted_horizons(std::move(T_list));
  const int nT = static_cast<int>(Ts.size());
  const double Tmax = Ts.back();
  const int m = grid_index(Tmax, cfg.dt, std::numeric_limits<int>::max() / 2, "slope");
  std::vector<int> ks(static_cast<std::size_t>(nT));
  for (int i = 0; i < nT; ++i)
    ks[static_cast<std::size_t>(i)] = grid_index(Ts[i], cfg.dt, m, "slope");
  const Vec c0 = frame_grad_at(M, f, x);
  MultiTSlot proto;
  proto.y.assign(static_cast<std::size_t>(nT), VecAcc(M.dim()));
  proto.w.assign(static_cast<std::size_t>(nT), ScalarAcc{});
  auto slots = run_blocks(
      M, x, Tmax, cfg, &bounds, proto,
      [&](MultiTSlot& slot, const PathSample& path, const TransportPack& pack) {
        // mu mass accumulated along the grid, reused across horizons
        double mu_to = 0.0;
        int done = 0;
        for (int i = 0; i < nT; ++i) {
          const int k = ks[static_cast<std::size_t>(i)];
          const FrameState& st = path.states[static_cast<std::size_t>(k)];
          const Point pt = point_of(st);
          const Vec c = matvec_t(st.U, f.base_partials(M, {pt}, 0));
          slot.y[static_cast<std::size_t>(i)].add(matvec(pack.q0[static_cast<std::size_t>(k)], c));
          if (lower) {
            const double int_k2 = pack.cum_plus[static_cast<std::size_t>(k)] -
                                  pack.cum_minus[static_cast<std::size_t>(k)];
            slot.w[static_cast<std::size_t>(i)].add(std::exp(-p * int_k2) *
                                                    std::pow(norm2(c), p));
          } else {
            for (; done < k; ++done) mu_to += pack.mu_step_mass(done, 0);
            const double aT = pack.damping_a(0, k);
            const Vec inner = c0 - (0.5 * aT) * c;
            slot.w[static_cast<std::size_t>(i)].add(
                (1.0 + mu_to) * (sqnorm(inner) + mu_to * 0.25 * aT * aT * sqnorm(c)));
          }
        }
      });
  const MultiTSlot tot = merge_all(slots, proto);
  const auto quotients = [&](const MultiTSlot& s, std::vector<double>& d) {
    d.assign(static_cast<std::size_t>(nT), 0.0);
    for (int i = 0; i < nT; ++i) {
      const double t = Ts[static_cast<std::size_t>(i)];
      const Vec my = s.y[static_cast<std::size_t>(i)].mean();
      if (lower) {
        d[static_cast<std::size_t>(i)] =
            (s.w[static_cast<std::size_t>(i)].mean() - std::pow(norm2(my), p)) / (p * t);
      } else {
        const Vec v = c0 - 0.5 * my;
        d[static_cast<std::size_t>(i)] =
            (s.w[static_cast<std::size_t>(i)].mean() - sqnorm(v)) / t;
      }
    }
  };
  std::vector<double> d;
  quotients(tot, d);
  const auto batches = regroup_batches(slots, cfg.batches, proto);
  ScalarAcc r_acc;
  std::vector<double> bd;
  for (const MultiTSlot& b : batches) {
    quotients(b, bd);
    r_acc.add(richardson(bd));
  }
  EstimateReport r;
  r.value = richardson(d);
  r.std_error = batches.size() >= 2 ? r_acc.std_error() : 0.0;
  r.n = cfg.n_paths;
  for (int i = 0; i < nT; ++i) {
    const std::string tag = "_" + std::to_string(i + 1);
    r.add_extra("T" + tag, Ts[static_cast<std::size_t>(i)]);
    r.add_extra("d" + tag, d[static_cast<std::size_t>(i)]);
  }
  if (cfg.power_frac > 0.0 && r.std_error > cfg.power_frac * std::fabs(r.value))
    throw InconclusivePower("slope " + side + ": stderr " + fmt(r.std_error) +
                            " exceeds " + fmt(cfg.power_frac) + " of |" + fmt(r.value) + "|");
  return r;
}

}  // namespace pathcurv
