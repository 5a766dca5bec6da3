#include "pathcurv/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathcurv/errors.hpp"

namespace pathcurv {

namespace {

// Feature coordinates the battery functions act on: ambient coordinates on
// spheres (globally smooth), chart coordinates elsewhere.
Vec feature(const Manifold& M, const Point& p) { return M.embed(p); }

namespace {
double sqnorm(const Vec& v) { return dot(v, v); }
}  // namespace

// C-infinity ramp: 0 for a <= 0, 1 for a >= 1.
double smoothstep(double a) {
  if (a <= 0.0) return 0.0;
  if (a >= 1.0) return 1.0;
  const double ea = std::exp(-1.0 / a);
  const double eb = std::exp(-1.0 / (1.0 - a));
  return ea / (ea + eb);
}

double smoothstep_prime(double a) {
  if (a <= 0.0 || a >= 1.0) return 0.0;
  const double ea = std::exp(-1.0 / a);
  const double eb = std::exp(-1.0 / (1.0 - a));
  const double da = ea / (a * a);
  const double db = -eb / ((1.0 - a) * (1.0 - a));
  const double s = ea + eb;
  return (da * s - ea * (da + db)) / (s * s);
}

Point point_of(const FrameState& st) {
  Point p;
  p.chart = st.chart;
  p.u = st.u;
  return p;
}

}  // namespace

double bump_l(double rho, double R) {
  if (R <= 0.0) return 1.0;
  return 1.0 - smoothstep((rho - 0.5 * R) / (0.5 * R));
}

double bump_l_prime(double rho, double R) {
  if (R <= 0.0) return 0.0;
  return -smoothstep_prime((rho - 0.5 * R) / (0.5 * R)) * (2.0 / R);
}

double Cylindrical::base_value(const Manifold& M, const std::vector<Point>& pts) const {
  switch (kind) {
    case BatteryKind::Coord:
    case BatteryKind::Eigen:
      return scale * feature(M, pts[0])[coord];
    case BatteryKind::GaussBump: {
      const Vec xi = feature(M, pts[0]);
      return scale * std::exp(-sqnorm(xi - bump_center) / (2.0 * bump_width * bump_width));
    }
    case BatteryKind::Sine:
      return scale * std::sin(feature(M, pts[0])[coord]);
    case BatteryKind::TwoTime: {
      const Vec a = feature(M, pts[0]);
      const Vec b = feature(M, pts[1]);
      return scale * std::sin(a[coord]) * b[coord];
    }
    case BatteryKind::EpsFamily: {
      const Vec a = feature(M, pts[0]);
      const Vec b = feature(M, pts[1]);
      return scale * (a[coord] - 0.5 * b[coord]);
    }
  }
  return 0.0;
}

Vec Cylindrical::base_partials(const Manifold& M, const std::vector<Point>& pts, int i) const {
  const int n = M.dim();
  const int fd = M.ambient_dim();
  const Point& p = pts[static_cast<std::size_t>(i)];
  Vec dxi = Vec::zero(fd);
  switch (kind) {
    case BatteryKind::Coord:
    case BatteryKind::Eigen:
      dxi[coord] = scale;
      break;
    case BatteryKind::GaussBump: {
      const Vec xi = feature(M, p);
      const double v =
          scale * std::exp(-sqnorm(xi - bump_center) / (2.0 * bump_width * bump_width));
      dxi = (-v / (bump_width * bump_width)) * (xi - bump_center);
      break;
    }
    case BatteryKind::Sine:
      dxi[coord] = scale * std::cos(feature(M, p)[coord]);
      break;
    case BatteryKind::TwoTime: {
      const Vec a = feature(M, pts[0]);
      const Vec b = feature(M, pts[1]);
      if (i == 0)
        dxi[coord] = scale * std::cos(a[coord]) * b[coord];
      else
        dxi[coord] = scale * std::sin(a[coord]);
      break;
    }
    case BatteryKind::EpsFamily:
      dxi[coord] = (i == 0 ? scale : -0.5 * scale);
      break;
  }
  const auto J = M.embed_jacobian(p);
  Vec out = Vec::zero(n);
  for (int q = 0; q < fd; ++q)
    if (dxi[q] != 0.0) out = out + dxi[q] * J[static_cast<std::size_t>(q)];
  return out;
}

RadiusInfo discrete_radius(const Manifold& M, const PathSample& path, const Point& center,
                           int m_limit) {
  const int last = (m_limit < 0 || m_limit > path.n_steps) ? path.n_steps : m_limit;
  RadiusInfo info;
  double best = -1.0;
  double second = -1.0;
  for (int k = 0; k <= last; ++k) {
    const double d = M.distance(point_of(path.states[static_cast<std::size_t>(k)]), center);
    if (d > best) {
      second = best;
      best = d;
      info.argmax = k;
    } else if (d > second) {
      second = d;
    }
  }
  info.rho = best;
  info.tie_gap = (second < 0.0) ? std::numeric_limits<double>::infinity() : best - second;
  return info;
}

double evaluate(const Manifold& M, const Cylindrical& F, const PathSample& path) {
  std::vector<Point> pts;
  pts.reserve(F.times.size());
  for (double t : F.times)
    pts.push_back(point_of(path.states[static_cast<std::size_t>(path.index_of(t))]));
  double v = F.base_value(M, pts);
  if (F.cutoff && F.cutoff->R > 0.0) {
    const RadiusInfo ri = discrete_radius(M, path, F.cutoff->center, F.cutoff->m_limit);
    v *= bump_l(ri.rho, F.cutoff->R);
  }
  return v;
}

SummandSet gradient_summands(const Manifold& M, const Cylindrical& F, const PathSample& path) {
  const int N = F.n_times();
  std::vector<int> nodes(static_cast<std::size_t>(N));
  std::vector<Point> pts(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    nodes[static_cast<std::size_t>(i)] = path.index_of(F.times[static_cast<std::size_t>(i)]);
    pts[static_cast<std::size_t>(i)] =
        point_of(path.states[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])]);
  }
  const double v = F.base_value(M, pts);

  double l = 1.0;
  double lp = 0.0;
  RadiusInfo ri;
  const bool cut = F.cutoff && F.cutoff->R > 0.0;
  if (cut) {
    ri = discrete_radius(M, path, F.cutoff->center, F.cutoff->m_limit);
    l = bump_l(ri.rho, F.cutoff->R);
    lp = bump_l_prime(ri.rho, F.cutoff->R);
    if (lp != 0.0 && ri.tie_gap <= 1e-12)
      throw NonDifferentiableRadius("radius argmax tie within 1e-12");
  }

  SummandSet out;
  out.dim = M.dim();
  out.value = v * l;
  out.terms.reserve(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i < N; ++i) {
    const Vec df = F.base_partials(M, pts, i);
    const FrameState& st =
        path.states[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])];
    Summand s;
    s.node = nodes[static_cast<std::size_t>(i)];
    s.frame_comps = l * matvec_t(st.U, df);
    out.terms.push_back(s);
  }
  // Product rule through l(rho): one extra term at the radius argmax. A
  // node-0 argmax carries no Brownian dependence and is skipped.
  if (cut && lp != 0.0 && v != 0.0 && ri.argmax > 0) {
    const FrameState& st = path.states[static_cast<std::size_t>(ri.argmax)];
    const Vec dd = M.distance_partials(point_of(st), F.cutoff->center);
    Summand s;
    s.node = ri.argmax;
    s.frame_comps = (v * lp) * matvec_t(st.U, dd);
    const auto pos = std::upper_bound(
        out.terms.begin(), out.terms.end(), s,
        [](const Summand& a, const Summand& b) { return a.node < b.node; });
    out.terms.insert(pos, s);
  }
  return out;
}

GradientDensity malliavin_density(const SummandSet& S, int n_steps, int anchor) {
  GradientDensity out;
  out.anchor = anchor;
  out.step_value.assign(static_cast<std::size_t>(n_steps - anchor), Vec::zero(S.dim));
  Vec acc = Vec::zero(S.dim);
  auto it = S.terms.rbegin();
  for (int k = n_steps - 1; k >= anchor; --k) {
    while (it != S.terms.rend() && it->node == k + 1) {
      acc = acc + it->frame_comps;
      ++it;
    }
    out.step_value[static_cast<std::size_t>(k - anchor)] = acc;
  }
  return out;
}

GradientDensity modified_density(const SummandSet& S, const TransportPack& pack, int anchor) {
  GradientDensity out;
  out.anchor = anchor;
  out.step_value.assign(static_cast<std::size_t>(pack.n_steps - anchor), Vec::zero(S.dim));
  Vec acc = Vec::zero(S.dim);
  auto it = S.terms.rbegin();
  for (int k = pack.n_steps - 1; k >= anchor; --k) {
    while (it != S.terms.rend() && it->node == k + 1) {
      acc = acc + pack.damping_a(anchor, it->node) * it->frame_comps;
      ++it;
    }
    out.step_value[static_cast<std::size_t>(k - anchor)] = acc;
  }
  return out;
}

Vec damped_gradient(const SummandSet& S, const TransportPack& pack, int anchor) {
  Vec out = Vec::zero(S.dim);
  bool any = false;
  for (const Summand& s : S.terms)
    if (s.node > anchor) any = true;
  if (!any) return out;
  const std::vector<Mat> q = resolvent_q(pack, anchor);
  for (const Summand& s : S.terms)
    if (s.node > anchor)
      out = out + matvec(q[static_cast<std::size_t>(s.node - anchor)], s.frame_comps);
  return out;
}

double energy_sample(const SummandSet& S, const TransportPack& pack, int anchor) {
  if (anchor >= pack.n_steps) return 0.0;
  const GradientDensity D = modified_density(S, pack, anchor);
  const double d0 = sqnorm(D.at_step(anchor));
  double integral = 0.0;
  for (int k = anchor; k < pack.n_steps; ++k)
    integral += pack.mu_step_mass(k, anchor) * sqnorm(D.at_step(k));
  return (1.0 + pack.mu_total_mass(anchor)) * (d0 + integral);
}

Cylindrical make_functional(const Manifold& M, const std::string& name, const Point& x0,
                            double T, double dt, const FunctionalOptions& opt) {
  Cylindrical F;
  const int n_steps = static_cast<int>(std::llround(T / dt));
  const bool sphere = M.ambient_dim() > M.dim();
  if (name == "coord") {
    F.kind = BatteryKind::Coord;
    F.times = {T};
    F.coord = opt.coord;
  } else if (name == "eigen") {
    F.kind = BatteryKind::Eigen;
    F.times = {T};
    F.coord = sphere ? M.dim() : 0;
  } else if (name == "gauss_bump") {
    F.kind = BatteryKind::GaussBump;
    F.times = {T};
    F.bump_width = opt.bump_width;
    F.bump_center = feature(M, x0);
    F.bump_center[0] += opt.bump_offset;
  } else if (name == "sine") {
    F.kind = BatteryKind::Sine;
    F.times = {T};
    F.coord = opt.coord;
  } else if (name == "two_time") {
    if (n_steps < 2) throw ConfigError("two_time needs at least two steps");
    F.kind = BatteryKind::TwoTime;
    const int mid = std::clamp(static_cast<int>(std::llround(0.5 * n_steps)), 1, n_steps - 1);
    F.times = {dt * mid, T};
    F.coord = opt.coord;
  } else if (name == "eps_family") {
    F.kind = BatteryKind::EpsFamily;
    double eps = opt.eps > 0.0 ? opt.eps : 10.0 * dt;
    if (eps >= T) eps = dt * std::max(1, n_steps / 2);
    F.times = {eps, T};
    F.coord = sphere ? M.dim() : 0;
  } else {
    throw ConfigError("unknown functional '" + name + "'");
  }
  if (F.coord < 0 || F.coord >= M.ambient_dim()) throw ConfigError("functional coord out of range");

  const bool one_point = F.n_times() == 1;
  if (opt.normalize && one_point) {
    const Mat U0 = initial_frame(M, x0.chart, x0.u);
    const Vec df = F.base_partials(M, {x0}, 0);
    const double c = norm2(matvec_t(U0, df));
    if (c > 1e-12) F.scale = 1.0 / c;
  }
  if (opt.cutoff_R > 0.0) {
    Cutoff cut;
    cut.R = opt.cutoff_R;
    cut.m_limit = opt.cutoff_m;
    cut.center = x0;
    F.cutoff = cut;
  }
  return F;
}

}  // namespace pathcurv
