#include "pathcurv/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "pathcurv/errors.hpp"
#include "pathcurv/parallel.hpp"
#include "pathcurv/rng.hpp"
#include "pathcurv/stats.hpp"
#include "pathcurv/strutil.hpp"

namespace pathcurv {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

// Coordinate displacement beyond which a step is rejected; dt must shrink.
constexpr double kMaxCoordStep = 1.0;

// du^k = sqrt(2) (U dw)^k - Z^k dt evaluated at (u, U).
inline Vec drift_diffuse(const Manifold& M, int chart, const Vec& u, const Mat& U,
                         const Vec& dw, double dt) {
  const int n = M.dim();
  Vec du = Vec::zero(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int a = 0; a < n; ++a) s += U(i, a) * dw[a];
    du[i] = kSqrt2 * s;
  }
  if (M.has_drift()) {
    const Vec z = M.drift_z(chart, u);
    for (int i = 0; i < n; ++i) du[i] -= z[i] * dt;
  }
  return du;
}

// Transport increment dU^k_a = -Gamma^k_{ij} du^i U^j_a.
inline Mat transport_increment(const Christoffel& G, const Vec& du, const Mat& U) {
  const int n = U.n;
  Mat dU = Mat::zero(n);
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += G(k, i, j) * du[i] * U(j, a);
      dU(k, a) = -s;
    }
  return dU;
}

int step_count(double T, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (T < 0.0) throw ConfigError("T must be non-negative");
  const double steps = T / dt;
  const long long m = std::llround(steps);
  if (std::fabs(steps - static_cast<double>(m)) > 1e-9 * std::max(1.0, steps))
    throw TimesNotOnGrid("T/dt is not an integer: T = " + format_double(T) +
                         ", dt = " + format_double(dt));
  return static_cast<int>(m);
}

}  // namespace

int PathSample::index_of(double t) const {
  const double pos = t / dt;
  const long long k = std::llround(pos);
  if (k < 0 || k > n_steps || std::fabs(pos - static_cast<double>(k)) > 1e-9 * std::max(1.0, pos))
    throw TimesNotOnGrid("time " + format_double(t) + " is not a grid node");
  return static_cast<int>(k);
}

void horizontal_step(const Manifold& M, FrameState& s, const Vec& dw, double dt) {
  const int n = M.dim();

  const Christoffel G0 = M.christoffel_at(s.chart, s.u, GeoBackend::Analytic);
  const Vec du0 = drift_diffuse(M, s.chart, s.u, s.U, dw, dt);

  // Predictor.
  const Vec u_pred = s.u + du0;
  if (norm_inf(du0) > kMaxCoordStep)
    throw StepRejected("coordinate step " + format_double(norm_inf(du0)) +
                       " exceeds the chart safety bound; shrink dt");
  if (!M.in_chart(u_pred))
    throw OutOfChart(M.name() + ": predictor left the chart");
  const Mat dU0 = transport_increment(G0, du0, s.U);
  const Mat U_pred = s.U + dU0;

  // Corrector with coefficients at the predicted point.
  const Christoffel G1 = M.christoffel_at(s.chart, u_pred, GeoBackend::Analytic);
  const Vec du1 = drift_diffuse(M, s.chart, u_pred, U_pred, dw, dt);
  const Vec du = 0.5 * (du0 + du1);
  if (norm_inf(du) > kMaxCoordStep)
    throw StepRejected("coordinate step " + format_double(norm_inf(du)) +
                       " exceeds the chart safety bound; shrink dt");

  const Vec u_new = s.u + du;
  if (!M.in_chart(u_new)) throw OutOfChart(M.name() + ": step left the chart");

  const Mat dU1 = transport_increment(G1, du1, U_pred);
  Mat U_new = s.U + 0.5 * (dU0 + dU1);

  const Mat g = M.metric_at(s.chart, u_new);
  gram_schmidt(g, U_new);

  s.u = u_new;
  s.U = U_new;
  s.t += dt;

  if (M.n_charts() > 1) {
    FrameState ns = chart_normalize(M, s);
    s = ns;
  }
}

void simulate_path(const Manifold& M, const Point& x0, double T, double dt,
                   std::uint64_t seed, std::uint64_t path_index, PathSample& out) {
  const int m = step_count(T, dt);
  const int n = M.dim();
  M.require_in_chart(x0.chart, x0.u);

  out.dt = dt;
  out.T = T;
  out.n_steps = m;
  out.seed = seed;
  out.path_index = path_index;
  out.states.resize(static_cast<std::size_t>(m) + 1);
  out.dw.resize(static_cast<std::size_t>(m));

  FrameState s;
  s.chart = x0.chart;
  s.t = 0.0;
  s.u = x0.u;
  s.U = initial_frame(M, x0.chart, x0.u);
  out.states[0] = s;

  const double sdt = std::sqrt(dt);
  double z[kMaxDim + 1];
  for (int k = 0; k < m; ++k) {
    fill_normals(seed, path_index, static_cast<std::uint32_t>(k), z, n);
    Vec dw = Vec::zero(n);
    for (int i = 0; i < n; ++i) dw[i] = z[i] * sdt;
    out.dw[static_cast<std::size_t>(k)] = dw;
    horizontal_step(M, s, dw, dt);
    // Guard against drift in the accumulated time.
    s.t = dt * (k + 1);
    out.states[static_cast<std::size_t>(k) + 1] = s;
  }
}

void simulate_path_with_increments(const Manifold& M, const Point& x0, double dt,
                                   const std::vector<Vec>& dw, PathSample& out) {
  const int m = static_cast<int>(dw.size());
  M.require_in_chart(x0.chart, x0.u);

  out.dt = dt;
  out.T = dt * m;
  out.n_steps = m;
  out.seed = 0;
  out.path_index = 0;
  out.states.resize(static_cast<std::size_t>(m) + 1);
  out.dw = dw;

  FrameState s;
  s.chart = x0.chart;
  s.t = 0.0;
  s.u = x0.u;
  s.U = initial_frame(M, x0.chart, x0.u);
  out.states[0] = s;

  for (int k = 0; k < m; ++k) {
    horizontal_step(M, s, dw[static_cast<std::size_t>(k)], dt);
    s.t = dt * (k + 1);
    out.states[static_cast<std::size_t>(k) + 1] = s;
  }
}

void simulate_from(const Manifold& M, const FrameState& start, int m, double dt,
                   std::uint64_t seed, std::uint64_t stream, PathSample& out) {
  const int n = M.dim();
  M.require_in_chart(start.chart, start.u);

  out.dt = dt;
  out.T = dt * m;
  out.n_steps = m;
  out.seed = seed;
  out.path_index = stream;
  out.states.resize(static_cast<std::size_t>(m) + 1);
  out.dw.resize(static_cast<std::size_t>(m));

  FrameState s = start;
  out.states[0] = s;

  const double sdt = std::sqrt(dt);
  double z[kMaxDim + 1];
  for (int k = 0; k < m; ++k) {
    fill_normals(seed, stream, static_cast<std::uint32_t>(k), z, n);
    Vec dw = Vec::zero(n);
    for (int i = 0; i < n; ++i) dw[i] = z[i] * sdt;
    out.dw[static_cast<std::size_t>(k)] = dw;
    horizontal_step(M, s, dw, dt);
    s.t = start.t + dt * (k + 1);
    out.states[static_cast<std::size_t>(k) + 1] = s;
  }
}

ExitCurve exit_stats(const Manifold& M, const Point& x0, double R,
                     const std::vector<double>& T_list, double dt,
                     std::uint64_t n_paths, std::uint64_t seed) {
  if (T_list.empty()) throw ConfigError("exit_stats: empty T_list");
  if (!(R > 0.0)) throw ConfigError("exit_stats: R must be positive");
  for (std::size_t i = 1; i < T_list.size(); ++i)
    if (T_list[i] <= T_list[i - 1]) throw ConfigError("exit_stats: T_list must increase");

  const double T_max = T_list.back();
  const int m = step_count(T_max, dt);

  std::vector<int> horizon_idx;
  horizon_idx.reserve(T_list.size());
  {
    PathSample probe;  // index arithmetic only
    probe.dt = dt;
    probe.n_steps = m;
    for (const double T : T_list) horizon_idx.push_back(probe.index_of(T));
  }

  const std::uint64_t n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
  std::vector<std::vector<std::uint64_t>> block_counts(
      n_blocks, std::vector<std::uint64_t>(T_list.size(), 0));

  parallel_blocks(n_paths, kPathBlock, [&](std::uint64_t b, std::uint64_t lo, std::uint64_t hi) {
    PathSample path;
    auto& counts = block_counts[b];
    for (std::uint64_t p = lo; p < hi; ++p) {
      simulate_path(M, x0, T_max, dt, seed, p, path);
      int first_exit = -1;
      for (int k = 1; k <= m; ++k) {
        Point y;
        y.chart = path.states[static_cast<std::size_t>(k)].chart;
        y.u = path.states[static_cast<std::size_t>(k)].u;
        if (M.distance(y, x0) >= R) {
          first_exit = k;
          break;
        }
      }
      if (first_exit < 0) continue;
      for (std::size_t h = 0; h < horizon_idx.size(); ++h)
        if (first_exit <= horizon_idx[h]) ++counts[h];
    }
  });

  ExitCurve out;
  out.T = T_list;
  out.n_paths = n_paths;
  const double dn = static_cast<double>(n_paths);
  for (std::size_t h = 0; h < T_list.size(); ++h) {
    std::uint64_t c = 0;
    for (std::uint64_t b = 0; b < n_blocks; ++b) c += block_counts[b][h];
    const double p = static_cast<double>(c) / dn;
    out.p_hat.push_back(p);
    out.std_err.push_back(std::sqrt(std::max(0.0, p * (1.0 - p) / dn)));
    out.upper95.push_back(c == 0 ? 3.0 / dn : 0.0);
  }

  // Least squares of -log p against 1/T over horizons with exits.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int nf = 0;
  for (std::size_t h = 0; h < T_list.size(); ++h) {
    if (out.p_hat[h] <= 0.0) continue;
    const double x = 1.0 / T_list[h];
    const double y = -std::log(out.p_hat[h]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++nf;
  }
  out.n_fit = nf;
  out.all_zero = (nf == 0);
  if (nf >= 2) {
    const double den = nf * sxx - sx * sx;
    out.c_hat = (nf * sxy - sx * sy) / den;
    out.intercept = (sy - out.c_hat * sx) / nf;
    const double ss_tot = syy - sy * sy / nf;
    double ss_res = 0.0;
    for (std::size_t h = 0; h < T_list.size(); ++h) {
      if (out.p_hat[h] <= 0.0) continue;
      const double pred = out.intercept + out.c_hat / T_list[h];
      const double r = -std::log(out.p_hat[h]) - pred;
      ss_res += r * r;
    }
    out.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  } else {
    out.c_hat = std::nan("");
    out.intercept = std::nan("");
    out.r2 = std::nan("");
  }
  return out;
}

}  // namespace pathcurv
