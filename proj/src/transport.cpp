#include "pathcurv/transport.hpp"

#include <cmath>

#include "pathcurv/errors.hpp"
#include "pathcurv/strutil.hpp"

namespace pathcurv {

namespace {

// RK4 transfer matrix over one step for dQ/dt = -Q A(t); A at the midpoint
// is the linear interpolation of the node values.
Mat rk4_transfer(const Mat& a1, const Mat& a2, double dt) {
  const int n = a1.n;
  const Mat am = 0.5 * (a1 + a2);
  const Mat I = Mat::identity(n);
  const Mat k1 = -1.0 * a1;
  const Mat q2 = I + (dt / 2.0) * k1;
  const Mat k2 = -1.0 * matmul(q2, am);
  const Mat q3 = I + (dt / 2.0) * k2;
  const Mat k3 = -1.0 * matmul(q3, am);
  const Mat q4 = I + dt * k3;
  const Mat k4 = -1.0 * matmul(q4, a2);
  return I + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double rk4_scalar_growth(double s1, double s2, double dt) {
  const double sm = 0.5 * (s1 + s2);
  const double k1 = s1;
  const double k2 = sm * (1.0 + dt / 2.0 * k1);
  const double k3 = sm * (1.0 + dt / 2.0 * k2);
  const double k4 = s2 * (1.0 + dt * k3);
  return 1.0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

double TransportPack::damping_a(int s_idx, int t_idx) const {
  return std::exp(-(cum_plus[static_cast<std::size_t>(t_idx)] -
                    cum_plus[static_cast<std::size_t>(s_idx)]));
}

double TransportPack::mu_density(int k, int anchor) const {
  const double delta =
      0.5 * (k1[static_cast<std::size_t>(k)] - k2[static_cast<std::size_t>(k)]);
  const double base = restart_convention ? cum_minus[static_cast<std::size_t>(anchor)] : 0.0;
  return std::exp(cum_minus[static_cast<std::size_t>(k)] - base) * delta;
}

double TransportPack::mu_step_mass(int k, int anchor) const {
  return 0.5 * dt * (mu_density(k, anchor) + mu_density(k + 1, anchor));
}

double TransportPack::mu_total_mass(int anchor) const {
  double m = 0.0;
  for (int k = anchor; k < n_steps; ++k) m += mu_step_mass(k, anchor);
  return m;
}

TransportPack build_transport(const Manifold& M, const PathSample& path,
                              const CurvatureBounds& bounds) {
  TransportPack pack;
  const int m = path.n_steps;
  const int n = M.dim();
  pack.n_steps = m;
  pack.dt = path.dt;
  pack.restart_convention = bounds.restart_convention;
  pack.k1.resize(static_cast<std::size_t>(m) + 1);
  pack.k2.resize(static_cast<std::size_t>(m) + 1);
  pack.cum_plus.resize(static_cast<std::size_t>(m) + 1);
  pack.cum_minus.resize(static_cast<std::size_t>(m) + 1);
  pack.ric_frame.resize(static_cast<std::size_t>(m) + 1);

  const std::optional<double> einstein = M.einstein_constant();
  for (int k = 0; k <= m; ++k) {
    const FrameState& s = path.states[static_cast<std::size_t>(k)];
    Point p;
    p.chart = s.chart;
    p.u = s.u;
    const double b1 = bounds.k1_at(M, p);
    const double b2 = bounds.k2_at(M, p);
    if (b1 < b2)
      throw NegativeMass("K1 < K2 at grid node " + format_int(k) +
                         " (K1 = " + format_double(b1) + ", K2 = " + format_double(b2) + ")");
    pack.k1[static_cast<std::size_t>(k)] = b1;
    pack.k2[static_cast<std::size_t>(k)] = b2;
    if (einstein) {
      pack.ric_frame[static_cast<std::size_t>(k)] = (*einstein) * Mat::identity(n);
    } else {
      pack.ric_frame[static_cast<std::size_t>(k)] = bakry_emery_frame(M, s.chart, s.u, s.U);
    }
  }

  pack.cum_plus[0] = 0.0;
  pack.cum_minus[0] = 0.0;
  for (int k = 0; k < m; ++k) {
    const double p0 = 0.5 * (pack.k1[static_cast<std::size_t>(k)] + pack.k2[static_cast<std::size_t>(k)]);
    const double p1 = 0.5 * (pack.k1[static_cast<std::size_t>(k) + 1] + pack.k2[static_cast<std::size_t>(k) + 1]);
    const double m0 = 0.5 * (pack.k1[static_cast<std::size_t>(k)] - pack.k2[static_cast<std::size_t>(k)]);
    const double m1 = 0.5 * (pack.k1[static_cast<std::size_t>(k) + 1] - pack.k2[static_cast<std::size_t>(k) + 1]);
    pack.cum_plus[static_cast<std::size_t>(k) + 1] =
        pack.cum_plus[static_cast<std::size_t>(k)] + 0.5 * path.dt * (p0 + p1);
    pack.cum_minus[static_cast<std::size_t>(k) + 1] =
        pack.cum_minus[static_cast<std::size_t>(k)] + 0.5 * path.dt * (m0 + m1);
  }

  pack.q_step.resize(static_cast<std::size_t>(m));
  const bool constant_coeff =
      einstein.has_value();  // shipped presets: transfer matrix is step-independent
  Mat cached;
  for (int k = 0; k < m; ++k) {
    if (constant_coeff && k > 0) {
      pack.q_step[static_cast<std::size_t>(k)] = cached;
      continue;
    }
    cached = rk4_transfer(pack.ric_frame[static_cast<std::size_t>(k)],
                          pack.ric_frame[static_cast<std::size_t>(k) + 1], path.dt);
    pack.q_step[static_cast<std::size_t>(k)] = cached;
  }

  pack.q0.resize(static_cast<std::size_t>(m) + 1);
  pack.q0[0] = Mat::identity(n);
  for (int k = 0; k < m; ++k)
    pack.q0[static_cast<std::size_t>(k) + 1] =
        matmul(pack.q0[static_cast<std::size_t>(k)], pack.q_step[static_cast<std::size_t>(k)]);
  return pack;
}

std::vector<Mat> resolvent_q(const TransportPack& pack, int anchor) {
  const int m = pack.n_steps;
  const int n = pack.ric_frame.empty() ? 0 : pack.ric_frame[0].n;
  std::vector<Mat> q(static_cast<std::size_t>(m - anchor) + 1);
  q[0] = Mat::identity(n);
  for (int k = anchor; k < m; ++k)
    q[static_cast<std::size_t>(k - anchor) + 1] =
        matmul(q[static_cast<std::size_t>(k - anchor)], pack.q_step[static_cast<std::size_t>(k)]);
  return q;
}

std::vector<Mat> resolvent_q_sym(const TransportPack& pack, int anchor) {
  const int m = pack.n_steps;
  const int n = pack.ric_frame.empty() ? 0 : pack.ric_frame[0].n;
  std::vector<Mat> q(static_cast<std::size_t>(m - anchor) + 1);
  q[0] = Mat::identity(n);
  for (int k = anchor; k < m; ++k) {
    Mat a1 = pack.ric_frame[static_cast<std::size_t>(k)];
    Mat a2 = pack.ric_frame[static_cast<std::size_t>(k) + 1];
    const double s1 =
        0.5 * (pack.k1[static_cast<std::size_t>(k)] + pack.k2[static_cast<std::size_t>(k)]);
    const double s2 =
        0.5 * (pack.k1[static_cast<std::size_t>(k) + 1] + pack.k2[static_cast<std::size_t>(k) + 1]);
    for (int i = 0; i < n; ++i) {
      a1(i, i) -= s1;
      a2(i, i) -= s2;
    }
    q[static_cast<std::size_t>(k - anchor) + 1] =
        matmul(q[static_cast<std::size_t>(k - anchor)], rk4_transfer(a1, a2, pack.dt));
  }
  return q;
}

std::vector<double> sym_growth_factor(const TransportPack& pack, int anchor) {
  const int m = pack.n_steps;
  std::vector<double> e(static_cast<std::size_t>(m - anchor) + 1);
  e[0] = 1.0;
  for (int k = anchor; k < m; ++k) {
    const double s1 =
        0.5 * (pack.k1[static_cast<std::size_t>(k)] + pack.k2[static_cast<std::size_t>(k)]);
    const double s2 =
        0.5 * (pack.k1[static_cast<std::size_t>(k) + 1] + pack.k2[static_cast<std::size_t>(k) + 1]);
    e[static_cast<std::size_t>(k - anchor) + 1] =
        e[static_cast<std::size_t>(k - anchor)] * rk4_scalar_growth(s1, s2, pack.dt);
  }
  return e;
}

}  // namespace pathcurv
