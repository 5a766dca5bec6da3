#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "pathcurv/dynamics.hpp"
#include "pathcurv/errors.hpp"
#include "pathcurv/estimators.hpp"
#include "pathcurv/functionals.hpp"
#include "pathcurv/geometry.hpp"

using namespace pathcurv;

namespace {

Vec vec2(double a, double b) {
  Vec v = Vec::zero(2);
  v[0] = a;
  v[1] = b;
  return v;
}

Vec vec1(double a) {
  Vec v = Vec::zero(1);
  v[0] = a;
  return v;
}

// Simpson rule over [lo, hi] with an even subinterval count.
template <typename F>
double simpson(F f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double gauss_pdf(double y, double m, double var) {
  const double z = y - m;
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * M_PI * var);
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace

TEST_CASE("semigroup mean: flat martingale") {
  const Manifold M = Manifold::euclidean(2);
  const Point x{0, vec2(0.7, -0.3)};
  FunctionalOptions opt;
  const Cylindrical f = make_functional(M, "coord", x, 0.4, 1e-3, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 20000;
  const EstimateReport r = estimate_pt(M, f, x, 0.4, cfg);
  CHECK(r.n == 20000);
  CHECK(r.std_error > 0.0);
  CHECK(std::fabs(r.value - 0.7) <= 3.0 * r.std_error);
}

TEST_CASE("semigroup mean: sphere eigenfunction decay") {
  const Manifold M = Manifold::sphere(2, 1.0);
  const Point x{0, vec2(0.5, 0.0)};  // height 0.6
  FunctionalOptions opt;
  opt.normalize = false;
  const double T = 0.3, dt = 1e-3;
  const Cylindrical f = make_functional(M, "eigen", x, T, dt, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 40000;
  cfg.dt = dt;
  const EstimateReport r = estimate_pt(M, f, x, T, cfg);
  // chart 0 is the stereographic image of the lower hemisphere: z(x) = -0.6
  CHECK(std::fabs(r.value - std::exp(-2.0 * T) * (-0.6)) <= 3.0 * r.std_error + 5.0 * dt);
}

TEST_CASE("semigroup mean: OU transition kernel quadrature") {
  const Manifold M = Manifold::euclidean_ou(1, 1.0);
  const Point x{0, vec1(0.7)};
  FunctionalOptions opt;
  opt.normalize = false;
  const double T = 0.5, dt = 1e-3;
  const Cylindrical f = make_functional(M, "sine", x, T, dt, opt);
  const double m = 0.7 * std::exp(-T);
  const double var = 1.0 - std::exp(-2.0 * T);
  const double sd = std::sqrt(var);
  const double oracle = simpson(
      [&](double y) { return std::sin(y) * gauss_pdf(y, m, var); }, m - 8.0 * sd, m + 8.0 * sd,
      4000);
  EstimatorConfig cfg;
  cfg.n_paths = 40000;
  cfg.dt = dt;
  const EstimateReport r = estimate_pt(M, f, x, T, cfg);
  CHECK(std::fabs(r.value - oracle) <= 3.0 * r.std_error + 2.0 * dt);
}

TEST_CASE("bismut gradient closed forms") {
  const Manifold e2 = Manifold::euclidean(2);
  const Point xe{0, vec2(0.1, 0.4)};
  FunctionalOptions opt;
  const Cylindrical fc = make_functional(e2, "coord", xe, 0.4, 1e-3, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 20000;
  const EstimateReport re = grad_bismut(e2, fc, xe, 0.4, cfg);
  REQUIRE(re.is_vector);
  CHECK(std::fabs(re.vec_value[0] - 1.0) <= 3.0 * re.vec_stderr[0]);
  CHECK(std::fabs(re.vec_value[1]) <= 3.0 * re.vec_stderr[1]);

  // sphere height function: grad P_T z = e^{-2T} grad z, chart components
  const Manifold s2 = Manifold::sphere(2, 1.0);
  const Point xs{0, vec2(0.5, 0.0)};
  FunctionalOptions raw;
  raw.normalize = false;
  const double T = 0.3, dt = 1e-3;
  const Cylindrical fz = make_functional(s2, "eigen", xs, T, dt, raw);
  EstimatorConfig scfg;
  scfg.n_paths = 40000;
  scfg.dt = dt;
  const EstimateReport rs = grad_bismut(s2, fz, xs, T, scfg);
  // grad z = g^{-1} dz: dz = (1.28, 0), g = 2.56 Id at u = (0.5, 0)
  const double expected = std::exp(-2.0 * T) * 0.5;
  CHECK(std::fabs(rs.vec_value[0] - expected) <= 3.0 * rs.vec_stderr[0] + 5.0 * dt);
  CHECK(std::fabs(rs.vec_value[1]) <= 3.0 * rs.vec_stderr[1] + 5.0 * dt);
}

TEST_CASE("bismut gradient agrees with finite differences") {
  const Manifold ou = Manifold::euclidean_ou(1, 1.0);
  const Point x{0, vec1(0.7)};
  FunctionalOptions opt;
  const Cylindrical f = make_functional(ou, "sine", x, 0.5, 1e-3, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 30000;
  const EstimateReport a = grad_bismut(ou, f, x, 0.5, cfg);
  const EstimateReport b = grad_fd(ou, f, x, 0.5, cfg);
  CHECK(std::fabs(a.vec_value[0] - b.vec_value[0]) <=
        3.0 * combined(a.vec_stderr[0], b.vec_stderr[0]) + 1e-6);

  const Manifold hyp = Manifold::hyperbolic2();
  const Point xh{0, vec2(0.1, -0.2)};
  const Cylindrical g = make_functional(hyp, "gauss_bump", xh, 0.3, 1e-3, opt);
  EstimatorConfig hcfg;
  hcfg.n_paths = 10000;
  const EstimateReport ha = grad_bismut(hyp, g, xh, 0.3, hcfg);
  const EstimateReport hb = grad_fd(hyp, g, xh, 0.3, hcfg);
  for (int c = 0; c < 2; ++c)
    CHECK(std::fabs(ha.vec_value[c] - hb.vec_value[c]) <=
          3.0 * combined(ha.vec_stderr[c], hb.vec_stderr[c]) + 1e-6);
}

TEST_CASE("cylindrical gradient") {
  // a one-point functional goes through the same core as grad_bismut
  const Manifold s2 = Manifold::sphere(2, 1.0);
  const Point xs{0, vec2(0.5, 0.0)};
  FunctionalOptions opt;
  const Cylindrical fz = make_functional(s2, "eigen", xs, 0.3, 1e-3, opt);
  EstimatorConfig small;
  small.n_paths = 5000;
  const EstimateReport a = grad_bismut(s2, fz, xs, 0.3, small);
  const EstimateReport b = grad_cylindrical(s2, fz, xs, 0.3, small);
  CHECK(norm_inf(a.vec_value - b.vec_value) < 1e-12);
  CHECK(norm_inf(a.vec_stderr - b.vec_stderr) < 1e-12);

  // two-time product on the line: differentiate the Gaussian double integral
  const Manifold e1 = Manifold::euclidean(1);
  const Point x{0, vec1(0.7)};
  FunctionalOptions raw;
  raw.normalize = false;
  const double T = 0.5, dt = 1e-3;
  const Cylindrical two = make_functional(e1, "two_time", x, T, dt, raw);
  REQUIRE(two.times.size() == 2);
  const double t1 = two.times[0];
  const double v1 = 2.0 * t1, v2 = 2.0 * (T - t1);
  auto mean_f = [&](double x0) {
    const double s1 = std::sqrt(v1), s2 = std::sqrt(v2);
    return simpson(
        [&](double y1) {
          const double inner = simpson(
              [&](double y2) { return y2 * gauss_pdf(y2, y1, v2); }, y1 - 8.0 * s2,
              y1 + 8.0 * s2, 400);
          return std::sin(y1) * inner * gauss_pdf(y1, x0, v1);
        },
        0.7 - 8.0 * s1, 0.7 + 8.0 * s1, 400);
  };
  const double h = 1e-4;
  const double oracle = (mean_f(0.7 + h) - mean_f(0.7 - h)) / (2.0 * h);
  EstimatorConfig cfg;
  cfg.n_paths = 40000;
  cfg.dt = dt;
  const EstimateReport r = grad_cylindrical(e1, two, x, T, cfg);
  CHECK(std::fabs(r.vec_value[0] - oracle) <= 3.0 * r.vec_stderr[0] + 2e-3);

  // localized functional at short horizon: cutoff tail is negligible
  FunctionalOptions loc;
  loc.cutoff_R = 0.8;
  const Cylindrical fl = make_functional(s2, "gauss_bump", xs, 0.05, 1e-3, loc);
  EstimatorConfig lcfg;
  lcfg.n_paths = 20000;
  const EstimateReport la = grad_cylindrical(s2, fl, xs, 0.05, lcfg);
  const EstimateReport lb = grad_fd(s2, fl, xs, 0.05, lcfg);
  for (int c = 0; c < 2; ++c)
    CHECK(std::fabs(la.vec_value[c] - lb.vec_value[c]) <=
          3.0 * combined(la.vec_stderr[c], lb.vec_stderr[c]) + 1e-6);
}

TEST_CASE("finite-difference gradient") {
  // common random numbers make the flat coordinate case exact
  const Manifold e2 = Manifold::euclidean(2);
  const Point x{0, vec2(0.2, -0.1)};
  FunctionalOptions opt;
  const Cylindrical f = make_functional(e2, "coord", x, 0.4, 1e-3, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 2000;
  const EstimateReport r = grad_fd(e2, f, x, 0.4, cfg);
  CHECK(std::fabs(r.vec_value[0] - 1.0) < 1e-12);
  CHECK(std::fabs(r.vec_value[1]) < 1e-12);

  const Manifold s2 = Manifold::sphere(2, 1.0);
  const Point xs{0, vec2(0.5, 0.0)};
  FunctionalOptions raw;
  raw.normalize = false;
  const Cylindrical fz = make_functional(s2, "eigen", xs, 0.5, 1e-3, raw);
  EstimatorConfig scfg;
  scfg.n_paths = 30000;
  const EstimateReport rs = grad_fd(s2, fz, xs, 0.5, scfg);
  CHECK(std::fabs(rs.vec_value[0] - std::exp(-1.0) * 0.5) <= 3.0 * rs.vec_stderr[0] + 5e-3);
}

TEST_CASE("conditional expectations: analytic backends") {
  EstimatorConfig cfg;
  const Manifold e1 = Manifold::euclidean(1);
  const Point x{0, vec1(0.3)};
  FunctionalOptions raw;
  raw.normalize = false;
  const double T = 0.4, dt = 1e-3;
  const Cylindrical f = make_functional(e1, "coord", x, T, dt, raw);
  PathSample p;
  simulate_path(e1, x, T, dt, 313, 0, p);
  const double xt = p.states[200].u[0];
  CHECK(conditional_exp(e1, f, p, 0.2, false, cfg, CondMode::Analytic) ==
        doctest::Approx(xt).epsilon(1e-14));
  CHECK(conditional_exp(e1, f, p, 0.2, true, cfg, CondMode::Analytic) ==
        doctest::Approx(xt * xt + 2.0 * (T - 0.2)).epsilon(1e-12));
  // at t = T the conditional collapses to the functional itself
  const double fT = evaluate(e1, f, p);
  CHECK(conditional_exp(e1, f, p, T, false, cfg) == doctest::Approx(fT).epsilon(1e-14));
  CHECK(conditional_exp(e1, f, p, T, true, cfg) == doctest::Approx(fT * fT).epsilon(1e-14));

  const Manifold s2 = Manifold::sphere(2, 1.0);
  const Point xs{0, vec2(0.3, 0.2)};
  const Cylindrical fz = make_functional(s2, "eigen", xs, T, dt, raw);
  PathSample ps;
  simulate_path(s2, xs, T, dt, 313, 1, ps);
  const FrameState& st = ps.states[200];
  const double z = s2.embed(Point{st.chart, st.u})[2];
  const double tau = T - 0.2;
  CHECK(conditional_exp(s2, fz, ps, 0.2, false, cfg, CondMode::Analytic) ==
        doctest::Approx(std::exp(-2.0 * tau) * z).epsilon(1e-12));
  CHECK(conditional_exp(s2, fz, ps, 0.2, true, cfg, CondMode::Analytic) ==
        doctest::Approx(1.0 / 3.0 + std::exp(-6.0 * tau) * (z * z - 1.0 / 3.0)).epsilon(1e-12));

  // no closed form for the two-time product while both times are ahead
  const Cylindrical two = make_functional(s2, "two_time", xs, T, dt, raw);
  CHECK_THROWS_AS(conditional_exp(s2, two, ps, 0.1, false, cfg, CondMode::Analytic), NoBackend);
  EstimatorConfig off;
  off.allow_nested = false;
  CHECK_THROWS_AS(conditional_exp(s2, two, ps, 0.1, false, off), NoBackend);
}

TEST_CASE("nested conditional converges to the analytic backend") {
  const Manifold s2 = Manifold::sphere(2, 1.0);
  const Point xs{0, vec2(0.3, 0.2)};
  FunctionalOptions raw;
  raw.normalize = false;
  const double T = 0.3, dt = 1e-3, t = 0.15;
  const Cylindrical fz = make_functional(s2, "eigen", xs, T, dt, raw);

  auto mad_for = [&](int inner) {
    EstimatorConfig cfg;
    cfg.inner_paths = inner;
    double mad = 0.0;
    const int outer = 120;
    for (int i = 0; i < outer; ++i) {
      PathSample p;
      simulate_path(s2, xs, T, dt, 515, static_cast<std::uint64_t>(i), p);
      const double a = conditional_exp(s2, fz, p, t, false, cfg, CondMode::Analytic);
      const double b = conditional_exp(s2, fz, p, t, false, cfg, CondMode::Nested);
      mad += std::fabs(b - a);
    }
    return mad / outer;
  };
  const double m100 = mad_for(100);
  const double m1000 = mad_for(1000);
  const double ratio = m100 / m1000;
  CHECK(ratio > std::sqrt(10.0) / 2.0);
  CHECK(ratio < 2.0 * std::sqrt(10.0));

  // nested values replay deterministically
  EstimatorConfig cfg;
  cfg.inner_paths = 100;
  PathSample p;
  simulate_path(s2, xs, T, dt, 515, 7, p);
  const double b1 = conditional_exp(s2, fz, p, t, false, cfg, CondMode::Nested);
  const double b2 = conditional_exp(s2, fz, p, t, false, cfg, CondMode::Nested);
  CHECK(b1 == b2);
}

TEST_CASE("poincare witness and the martingale identity") {
  // flat equality case: Var(X_T) = 2T on both sides
  const Manifold e1 = Manifold::euclidean(1);
  const Point x{0, vec1(0.0)};
  FunctionalOptions opt;
  const double T = 0.5, dt = 1e-3;
  const Cylindrical f = make_functional(e1, "coord", x, T, dt, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 100000;
  const CheckOutcome out =
      check_inequality("T12-5", e1, CurvatureBounds::constants(0.0, 0.0), f, x, T, cfg);
  CHECK(out.verdict == "holds");
  CHECK(std::fabs(out.lhs.value - out.rhs.value) / out.rhs.value < 0.02);
  CHECK(std::fabs(out.rhs.value - 2.0 * T) < 0.03);

  // OU with tight bounds: exact equality case of the same identity
  const Manifold ou = Manifold::euclidean_ou(1, 1.0);
  const Point xo{0, vec1(0.2)};
  const Cylindrical fo = make_functional(ou, "eigen", xo, T, dt, opt);
  EstimatorConfig ocfg;
  ocfg.n_paths = 40000;
  ocfg.t1 = 0.3;
  const CheckOutcome oo =
      check_inequality("T12-5", ou, CurvatureBounds::constants(1.0, 1.0), fo, xo, T, ocfg);
  const double comb = combined(oo.lhs.std_error, oo.rhs.std_error);
  CHECK(std::fabs(oo.lhs.value - oo.rhs.value) <= std::max(0.02 * oo.rhs.value, 3.0 * comb));
  CHECK(oo.verdict == "holds");

  // conditional variances grow along the filtration
  double prev = -1.0;
  for (double t1 : {0.125, 0.25, 0.375, 0.5}) {
    EstimatorConfig mcfg;
    mcfg.n_paths = 20000;
    mcfg.t1 = t1;
    const CheckOutcome mo =
        check_inequality("T12-5", e1, CurvatureBounds::constants(0.0, 0.0), f, x, T, mcfg);
    CHECK(mo.lhs.value >= prev - 3.0 * mo.lhs.std_error);
    prev = mo.lhs.value;
  }
}

TEST_CASE("gradient inequality holds on the sphere") {
  const Manifold s2 = Manifold::sphere(2, 1.0);
  const Point x{0, vec2(1.0, 0.0)};  // equator: |grad z| = 1
  FunctionalOptions opt;
  const double T = 0.5, dt = 1e-3;
  const Cylindrical f = make_functional(s2, "eigen", x, T, dt, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 20000;
  cfg.dt = dt;
  const CheckOutcome out =
      check_inequality("T12-2a", s2, CurvatureBounds::constants(1.0, 1.0), f, x, T, cfg);
  CHECK(out.verdict == "holds");
  CHECK(out.margin > 0.0);
  CHECK(std::fabs(out.lhs.value - std::exp(-2.0 * T) * std::exp(-2.0 * T)) < 0.02);
}

TEST_CASE("scale covariance of the gradient inequality") {
  const Manifold e2 = Manifold::euclidean(2);
  const Point x{0, vec2(0.1, 0.1)};
  FunctionalOptions raw;
  raw.normalize = false;
  const Cylindrical f1 = make_functional(e2, "gauss_bump", x, 0.3, 1e-3, raw);
  Cylindrical f2 = f1;
  f2.scale *= 2.0;
  EstimatorConfig cfg;
  cfg.n_paths = 5000;
  cfg.p = 2.0;
  const CurvatureBounds b = CurvatureBounds::constants(0.0, 0.0);
  const CheckOutcome o1 = check_inequality("T12-2a", e2, b, f1, x, 0.3, cfg);
  const CheckOutcome o2 = check_inequality("T12-2a", e2, b, f2, x, 0.3, cfg);
  CHECK(o2.lhs.value == doctest::Approx(4.0 * o1.lhs.value).epsilon(1e-12));
  CHECK(o2.rhs.value == doctest::Approx(4.0 * o1.rhs.value).epsilon(1e-12));
}

TEST_CASE("power guard and report extras") {
  const Manifold e2 = Manifold::euclidean(2);
  const Point x{0, vec2(0.1, 0.1)};
  FunctionalOptions opt;
  const Cylindrical f = make_functional(e2, "gauss_bump", x, 0.3, 1e-3, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 2000;
  cfg.power_frac = 1e-6;
  CHECK_THROWS_AS(
      check_inequality("T12-2a", e2, CurvatureBounds::constants(0.0, 0.0), f, x, 0.3, cfg),
      InconclusivePower);

  EstimateReport r;
  r.add_extra("slope", 1.5);
  CHECK(r.extra("slope") == 1.5);
  CHECK_THROWS_AS(r.extra("absent"), std::out_of_range);
}

TEST_CASE("short-time ricci extraction") {
  EstimatorConfig cfg;
  cfg.n_paths = 100000;
  FunctionalOptions opt;

  const Manifold e2 = Manifold::euclidean(2);
  const Point xe{0, vec2(0.0, 0.0)};
  const Cylindrical fe = make_functional(e2, "coord", xe, 0.08, 1e-3, opt);
  const EstimateReport re = ricci_short_time(e2, fe, xe, 2.0, {}, cfg);
  CHECK(std::fabs(re.value) <= 0.05);
  CHECK(re.extra("reference") == 0.0);
  CHECK(re.extra("T_1") == doctest::Approx(0.02));

  const Manifold ou = Manifold::euclidean_ou(1, 1.0);
  const Point xo{0, vec1(0.0)};
  const Cylindrical fo = make_functional(ou, "coord", xo, 0.08, 1e-3, opt);
  const EstimateReport ro = ricci_short_time(ou, fo, xo, 2.0, {}, cfg);
  CHECK(std::fabs(ro.value - 1.0) <= 0.10);

  const Manifold s2 = Manifold::sphere(2, 1.0);
  const Point xs{0, vec2(1.0, 0.0)};
  const Cylindrical fs = make_functional(s2, "eigen", xs, 0.08, 1e-3, opt);
  const EstimateReport rs = ricci_short_time(s2, fs, xs, 2.0, {}, cfg);
  CHECK(std::fabs(rs.value - 1.0) <= 0.15);
  CHECK(rs.extra("linearity_stderr") > 0.0);
}

TEST_CASE("slope detector limits") {
  const Manifold s2 = Manifold::sphere(2, 1.0);
  const Point x{0, vec2(1.0, 0.0)};
  FunctionalOptions opt;
  const Cylindrical f = make_functional(s2, "eigen", x, 0.02, 1e-3, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 20000;
  const std::vector<double> Ts{0.01, 0.02};

  const EstimateReport lo_ok =
      slope_detector(s2, CurvatureBounds::constants(1.0, 0.5), "lower", f, x, Ts, cfg);
  CHECK(std::fabs(lo_ok.value - 0.5) <= 3.0 * lo_ok.std_error + 0.005);

  const EstimateReport lo_bad =
      slope_detector(s2, CurvatureBounds::constants(1.5, 1.5), "lower", f, x, Ts, cfg);
  CHECK(std::fabs(lo_bad.value + 0.5) <= 3.0 * lo_bad.std_error + 0.005);
  CHECK(lo_bad.value < -3.0 * lo_bad.std_error);

  const EstimateReport up =
      slope_detector(s2, CurvatureBounds::constants(1.0, 0.5), "upper", f, x, Ts, cfg);
  CHECK(std::fabs(up.value) <= 3.0 * up.std_error + 0.005);
}

TEST_CASE("reports are invariant under the worker count") {
  const Manifold e2 = Manifold::euclidean(2);
  const Point x{0, vec2(0.3, 0.3)};
  FunctionalOptions opt;
  const Cylindrical f = make_functional(e2, "gauss_bump", x, 0.3, 1e-3, opt);
  EstimatorConfig cfg;
  cfg.n_paths = 10000;
  ::setenv("PATHCURV_WORKERS", "1", 1);
  const EstimateReport one = estimate_pt(e2, f, x, 0.3, cfg);
  ::setenv("PATHCURV_WORKERS", "3", 1);
  const EstimateReport three = estimate_pt(e2, f, x, 0.3, cfg);
  ::unsetenv("PATHCURV_WORKERS");
  CHECK(one.value == three.value);
  CHECK(one.std_error == three.std_error);
}
