#include "pathcurv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathcurv/errors.hpp"
#include "pathcurv/rng.hpp"
#include "pathcurv/strutil.hpp"

namespace pathcurv {

namespace {

double sqnorm(const Vec& u) { return dot(u, u); }

// Conformal Christoffel symbols for g = e^{2 phi} delta:
// Gamma^k_{ij} = delta^k_i phi_j + delta^k_j phi_i - delta_{ij} phi_k.
Christoffel conformal_christoffel(int n, const Vec& dphi) {
  Christoffel G = Christoffel::zero(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = 0.0;
        if (k == i) v += dphi[j];
        if (k == j) v += dphi[i];
        if (i == j) v -= dphi[k];
        G(k, i, j) = v;
      }
  return G;
}

}  // namespace

Manifold Manifold::euclidean(int dim) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("euclidean: dim must be in 1..4");
  Manifold m;
  m.kind_ = PresetKind::Euclidean;
  m.dim_ = dim;
  return m;
}

Manifold Manifold::euclidean_ou(int dim, double lambda) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("euclidean_ou: dim must be in 1..4");
  Manifold m;
  m.kind_ = PresetKind::EuclideanOU;
  m.dim_ = dim;
  m.lambda_ = lambda;
  return m;
}

Manifold Manifold::sphere(int dim, double radius) {
  if (dim != 2 && dim != 3) throw ConfigError("sphere: dim must be 2 or 3");
  if (!(radius > 0.0)) throw ConfigError("sphere: radius must be positive");
  Manifold m;
  m.kind_ = PresetKind::Sphere;
  m.dim_ = dim;
  m.radius_ = radius;
  return m;
}

Manifold Manifold::hyperbolic2() {
  Manifold m;
  m.kind_ = PresetKind::Hyperbolic;
  m.dim_ = 2;
  return m;
}

Manifold Manifold::from_name(const std::string& name, int dim, double radius, double lambda) {
  if (name == "euclidean") return euclidean(dim);
  if (name == "euclidean_ou") return euclidean_ou(dim, lambda);
  if (name == "sphere") return sphere(dim, radius);
  if (name == "hyperbolic") {
    if (dim != 0 && dim != 2) throw ConfigError("hyperbolic: only dim 2 is shipped");
    return hyperbolic2();
  }
  throw ConfigError("unknown manifold preset: " + name);
}

std::string Manifold::name() const {
  switch (kind_) {
    case PresetKind::Euclidean: return "euclidean";
    case PresetKind::EuclideanOU: return "euclidean_ou";
    case PresetKind::Sphere: return "sphere";
    case PresetKind::Hyperbolic: return "hyperbolic";
  }
  return "?";
}

std::string Manifold::params_string() const {
  switch (kind_) {
    case PresetKind::Euclidean: return "-";
    case PresetKind::EuclideanOU: return "lambda=" + format_double(lambda_);
    case PresetKind::Sphere: return "r=" + format_double(radius_);
    case PresetKind::Hyperbolic: return "-";
  }
  return "-";
}

double Manifold::chart_validity() const {
  switch (kind_) {
    case PresetKind::Sphere: return 4.0;
    // Wide enough that a T = 0.5 diffusion essentially never reaches the rim
    // (geodesic radius 2 atanh(0.997) ~ 6.8); the metric factor stays finite.
    case PresetKind::Hyperbolic: return 0.997;
    default: return std::numeric_limits<double>::infinity();
  }
}

bool Manifold::in_chart(const Vec& u) const { return norm2(u) < chart_validity(); }

void Manifold::require_in_chart(int chart, const Vec& u) const {
  if (chart < 0 || chart >= n_charts()) throw OutOfChart("chart index out of range");
  if (u.n != dim_) throw OutOfChart("coordinate dimension mismatch");
  if (!in_chart(u))
    throw OutOfChart(name() + ": |u| = " + format_double(norm2(u)) +
                     " outside chart validity " + format_double(chart_validity()));
}

double Manifold::conf_factor(const Vec& u) const {
  switch (kind_) {
    case PresetKind::Sphere: {
      const double s = 1.0 + sqnorm(u);
      const double f = 2.0 * radius_ / s;
      return f * f;
    }
    case PresetKind::Hyperbolic: {
      const double s = 1.0 - sqnorm(u);
      const double f = 2.0 / s;
      return f * f;
    }
    default: return 1.0;
  }
}

Vec Manifold::conf_phi_partials(const Vec& u) const {
  Vec d = Vec::zero(dim_);
  if (kind_ == PresetKind::Sphere) {
    const double s = 1.0 + sqnorm(u);
    for (int i = 0; i < dim_; ++i) d[i] = -2.0 * u[i] / s;
  } else if (kind_ == PresetKind::Hyperbolic) {
    const double s = 1.0 - sqnorm(u);
    for (int i = 0; i < dim_; ++i) d[i] = 2.0 * u[i] / s;
  }
  return d;
}

Mat Manifold::conf_phi_hessian(const Vec& u) const {
  Mat h = Mat::zero(dim_);
  if (kind_ == PresetKind::Sphere) {
    const double s = 1.0 + sqnorm(u);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        h(i, j) = (i == j ? -2.0 / s : 0.0) + 4.0 * u[i] * u[j] / (s * s);
  } else if (kind_ == PresetKind::Hyperbolic) {
    const double s = 1.0 - sqnorm(u);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        h(i, j) = (i == j ? 2.0 / s : 0.0) + 4.0 * u[i] * u[j] / (s * s);
  }
  return h;
}

Mat Manifold::metric_at(int chart, const Vec& u) const {
  require_in_chart(chart, u);
  Mat g = Mat::zero(dim_);
  const double f = conf_factor(u);
  for (int i = 0; i < dim_; ++i) g(i, i) = f;
  return g;
}

Mat Manifold::metric_inverse_at(int chart, const Vec& u) const {
  require_in_chart(chart, u);
  Mat gi = Mat::zero(dim_);
  const double f = conf_factor(u);
  if (!(f > 0.0) || !std::isfinite(f)) throw SingularMetric("conformal factor not positive");
  for (int i = 0; i < dim_; ++i) gi(i, i) = 1.0 / f;
  return gi;
}

Christoffel Manifold::christoffel_at(int chart, const Vec& u, GeoBackend backend) const {
  require_in_chart(chart, u);
  if (backend == GeoBackend::Analytic) {
    if (kind_ == PresetKind::Euclidean || kind_ == PresetKind::EuclideanOU)
      return Christoffel::zero(dim_);
    return conformal_christoffel(dim_, conf_phi_partials(u));
  }
  // Central differences of the metric, h scaled by the coordinate size.
  const int n = dim_;
  const double h = 1e-4 * std::max(1.0, norm2(u));
  std::array<Mat, kMaxDim> dg;  // dg[l] = d g / d u_l
  for (int l = 0; l < n; ++l) {
    Vec up = u, um = u;
    up[l] += h;
    um[l] -= h;
    const Mat gp = metric_at(chart, up);
    const Mat gm = metric_at(chart, um);
    dg[static_cast<std::size_t>(l)] = (1.0 / (2.0 * h)) * (gp - gm);
  }
  const Mat gi = metric_inverse_at(chart, u);
  Christoffel G = Christoffel::zero(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += gi(k, l) * (dg[static_cast<std::size_t>(i)](l, j) +
                           dg[static_cast<std::size_t>(j)](l, i) -
                           dg[static_cast<std::size_t>(l)](i, j));
        G(k, i, j) = 0.5 * s;
      }
  return G;
}

Mat Manifold::ricci_at(int chart, const Vec& u, GeoBackend backend) const {
  require_in_chart(chart, u);
  const int n = dim_;
  if (backend == GeoBackend::Analytic) {
    Mat ric = Mat::zero(n);
    if (kind_ == PresetKind::Euclidean || kind_ == PresetKind::EuclideanOU) return ric;
    // Conformal formula, flat derivatives of phi:
    // Ric_ij = -(n-2)(phi_ij - phi_i phi_j) - (lap phi + (n-2)|dphi|^2) delta_ij.
    const Vec dphi = conf_phi_partials(u);
    const Mat hphi = conf_phi_hessian(u);
    double lap = 0.0, grad2 = 0.0;
    for (int i = 0; i < n; ++i) {
      lap += hphi(i, i);
      grad2 += dphi[i] * dphi[i];
    }
    const double nm2 = static_cast<double>(n - 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = -nm2 * (hphi(i, j) - dphi[i] * dphi[j]);
        if (i == j) v -= lap + nm2 * grad2;
        ric(i, j) = v;
      }
    return ric;
  }
  // Contraction of the curvature tensor with centered differences of the
  // (analytic) Christoffel symbols:
  // Ric_ij = d_k G^k_ij - d_i G^k_kj + G^k_kl G^l_ij - G^k_il G^l_kj.
  const double h = 1e-3;
  const Christoffel G0 = christoffel_at(chart, u, GeoBackend::Analytic);
  std::array<Christoffel, kMaxDim> dG;
  for (int l = 0; l < n; ++l) {
    Vec up = u, um = u;
    up[l] += h;
    um[l] -= h;
    const Christoffel Gp = christoffel_at(chart, up, GeoBackend::Analytic);
    const Christoffel Gm = christoffel_at(chart, um, GeoBackend::Analytic);
    Christoffel d = Christoffel::zero(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) d(a, b, c) = (Gp(a, b, c) - Gm(a, b, c)) / (2.0 * h);
    dG[static_cast<std::size_t>(l)] = d;
  }
  Mat ric = Mat::zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      for (int k = 0; k < n; ++k) {
        v += dG[static_cast<std::size_t>(k)](k, i, j);
        v -= dG[static_cast<std::size_t>(i)](k, k, j);
        for (int l = 0; l < n; ++l) {
          v += G0(k, k, l) * G0(l, i, j);
          v -= G0(k, i, l) * G0(l, k, j);
        }
      }
      ric(i, j) = v;
    }
  return ric;
}

Vec Manifold::drift_z(int chart, const Vec& u) const {
  (void)chart;
  Vec z = Vec::zero(dim_);
  if (kind_ == PresetKind::EuclideanOU)
    for (int i = 0; i < dim_; ++i) z[i] = lambda_ * u[i];
  return z;
}

Mat Manifold::grad_z_lowered(int chart, const Vec& u) const {
  (void)chart;
  (void)u;
  Mat m = Mat::zero(dim_);
  if (kind_ == PresetKind::EuclideanOU)
    for (int i = 0; i < dim_; ++i) m(i, i) = lambda_;
  return m;
}

Mat Manifold::bakry_emery(int chart, const Vec& u) const {
  Mat m = ricci_at(chart, u, GeoBackend::Analytic);
  if (has_drift()) {
    const Mat dz = grad_z_lowered(chart, u);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) m(i, j) += 0.5 * (dz(i, j) + dz(j, i));
  }
  return m;
}

std::optional<double> Manifold::einstein_constant() const {
  switch (kind_) {
    case PresetKind::Euclidean: return 0.0;
    case PresetKind::EuclideanOU: return lambda_;
    case PresetKind::Sphere: return static_cast<double>(dim_ - 1) / (radius_ * radius_);
    case PresetKind::Hyperbolic: return -1.0;
  }
  return std::nullopt;
}

Point Manifold::transition(const Point& p) const {
  if (kind_ != PresetKind::Sphere) throw OutOfChart("transition: preset has a single chart");
  const double r2 = sqnorm(p.u);
  if (r2 == 0.0) throw OutOfChart("transition undefined at the chart origin");
  Point q;
  q.chart = 1 - p.chart;
  q.u = (1.0 / r2) * p.u;
  return q;
}

Mat Manifold::transition_jacobian(const Vec& u) const {
  if (kind_ != PresetKind::Sphere) throw OutOfChart("transition: preset has a single chart");
  const double r2 = sqnorm(u);
  Mat j = Mat::zero(dim_);
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b)
      j(a, b) = ((a == b ? 1.0 : 0.0) - 2.0 * u[a] * u[b] / r2) / r2;
  return j;
}

Vec Manifold::embed(const Point& p) const {
  if (kind_ != PresetKind::Sphere) return p.u;
  const int n = dim_;
  const double s = 1.0 + sqnorm(p.u);
  Vec y = Vec::zero(n + 1);
  for (int i = 0; i < n; ++i) y[i] = radius_ * 2.0 * p.u[i] / s;
  const double last = (sqnorm(p.u) - 1.0) / s;
  y[n] = radius_ * (p.chart == 0 ? last : -last);
  return y;
}

std::array<Vec, kMaxDim> Manifold::embed_jacobian(const Point& p) const {
  std::array<Vec, kMaxDim> rows;
  const int n = dim_;
  if (kind_ != PresetKind::Sphere) {
    for (int j = 0; j < n; ++j) {
      rows[static_cast<std::size_t>(j)] = Vec::zero(n);
      rows[static_cast<std::size_t>(j)][j] = 1.0;
    }
    return rows;
  }
  const double su = 1.0 + sqnorm(p.u);
  const double sgn = (p.chart == 0 ? 1.0 : -1.0);
  for (int j = 0; j < n; ++j) {
    Vec& row = rows[static_cast<std::size_t>(j)];
    row = Vec::zero(n);
    for (int i = 0; i < n; ++i)
      row[i] = radius_ * ((j == i ? 2.0 / su : 0.0) - 4.0 * p.u[j] * p.u[i] / (su * su));
  }
  Vec& last = rows[static_cast<std::size_t>(n)];
  last = Vec::zero(n);
  for (int i = 0; i < n; ++i) last[i] = radius_ * sgn * 4.0 * p.u[i] / (su * su);
  return rows;
}

double Manifold::distance(const Point& a, const Point& b) const {
  switch (kind_) {
    case PresetKind::Euclidean:
    case PresetKind::EuclideanOU:
      return norm2(a.u - b.u);
    case PresetKind::Sphere: {
      const Vec ya = embed(a);
      const Vec yb = embed(b);
      const double c = std::clamp(dot(ya, yb) / (radius_ * radius_), -1.0, 1.0);
      return radius_ * std::acos(c);
    }
    case PresetKind::Hyperbolic: {
      const double d2 = sqnorm(a.u - b.u);
      const double qa = 1.0 - sqnorm(a.u);
      const double qb = 1.0 - sqnorm(b.u);
      return std::acosh(1.0 + 2.0 * d2 / (qa * qb));
    }
  }
  return 0.0;
}

Vec Manifold::distance_partials(const Point& y, const Point& x) const {
  const int n = dim_;
  switch (kind_) {
    case PresetKind::Euclidean:
    case PresetKind::EuclideanOU: {
      const Vec d = y.u - x.u;
      const double r = norm2(d);
      if (r == 0.0) throw NonDifferentiableRadius("distance gradient at the center");
      return (1.0 / r) * d;
    }
    case PresetKind::Sphere: {
      const Vec sy = (1.0 / radius_) * embed(y);
      const Vec sx = (1.0 / radius_) * embed(x);
      const double c = std::clamp(dot(sy, sx), -1.0, 1.0);
      const double s2 = 1.0 - c * c;
      if (s2 <= 1e-28)
        throw NonDifferentiableRadius("distance gradient at the center or cut locus");
      const double su = 1.0 + sqnorm(y.u);
      const double sgn = (y.chart == 0 ? 1.0 : -1.0);
      Vec d = Vec::zero(n);
      for (int i = 0; i < n; ++i) {
        double t = 0.0;
        for (int j = 0; j < n; ++j) {
          const double jac = (i == j ? 2.0 / su : 0.0) - 4.0 * y.u[j] * y.u[i] / (su * su);
          t += jac * sx[j];
        }
        t += sgn * (4.0 * y.u[i] / (su * su)) * sx[n];
        d[i] = -radius_ * t / std::sqrt(s2);
      }
      return d;
    }
    case PresetKind::Hyperbolic: {
      const double D = sqnorm(y.u - x.u);
      if (D == 0.0) throw NonDifferentiableRadius("distance gradient at the center");
      const double a = 1.0 - sqnorm(y.u);
      const double b = 1.0 - sqnorm(x.u);
      const double w = 1.0 + 2.0 * D / (a * b);
      const double denom = std::sqrt(w * w - 1.0);
      Vec d = Vec::zero(n);
      for (int i = 0; i < n; ++i) {
        const double dw = 4.0 * (y.u[i] - x.u[i]) / (a * b) + 4.0 * D * y.u[i] / (a * a * b);
        d[i] = dw / denom;
      }
      return d;
    }
  }
  return Vec::zero(n);
}

double Manifold::injectivity_bound() const {
  if (kind_ == PresetKind::Sphere) return 3.14159265358979323846 * radius_;
  return std::numeric_limits<double>::infinity();
}

Point Manifold::geodesic_point(const Point& x, const Vec& v, double s) const {
  const int n = dim_;
  switch (kind_) {
    case PresetKind::Euclidean:
    case PresetKind::EuclideanOU: {
      Point y = x;
      y.u = x.u + s * v;
      return y;
    }
    case PresetKind::Sphere: {
      const Vec sx = (1.0 / radius_) * embed(x);
      // Ambient image of the chart tangent vector; a g-unit v gives an
      // ambient vector of length 1/r on the unit sphere image.
      const double su = 1.0 + sqnorm(x.u);
      Vec w = Vec::zero(n + 1);
      for (int j = 0; j < n; ++j) {
        double t = 0.0;
        for (int i = 0; i < n; ++i) {
          const double jac = (j == i ? 2.0 / su : 0.0) - 4.0 * x.u[j] * x.u[i] / (su * su);
          t += jac * v[i];
        }
        w[j] = t;
      }
      {
        const double sgn = (x.chart == 0 ? 1.0 : -1.0);
        double t = 0.0;
        for (int i = 0; i < n; ++i) t += sgn * (4.0 * x.u[i] / (su * su)) * v[i];
        w[n] = t;
      }
      const double wn = norm2(w);
      if (wn == 0.0) return x;
      const double ang = s / radius_;
      Vec yu = Vec::zero(n + 1);
      for (int i = 0; i <= n; ++i)
        yu[i] = std::cos(ang) * sx[i] + std::sin(ang) * w[i] / wn;
      // Back to whichever stereographic chart keeps |u| small.
      Point out;
      const double last = yu[n];
      out.chart = (last <= 0.0) ? 0 : 1;
      const double denom = (out.chart == 0) ? (1.0 - last) : (1.0 + last);
      out.u = Vec::zero(n);
      for (int i = 0; i < n; ++i) out.u[i] = yu[i] / denom;
      return out;
    }
    case PresetKind::Hyperbolic: {
      // Geodesic ODE u'' = -Gamma(u', u'), RK4 on (u, w).
      const int steps = std::max(16, static_cast<int>(std::ceil(std::fabs(s) / 0.01)));
      const double h = s / steps;
      Vec u = x.u;
      Vec w = v;
      auto acc = [&](const Vec& uu, const Vec& ww) {
        const Christoffel G = christoffel_at(0, uu, GeoBackend::Analytic);
        Vec a = Vec::zero(n);
        for (int k = 0; k < n; ++k) {
          double t = 0.0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) t += G(k, i, j) * ww[i] * ww[j];
          a[k] = -t;
        }
        return a;
      };
      for (int kstep = 0; kstep < steps; ++kstep) {
        const Vec k1u = w, k1w = acc(u, w);
        const Vec k2u = w + (h / 2) * k1w, k2w = acc(u + (h / 2) * k1u, w + (h / 2) * k1w);
        const Vec k3u = w + (h / 2) * k2w, k3w = acc(u + (h / 2) * k2u, w + (h / 2) * k2w);
        const Vec k4u = w + h * k3w, k4w = acc(u + h * k3u, w + h * k3w);
        u = u + (h / 6) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        w = w + (h / 6) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        if (!in_chart(u)) throw OutOfChart("geodesic left the Poincare chart");
      }
      Point y;
      y.chart = 0;
      y.u = u;
      return y;
    }
  }
  return x;
}

Mat bakry_emery_frame(const Manifold& M, int chart, const Vec& u, const Mat& U) {
  const Mat be = M.bakry_emery(chart, u);
  const int n = M.dim();
  Mat out = Mat::zero(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += U(i, a) * be(i, j) * U(j, b);
      out(a, b) = s;
    }
  // Assemble exactly symmetric regardless of roundoff in the contraction.
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const double m = 0.5 * (out(a, b) + out(b, a));
      out(a, b) = m;
      out(b, a) = m;
    }
  return out;
}

Mat initial_frame(const Manifold& M, int chart, const Vec& u) {
  const Mat g = M.metric_at(chart, u);
  Mat L;
  if (!cholesky(g, L)) throw SingularMetric("metric not positive definite");
  Mat Lt = transpose(L);
  Mat U;
  if (!invert(Lt, U)) throw SingularMetric("metric Cholesky factor not invertible");
  return U;
}

void gram_schmidt(const Mat& g, Mat& U) {
  const int n = g.n;
  for (int a = 0; a < n; ++a) {
    // v = column a
    Vec v = Vec::zero(n);
    for (int i = 0; i < n; ++i) v[i] = U(i, a);
    for (int b = 0; b < a; ++b) {
      Vec e = Vec::zero(n);
      for (int i = 0; i < n; ++i) e[i] = U(i, b);
      const Vec ge = matvec(g, e);
      const double proj = dot(v, ge);
      for (int i = 0; i < n; ++i) v[i] -= proj * e[i];
    }
    const Vec gv = matvec(g, v);
    const double nv = std::sqrt(dot(v, gv));
    if (!(nv > 1e-14)) throw SingularMetric("frame degenerated in Gram-Schmidt");
    for (int i = 0; i < n; ++i) U(i, a) = v[i] / nv;
  }
}

FrameState chart_normalize(const Manifold& M, const FrameState& s) {
  if (M.kind() != PresetKind::Sphere) return s;
  if (norm2(s.u) <= M.switch_radius()) return s;
  FrameState out = s;
  Point p;
  p.chart = s.chart;
  p.u = s.u;
  const Mat J = M.transition_jacobian(s.u);
  const Point q = M.transition(p);
  out.chart = q.chart;
  out.u = q.u;
  out.U = matmul(J, s.U);
  return out;
}

LocalCurvatureResult local_curvature_inf(const Manifold& M, const Point& x, double R,
                                         int n_samples, std::uint64_t seed) {
  if (!(R > 0.0)) throw ConfigError("local_curvature_inf: R must be positive");
  if (R >= M.injectivity_bound())
    throw ConfigError("local_curvature_inf: R exceeds the injectivity bound");
  M.require_in_chart(x.chart, x.u);
  const int n = M.dim();
  const std::uint64_t stream = derive_stream(seed, 0x10C4Cull);

  auto eigen_min_at = [&](const Point& p) {
    const Mat U = initial_frame(M, p.chart, p.u);
    const Mat Mf = bakry_emery_frame(M, p.chart, p.u, U);
    const Vec ev = sym_eigenvalues(Mf);
    return ev[0];
  };

  LocalCurvatureResult best;
  best.value = eigen_min_at(x);
  best.argmin = x;

  // Frame at x turns unit Gaussian directions into g-unit tangent vectors.
  const Mat U0 = initial_frame(M, x.chart, x.u);
  for (int k = 0; k < n_samples; ++k) {
    double z[kMaxDim + 1];
    fill_normals(seed, stream, static_cast<std::uint32_t>(k), z, n);
    Vec dir = Vec::zero(n);
    double zn = 0.0;
    for (int i = 0; i < n; ++i) zn += z[i] * z[i];
    zn = std::sqrt(zn);
    if (zn == 0.0) continue;
    Vec frame_dir = Vec::zero(n);
    for (int i = 0; i < n; ++i) frame_dir[i] = z[i] / zn;
    for (int i = 0; i < n; ++i) {
      double t = 0.0;
      for (int a = 0; a < n; ++a) t += U0(i, a) * frame_dir[a];
      dir[i] = t;
    }
    const double urad = uniform01(seed, stream, static_cast<std::uint32_t>(k), 7);
    const double s = R * std::pow(urad, 1.0 / n);
    const Point y = M.geodesic_point(x, dir, s);
    M.require_in_chart(y.chart, y.u);
    const double v = eigen_min_at(y);
    if (v < best.value) {
      best.value = v;
      best.argmin = y;
    }
  }
  return best;
}

CurvatureBounds CurvatureBounds::constants(double k1, double k2) {
  if (k1 < k2) throw ConfigError("curvature bounds: need K1 >= K2");
  CurvatureBounds b;
  b.kind = Kind::Constant;
  b.K1 = k1;
  b.K2 = k2;
  return b;
}

CurvatureBounds CurvatureBounds::quad_trunc(double k2, double cap) {
  if (cap < 1.0) throw ConfigError("curvature bounds: quad_trunc cap below 1");
  if (k2 > 1.0) throw ConfigError("curvature bounds: quad_trunc needs K2 <= 1");
  CurvatureBounds b;
  b.kind = Kind::QuadTrunc;
  b.K2 = k2;
  b.cap = cap;
  return b;
}

double CurvatureBounds::k1_at(const Manifold& M, const Point& p) const {
  if (kind == Kind::Constant) return K1;
  (void)M;
  double s = 0.0;
  for (int i = 0; i < p.u.n; ++i) s += p.u[i] * p.u[i];
  return std::min(1.0 + s, cap);
}

double CurvatureBounds::k2_at(const Manifold& M, const Point& p) const {
  (void)M;
  (void)p;
  return K2;
}

}  // namespace pathcurv
