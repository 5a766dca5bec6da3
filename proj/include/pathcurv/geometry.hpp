#pragma once

// Model manifolds in explicit charts: flat space, flat space with a linear
// drift field, round spheres in two stereographic charts, and the hyperbolic
// plane in the Poincare ball. Everything the integrator needs (metric,
// Christoffel symbols, Ricci, drift covariant derivative) has an analytic
// backend; central-difference backends exist for cross-checks.

#include <cstdint>
#include <optional>
#include <string>

#include "pathcurv/linalg.hpp"

namespace pathcurv {

enum class PresetKind { Euclidean, EuclideanOU, Sphere, Hyperbolic };

enum class GeoBackend { Analytic, FiniteDifference };

struct Point {
  int chart = 0;
  Vec u;
};

// Position, time and a g-orthonormal frame (columns U(:,a) are the frame
// vectors in chart components).
struct FrameState {
  int chart = 0;
  double t = 0.0;
  Vec u;
  Mat U;
};

class Manifold {
 public:
  static Manifold euclidean(int dim);
  static Manifold euclidean_ou(int dim, double lambda);
  static Manifold sphere(int dim, double radius);
  static Manifold hyperbolic2();
  static Manifold from_name(const std::string& name, int dim, double radius, double lambda);

  PresetKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double radius() const { return radius_; }
  double lambda() const { return lambda_; }
  std::string name() const;
  std::string params_string() const;

  int n_charts() const { return kind_ == PresetKind::Sphere ? 2 : 1; }
  double chart_validity() const;  // max coordinate radius
  double switch_radius() const { return 1.5; }
  bool in_chart(const Vec& u) const;
  void require_in_chart(int chart, const Vec& u) const;

  Mat metric_at(int chart, const Vec& u) const;
  Mat metric_inverse_at(int chart, const Vec& u) const;
  Christoffel christoffel_at(int chart, const Vec& u,
                             GeoBackend backend = GeoBackend::Analytic) const;
  Mat ricci_at(int chart, const Vec& u,
               GeoBackend backend = GeoBackend::Analytic) const;

  bool has_drift() const { return kind_ == PresetKind::EuclideanOU; }
  Vec drift_z(int chart, const Vec& u) const;
  // Lowered covariant derivative (nabla Z)_{ij} = g_{ik} (d_j Z^k + Gamma^k_{jl} Z^l).
  Mat grad_z_lowered(int chart, const Vec& u) const;
  // Ric_Z = Ric + (sym nabla Z) as a coordinate bilinear form.
  Mat bakry_emery(int chart, const Vec& u) const;
  // c with Ric_Z = c g (all shipped presets are Einstein in this sense);
  // in any orthonormal frame the curvature matrix is then c Id.
  std::optional<double> einstein_constant() const;

  // Chart transition (spheres only): the antipodal stereographic chart.
  Point transition(const Point& p) const;
  Mat transition_jacobian(const Vec& u) const;

  int ambient_dim() const { return kind_ == PresetKind::Sphere ? dim_ + 1 : dim_; }
  Vec embed(const Point& p) const;
  // Rows are ambient coordinates, entries chart partials of embed; identity
  // rows for single-chart presets.
  std::array<Vec, kMaxDim> embed_jacobian(const Point& p) const;
  double distance(const Point& a, const Point& b) const;
  // Coordinate partials at y of the map y -> d(y, x). Undefined at y == x.
  Vec distance_partials(const Point& y, const Point& x) const;
  // Geodesic injectivity bound relevant for cutoff radii (inf for flat /
  // hyperbolic within the chart).
  double injectivity_bound() const;
  // exp_x(s v) with v a g-unit tangent direction given in chart components.
  Point geodesic_point(const Point& x, const Vec& v, double s) const;

 private:
  PresetKind kind_ = PresetKind::Euclidean;
  int dim_ = 1;
  double radius_ = 1.0;
  double lambda_ = 0.0;

  double conf_factor(const Vec& u) const;      // e^{2 phi}
  Vec conf_phi_partials(const Vec& u) const;   // d phi
  Mat conf_phi_hessian(const Vec& u) const;    // flat Hessian of phi
};

// Frame expression M_ab = Ric_Z(U e_a, U e_b); assembled exactly symmetric.
Mat bakry_emery_frame(const Manifold& M, int chart, const Vec& u, const Mat& U);

// g-orthonormal frame from the Cholesky factor of the metric, U = L^{-T}.
Mat initial_frame(const Manifold& M, int chart, const Vec& u);

// Re-orthonormalize frame columns with modified Gram-Schmidt in g(u).
void gram_schmidt(const Mat& g, Mat& U);

// If the position left the comfortable part of a stereographic chart, map
// (u, U) through the transition; identity elsewhere. Idempotent.
FrameState chart_normalize(const Manifold& M, const FrameState& s);

struct LocalCurvatureResult {
  double value = 0.0;
  Point argmin;
};

// inf over sampled y in the metric ball B_R(x) of the smallest eigenvalue of
// Ric_Z at y. Deterministic in seed.
LocalCurvatureResult local_curvature_inf(const Manifold& M, const Point& x, double R,
                                         int n_samples, std::uint64_t seed);

// Curvature bound functions K1 >= K2; constants or the truncated quadratic
// preset K1(x) = min(1 + |x|^2, cap) on flat space.
struct CurvatureBounds {
  enum class Kind { Constant, QuadTrunc };
  Kind kind = Kind::Constant;
  double K1 = 0.0;
  double K2 = 0.0;
  double cap = 5.0;
  bool restart_convention = true;  // mu exponent integrates from s, not 0

  static CurvatureBounds constants(double k1, double k2);
  static CurvatureBounds quad_trunc(double k2, double cap);

  bool is_constant() const { return kind == Kind::Constant; }
  double k1_at(const Manifold& M, const Point& p) const;
  double k2_at(const Manifold& M, const Point& p) const;
};

}  // namespace pathcurv
