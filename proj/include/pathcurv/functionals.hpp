#pragma once

// Cylindrical path functionals F = f(X_{t_1}, ..., X_{t_N}) with analytic
// gradients, optional radius cutoffs, and the discrete Malliavin gradient
// machinery built on them: plain, damped (A factors) and resolvent-damped
// (Q factors) densities plus the path-space energy sample.

#include <optional>
#include <string>
#include <vector>

#include "pathcurv/dynamics.hpp"
#include "pathcurv/geometry.hpp"
#include "pathcurv/transport.hpp"

namespace pathcurv {

enum class BatteryKind { Coord, Eigen, GaussBump, Sine, TwoTime, EpsFamily };

struct Cutoff {
  double R = 0.0;
  int m_limit = -1;  // radius over the first m nodes; -1 means the whole grid
  Point center;
};

struct Cylindrical {
  BatteryKind kind = BatteryKind::Coord;
  std::vector<double> times;  // absolute times, strictly increasing, last <= T
  int coord = 0;              // chart coordinate, or ambient coordinate on spheres
  double scale = 1.0;         // multiplies the base function
  double bump_width = 0.7;
  Vec bump_center;            // ambient (sphere) or chart coordinates
  std::optional<Cutoff> cutoff;

  int n_times() const { return static_cast<int>(times.size()); }
  // Base (uncut) value at sampled points and coordinate partials of the
  // i-th summand; pts[i] is the point at times[i].
  double base_value(const Manifold& M, const std::vector<Point>& pts) const;
  Vec base_partials(const Manifold& M, const std::vector<Point>& pts, int i) const;
};

struct FunctionalOptions {
  int coord = 0;
  double eps = 0.0;          // eps_family first time; 0 picks 10 dt
  double bump_offset = 0.3;  // bump center offset along the first feature axis
  double bump_width = 0.7;
  double cutoff_R = 0.0;     // > 0 wraps the functional with l(rho_x^m)
  int cutoff_m = -1;
  bool normalize = true;     // rescale so |grad f|(x0) = 1 for one-point kinds
};

Cylindrical make_functional(const Manifold& M, const std::string& name, const Point& x0,
                            double T, double dt, const FunctionalOptions& opt);

// Smooth profile with l = 1 on [0, R/2], l = 0 on [R, inf).
double bump_l(double rho, double R);
double bump_l_prime(double rho, double R);

struct RadiusInfo {
  double rho = 0.0;
  int argmax = 0;
  double tie_gap = 0.0;  // rho minus the best distance at any other node
};

// max over the first m_limit grid nodes of d(X_{s_k}, center); ties resolved
// to the smallest index, reported for the cutoff product rule.
RadiusInfo discrete_radius(const Manifold& M, const PathSample& path, const Point& center,
                           int m_limit);

// F evaluated on a path, cutoff included.
double evaluate(const Manifold& M, const Cylindrical& F, const PathSample& path);

// One term U_{t_i}^T df_i of the gradient decomposition, as frame components
// at its grid node. The cutoff contributes one extra term at the radius
// argmax node (product rule through l(rho)).
struct Summand {
  int node = 0;
  Vec frame_comps;
};

struct SummandSet {
  int dim = 0;
  double value = 0.0;          // F(path)
  std::vector<Summand> terms;  // sorted by node
};

SummandSet gradient_summands(const Manifold& M, const Cylindrical& F, const PathSample& path);

// Piecewise-constant density in s: value on the grid step [s_k, s_{k+1}).
struct GradientDensity {
  int anchor = 0;
  std::vector<Vec> step_value;  // entry j is the value on step anchor + j

  const Vec& at_step(int k) const { return step_value[static_cast<std::size_t>(k - anchor)]; }
  int n_values() const { return static_cast<int>(step_value.size()); }
};

// D_s F = sum_{t_i > s} U_{t_i}^T df_i (no damping); steps anchor..m-1.
GradientDensity malliavin_density(const SummandSet& S, int n_steps, int anchor);

// Damped variant: terms scaled by A_{anchor, t_i}.
GradientDensity modified_density(const SummandSet& S, const TransportPack& pack, int anchor);

// Resolvent-damped gradient at the anchor node: sum_{t_i > t} Q_{t, t_i} c_i.
Vec damped_gradient(const SummandSet& S, const TransportPack& pack, int anchor);

// (1 + mu([t,T])) (|D_{t,t}F|^2 + int_t^T |D_{t,s}F|^2 mu(ds)), one path.
double energy_sample(const SummandSet& S, const TransportPack& pack, int anchor);

}  // namespace pathcurv
