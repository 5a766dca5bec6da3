#pragma once

// Path-indexed transport quantities: the curvature resolvent Q solving
// dQ/dt = -Q Ric_Z(U_t) (classical RK4 on the path grid, midpoint values by
// linear interpolation), its normalized variant, the scalar damping factor
// A_{s,t} = exp(-int_s^t (K1+K2)/2), and the random measure
// mu(ds) = exp(int (K1-K2)/2) (K1-K2)/2 ds with trapezoidal weights.
//
// RK4 acts linearly on Q, so each grid step has a transfer matrix and any
// anchored resolvent is a running product of them; the discrete flow then
// satisfies the cocycle identity to roundoff by construction.

#include <vector>

#include "pathcurv/dynamics.hpp"
#include "pathcurv/geometry.hpp"

namespace pathcurv {

struct TransportPack {
  int n_steps = 0;
  double dt = 0.0;
  bool restart_convention = true;
  std::vector<double> k1;         // node values of the upper bound along the path
  std::vector<double> k2;         // node values of the lower bound
  std::vector<double> cum_plus;   // trapezoidal int_0^{s_k} (k1+k2)/2
  std::vector<double> cum_minus;  // trapezoidal int_0^{s_k} (k1-k2)/2
  std::vector<Mat> ric_frame;     // Ric_Z in the moving frame at nodes
  std::vector<Mat> q_step;        // per-step RK4 transfer matrices for Q
  std::vector<Mat> q0;            // Q_{0, s_k}

  // A_{s,t} for grid nodes; exact exponential of the trapezoid integral.
  double damping_a(int s_idx, int t_idx) const;
  // Density of mu at node k for an integral anchored at node `anchor`.
  double mu_density(int k, int anchor) const;
  // Trapezoidal mass of mu on the step [s_k, s_{k+1}], anchored at `anchor`.
  double mu_step_mass(int k, int anchor) const;
  // mu([s_anchor, T]).
  double mu_total_mass(int anchor) const;
};

TransportPack build_transport(const Manifold& M, const PathSample& path,
                              const CurvatureBounds& bounds);

// Q_{anchor, k} for k = anchor..n_steps; entry j is Q_{anchor, anchor+j}.
std::vector<Mat> resolvent_q(const TransportPack& pack, int anchor);

// Normalized resolvent from dQs/dt = -Qs (Ric_Z - (K1+K2)/2 Id).
std::vector<Mat> resolvent_q_sym(const TransportPack& pack, int anchor);

// exp(int_anchor^{s_k} (K1+K2)/2) integrated by the same RK4 stages as the
// resolvents, so identity checks between Q, Qs and this factor are free of
// quadrature mismatch.
std::vector<double> sym_growth_factor(const TransportPack& pack, int anchor);

}  // namespace pathcurv
