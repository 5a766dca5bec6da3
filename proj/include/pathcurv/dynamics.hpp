#pragma once

// Horizontal diffusion on the frame bundle: dX = sqrt(2) U dW - Z(X) dt in
// Stratonovich form, with the frame parallel-transported along the path and
// re-orthonormalized every step. Increments come from the counter RNG, so a
// path is a pure function of (seed, path_index, dt, T).

#include <cstdint>
#include <vector>

#include "pathcurv/geometry.hpp"

namespace pathcurv {

struct PathSample {
  double dt = 0.0;
  double T = 0.0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  std::vector<FrameState> states;  // n_steps + 1 entries
  std::vector<Vec> dw;             // raw Brownian increments, N(0, dt) per component

  // Grid index of an absolute time; throws TimesNotOnGrid when t is not a
  // node within 1e-9 relative tolerance.
  int index_of(double t) const;
};

// One Stratonovich-Heun predictor-corrector step of size dt driven by the
// increment dw (frame components). Updates position and frame in place,
// re-orthonormalizes, and applies chart normalization.
void horizontal_step(const Manifold& M, FrameState& s, const Vec& dw, double dt);

void simulate_path(const Manifold& M, const Point& x0, double T, double dt,
                   std::uint64_t seed, std::uint64_t path_index, PathSample& out);

// Same integrator driven by caller-supplied increments (Cameron-Martin
// perturbations in tests, nested estimators).
void simulate_path_with_increments(const Manifold& M, const Point& x0, double dt,
                                   const std::vector<Vec>& dw, PathSample& out);

// Continue from an interior frame state for m further steps on an
// independent RNG stream (nested conditional expectations).
void simulate_from(const Manifold& M, const FrameState& start, int m, double dt,
                   std::uint64_t seed, std::uint64_t stream, PathSample& out);

struct ExitCurve {
  std::vector<double> T;
  std::vector<double> p_hat;
  std::vector<double> std_err;
  std::vector<double> upper95;  // rule-of-three bound where p_hat == 0, else 0
  std::uint64_t n_paths = 0;
  double c_hat = 0.0;     // slope of -log p against 1/T
  double intercept = 0.0;
  double r2 = 0.0;
  int n_fit = 0;          // how many T entries had exits and entered the fit
  bool all_zero = false;  // no exits at any horizon
};

// Fraction of paths whose discretized radius max_k d(X_{s_k}, x0) reaches R
// by each horizon in T_list, plus the -log p ~ c / T regression.
ExitCurve exit_stats(const Manifold& M, const Point& x0, double R,
                     const std::vector<double>& T_list, double dt,
                     std::uint64_t n_paths, std::uint64_t seed);

}  // namespace pathcurv
