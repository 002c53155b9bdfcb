#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "sihg/block_vector.hpp"
#include "sihg/problem.hpp"
#include "sihg/rng.hpp"

namespace sihg {

// One implicit ascent step on a block:
//   d+ = prox_g^tau( anchor + tau * grad(d+) )
// equivalently d+ = argmin_u g(u) - phi(w, u) + (1/(2 tau)) |u - anchor|^2.
// grad maps u to grad_delta phi(w, u) for the fixed w baked into the closure.
struct ImplicitResult {
  Vector delta;
  int inner_iterations = 0;
  // Fixed-point defect |delta - prox_g^tau(anchor + tau grad(delta))| of the
  // returned point, measured directly (not a contraction estimate).
  double optimality_residual = 0.0;
  // Per-iteration defects, filled only when InnerSolverConfig::record_defects.
  std::vector<double> defect_history;
};

struct InnerSolveError : std::runtime_error {
  InnerSolveError(const std::string& what, int iterations, double defect)
      : std::runtime_error(what), iterations(iterations), defect(defect) {}
  int iterations;
  double defect;
};

using GradFn = std::function<Vector(const Vector&)>;
using ProxFn = std::function<Vector(const Vector&, double)>;

// Picard iteration u <- prox_g^tau(anchor + tau grad(u)). Contracts when
// tau * L22 < 1; grad_lipschitz (= L22, pass 0 if unknown) only gates a
// warning, the iteration is attempted regardless.
ImplicitResult solve_implicit_fixed_point(const ProxFn& prox_g, const GradFn& grad,
                                          const Vector& anchor, double tau,
                                          double grad_lipschitz, const InnerSolverConfig& inner);

// Accelerated proximal gradient on the equivalent subproblem, with momentum
// tuned to its strong convexity and a gradient-scheme restart. Needs
// grad_lipschitz = L22 for the step size; requires tau * L22 < 1 so the smooth
// part stays convex, and falls back to the fixed-point iteration otherwise.
ImplicitResult solve_implicit_accelerated(const ProxFn& prox_g, const GradFn& grad,
                                          const Vector& anchor, double tau, double grad_lipschitz,
                                          const InnerSolverConfig& inner);

// Dispatch on inner.method.
ImplicitResult solve_implicit(const ProxFn& prox_g, const GradFn& grad, const Vector& anchor,
                              double tau, double grad_lipschitz, const InnerSolverConfig& inner);

// Euclidean projection onto {|z|_inf <= radius} intersect {|z - anchor|_inf <= band}:
// coordinate-wise clamp to [max(-radius, anchor_j - band), min(radius, anchor_j + band)].
// Throws if the intersection is empty on some coordinate.
Vector project_box_intersection(const Vector& z, const Vector& anchor, double band, double radius);

// Sign-gradient ascent surrogate for the implicit step under a box g:
// noisy start uniform in the band around anchor (clamped into the radius box),
// then steps u <- P(u + eta * sign(grad(u))) with P the intersection
// projection anchored at the pre-noise anchor. sign(0) = 0.
// eta == 0 selects the 2.5 * radius / steps schedule.
Vector pgd_surrogate_step(const GradFn& grad, const Vector& anchor, double radius, double band,
                          int steps, double eta, Rng& rng);

}  // namespace sihg
