#include "sihg/implicit.hpp"

#include <cmath>
#include <iostream>

namespace sihg {

namespace {

void warn_no_contraction(const char* who, double tau, double grad_lipschitz) {
  static thread_local int warnings_left = 8;  // do not flood long sweeps
  if (warnings_left <= 0) return;
  --warnings_left;
  std::cerr << who << ": tau * L22 = " << tau * grad_lipschitz
            << " >= 1, contraction not guaranteed; attempting anyway\n";
}

}  // namespace

ImplicitResult solve_implicit_fixed_point(const ProxFn& prox_g, const GradFn& grad,
                                          const Vector& anchor, double tau,
                                          double grad_lipschitz, const InnerSolverConfig& inner) {
  if (!(tau > 0.0)) throw std::invalid_argument("solve_implicit_fixed_point: tau must be positive");
  if (grad_lipschitz > 0.0 && tau * grad_lipschitz >= 1.0)
    warn_no_contraction("solve_implicit_fixed_point", tau, grad_lipschitz);

  ImplicitResult result;
  Vector u = anchor;
  Vector next = prox_g(anchor + tau * grad(u), tau);
  for (int it = 1; it <= inner.max_iter; ++it) {
    u = next;
    next = prox_g(anchor + tau * grad(u), tau);
    const double defect = (next - u).norm();
    if (inner.record_defects) result.defect_history.push_back(defect);
    if (defect <= inner.tol) {
      result.delta = u;
      result.inner_iterations = it;
      result.optimality_residual = defect;
      return result;
    }
  }
  throw InnerSolveError("implicit fixed-point iteration did not converge", inner.max_iter,
                        (next - u).norm());
}

ImplicitResult solve_implicit_accelerated(const ProxFn& prox_g, const GradFn& grad,
                                          const Vector& anchor, double tau, double grad_lipschitz,
                                          const InnerSolverConfig& inner) {
  if (!(tau > 0.0)) throw std::invalid_argument("solve_implicit_accelerated: tau must be positive");
  if (!(grad_lipschitz >= 0.0))
    throw std::invalid_argument("solve_implicit_accelerated: grad_lipschitz must be >= 0");
  if (tau * grad_lipschitz >= 1.0) {
    // Smooth part may be nonconvex at this step size; momentum has no
    // guarantee there, the plain iteration at least has the prox geometry.
    warn_no_contraction("solve_implicit_accelerated", tau, grad_lipschitz);
    return solve_implicit_fixed_point(prox_g, grad, anchor, tau, grad_lipschitz, inner);
  }

  // Subproblem: minimize s(u) + g(u), s(u) = -phi(u) + (1/(2 tau)) |u - anchor|^2.
  // grad s(u) = -grad(u) + (u - anchor) / tau; L_s = L22 + 1/tau, m = 1/tau - L22.
  const double big_l = grad_lipschitz + 1.0 / tau;
  const double small_m = 1.0 / tau - grad_lipschitz;
  const double step = 1.0 / big_l;
  const double momentum =
      (std::sqrt(big_l) - std::sqrt(small_m)) / (std::sqrt(big_l) + std::sqrt(small_m));

  ImplicitResult result;
  Vector x = anchor;
  Vector y = anchor;
  for (int it = 1; it <= inner.max_iter; ++it) {
    const Vector grad_s = -grad(y) + (y - anchor) / tau;
    Vector x_next = prox_g(y - step * grad_s, step);
    // Gradient-scheme restart: drop momentum when it points uphill.
    if ((y - x_next).dot(x_next - x) > 0.0)
      y = x_next;
    else
      y = x_next + momentum * (x_next - x);
    x = x_next;

    const double defect = (x - prox_g(anchor + tau * grad(x), tau)).norm();
    if (inner.record_defects) result.defect_history.push_back(defect);
    if (defect <= inner.tol) {
      result.delta = x;
      result.inner_iterations = it;
      result.optimality_residual = defect;
      return result;
    }
  }
  throw InnerSolveError("implicit accelerated solve did not converge", inner.max_iter,
                        (x - prox_g(anchor + tau * grad(x), tau)).norm());
}

ImplicitResult solve_implicit(const ProxFn& prox_g, const GradFn& grad, const Vector& anchor,
                              double tau, double grad_lipschitz, const InnerSolverConfig& inner) {
  switch (inner.method) {
    case InnerSolverConfig::Method::FixedPoint:
      return solve_implicit_fixed_point(prox_g, grad, anchor, tau, grad_lipschitz, inner);
    case InnerSolverConfig::Method::AcceleratedProximal:
      return solve_implicit_accelerated(prox_g, grad, anchor, tau, grad_lipschitz, inner);
  }
  throw std::logic_error("solve_implicit: unknown method");
}

Vector project_box_intersection(const Vector& z, const Vector& anchor, double band,
                                double radius) {
  if (z.size() != anchor.size())
    throw std::invalid_argument("project_box_intersection: shape mismatch");
  if (!(band >= 0.0) || !(radius > 0.0))
    throw std::invalid_argument("project_box_intersection: need band >= 0 and radius > 0");
  Vector out(z.size());
  for (Index j = 0; j < z.size(); ++j) {
    const double lo = std::max(-radius, anchor[j] - band);
    const double hi = std::min(radius, anchor[j] + band);
    if (lo > hi)
      throw std::invalid_argument("project_box_intersection: empty intersection (anchor outside box)");
    out[j] = std::min(std::max(z[j], lo), hi);
  }
  return out;
}

Vector pgd_surrogate_step(const GradFn& grad, const Vector& anchor, double radius, double band,
                          int steps, double eta, Rng& rng) {
  if (steps <= 0) throw std::invalid_argument("pgd_surrogate_step: steps must be positive");
  if (!(radius > 0.0) || !(band >= 0.0))
    throw std::invalid_argument("pgd_surrogate_step: need radius > 0 and band >= 0");
  if (anchor.cwiseAbs().maxCoeff() > radius)
    throw std::invalid_argument("pgd_surrogate_step: anchor violates the radius box");
  if (eta == 0.0) eta = 2.5 * radius / static_cast<double>(steps);

  // Noise stays inside the band by construction, so clamping the start into
  // the radius box cannot leave the intersection set.
  Vector u(anchor.size());
  for (Index j = 0; j < anchor.size(); ++j)
    u[j] = anchor[j] + rng.next_in(-band, band);
  u = u.cwiseMax(-radius).cwiseMin(radius);

  for (int t = 0; t < steps; ++t) {
    const Vector g = grad(u);
    Vector stepv(u.size());
    for (Index j = 0; j < u.size(); ++j) {
      const double s = (g[j] > 0.0) ? 1.0 : (g[j] < 0.0 ? -1.0 : 0.0);
      stepv[j] = u[j] + eta * s;
    }
    u = project_box_intersection(stepv, anchor, band, radius);
  }
  return u;
}

}  // namespace sihg
