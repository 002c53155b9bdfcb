#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sihg/block_vector.hpp"
#include "sihg/implicit.hpp"
#include "sihg/problem.hpp"
#include "sihg/rng.hpp"
#include "sihg/trace.hpp"

namespace sihg {

// Squared norm of the minimal-selection saddle operator
//   F(w, d) = [ df(w) + grad_w phi(w, d) ; dg(d) - grad_d phi(w, d) ]
// minimized over subgradient selections in df(w) and dg(d) (exact for the
// supported term kinds, where the selection decouples per coordinate).
struct ResidualBreakdown {
  double total_sq = 0.0;
  double w_part_sq = 0.0;
  double delta_part_sq = 0.0;
  Vector witness_gamma_f;       // achieving selection in df(w)
  BlockVector witness_gamma_g;  // achieving selection in dg(d)
};

ResidualBreakdown saddle_residual_sq(const MinimaxProblem& problem, const Vector& w,
                                     const BlockVector& delta);

// Full-dimensional implicit update at (w, delta_prev): the unique d with
// d_i = prox_{g_i}^tau(delta_prev_i + tau grad_{d_i} phi_i(w, d_i)) for all i,
// solved jointly on the stacked vector. Residuals in stochastic runs are
// measured at this point.
BlockVector implicit_delta_full(const MinimaxProblem& problem, const Vector& w,
                                const BlockVector& delta_prev, double tau,
                                const InnerSolverConfig& inner);

// Sample-based check of a Minty-type variational inequality around
// problem.known_solution z*:
//   Weak   (parameter rho >= 0): <F(z), z - z*> >= -(rho/2) |F(z)|^2
//   Strong (parameter mu  >  0): <F(z), z - z*> >= (mu/2) |z - z*|^2
// F uses the minimal-selection witnesses; for box terms the sample's delta is
// clamped into the feasible set first. Certification is over the sampled
// domain only, never a proof on all of R^d.
struct MviDomain {
  Vector lo;  // stacked (w, delta) lower corner
  Vector hi;
};

struct MviReport {
  bool certified = false;
  double min_margin = 0.0;  // min over samples of LHS - RHS
  Vector argmin_point;      // stacked (w, delta) attaining it
  long samples = 0;
  std::string sampler;
};

enum class MviKind { Weak, Strong };
enum class MviSampler { Grid, Uniform };

MviReport check_mvi(const MinimaxProblem& problem, MviKind kind, double parameter,
                    const MviDomain& domain, MviSampler sampler, long samples, Rng rng);

// Exact single-block expectation identities. With delta_next(i) = delta_k with
// block i replaced by delta_hat's block i, and E the uniform average over i:
//   (e1)  r(delta_hat) = E r(delta_next) + (n-1)(E r(delta_next) - r(delta_k))
//         for separable r (checked for the supplied per-block r),
//   (e2)  |ref - delta_hat|^2_t = n E|ref - delta_next|^2_t
//         - n |ref - delta_k|^2_t + |ref - delta_k|^2_t,
//   (e3)  |delta_hat - delta_k|^2_t = n E|delta_next - delta_k|^2_t,
// where |x|^2_t = (1/tau)|x|^2. Enumerates all n realizations; true when all
// three hold to tol (absolute + relative).
using SeparableBlockFn = std::function<double(int, const Vector&)>;
bool verify_expectation_identities(const BlockVector& delta_k, const BlockVector& delta_hat,
                                   const SeparableBlockFn& r, const BlockVector& reference,
                                   double tau, double tol = 1e-12);

// Cross-term inequality behind the step-size rule: for any (w_next, w, w_prev,
// delta, delta_prev),
//   |<w - w_next, grad_w phi(w, delta) - q>|
//     <= kappa/sigma |w_next - w|^2 + kappa/(2 sigma) |w - w_prev|^2
//        + n kappa/(2 tau) |delta - delta_prev|^2
// with q the extrapolation term built from (w_prev, delta_prev, w, delta) and
// kappa = max{L12 sqrt(sigma tau n), L11 sigma}. Returns both sides.
struct CrossTermCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double slack = 1e-12) const { return lhs <= rhs + slack; }
};

CrossTermCheck verify_extrapolation_bound(const MinimaxProblem& problem, const Vector& w_next,
                                          const Vector& w, const Vector& w_prev,
                                          const BlockVector& delta, const BlockVector& delta_prev,
                                          double sigma, double tau);

// Telescoped step-energy budget for a deterministic (single-stream) trace:
//   c_w/2 sum_k |w^{k+1} - w^k|^2 / sigma + n c_d/2 sum_k |d^{k+1} - d^k|^2 / tau
//     <= 1/2 |w* - w^0|^2 / sigma + n/2 |d* - d^0|^2 / tau
// with c_w = 1 - 3 kappa - 3 rho (1/sigma + 4 L11^2 sigma) and
//      c_d = 1 - kappa - rho (1/tau + 12 n L12^2 tau).
// Requires admissible (sigma, tau, rho) and a known solution; throws otherwise.
struct BudgetCheck {
  double lhs = 0.0;     // weighted step energy
  double budget = 0.0;  // initial-distance budget
  double coeff_w = 0.0;
  double coeff_delta = 0.0;
  bool holds(double slack = 1e-12) const { return lhs <= budget + slack; }
};

BudgetCheck verify_step_budget(const Trace& trace, const SaddlePoint& solution,
                               const LipschitzConstants& lipschitz, int n, double sigma,
                               double tau, double rho);

// Convergence-order fits on trace metrics over the iteration window [k_lo, k_hi].
struct RateWindow {
  int k_lo = 0;
  int k_hi = 0;
};

// Sublinear: least-squares slopes of log residual_sq vs log k, both for the raw
// series and for its running average (the quantity the O(1/K) guarantee bounds).
// Linear: geometric decay estimates of dist_w_sq + dist_delta_sq; per-gap
// ratios are normalized per iteration.
struct RateFit {
  double slope_raw = 0.0;
  double slope_running_avg = 0.0;
  double ratio_overall = 0.0;
  double ratio_max = 0.0;
  int points = 0;
};

enum class RateMode { Sublinear, Linear };

RateFit fit_rate(const Trace& trace, RateMode mode, const RateWindow& window);

// Empirical Lipschitz estimates: max observed difference quotients of the two
// gradients over random point pairs in the domain. Lower bounds on the true
// constants; never exceeds them.
LipschitzConstants estimate_lipschitz(const MinimaxProblem& problem, const MviDomain& domain,
                                      long samples, Rng rng);

}  // namespace sihg
