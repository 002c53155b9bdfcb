#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sihg/analysis.hpp"
#include "sihg/block_vector.hpp"
#include "sihg/problem.hpp"
#include "sihg/trace.hpp"

namespace sihg {

// Shared iteration scheme: alternate a prox step on w along the extrapolated
// coupling gradient with an implicit (backward) prox-ascent step on delta.
// The three entry points differ in how much of delta moves per iteration:
//   ssihg_run  - one uniformly drawn block per iteration (stochastic),
//   dsihg_run  - all of delta as a single block (deterministic, n forced to 1),
//   msihg_run  - one epoch sweeps all blocks in a freshly shuffled order.
//
// Stopping is by iteration budget only; step sizes stay constant. Residual
// metrics land in the trace every metric_stride iterations.

Trace ssihg_run(const MinimaxProblem& problem, const SolverConfig& config);
Trace ssihg_run(const MinimaxProblem& problem, const SolverConfig& config, const Vector& w0,
                const BlockVector& delta0);

Trace dsihg_run(const MinimaxProblem& problem, const SolverConfig& config);
Trace dsihg_run(const MinimaxProblem& problem, const SolverConfig& config, const Vector& w0,
                const BlockVector& delta0);

// Per-block update notification for the epoch solvers; delta_anchor is the
// pre-update block value that the surrogate's travel band is anchored at.
struct BlockStepInfo {
  int epoch = 0;
  int position = 0;  // 0-based position within the shuffled epoch order
  int block = 0;
  const Vector& delta_anchor;
  const Vector& delta_after;
};
using BlockStepObserver = std::function<void(const BlockStepInfo&)>;

// Epoch solver: per epoch, shuffle the block order, then for each block run
// the implicit ascent step (exact inner solve, or the sign-ascent surrogate
// when config.surrogate is set and the block's g is a box) followed by one w
// step along 2 * (current block gradient) - (previous block gradient). The
// previous-gradient term carries across epoch boundaries; the very first step
// seeds it with the first block's gradient at the start point.
// Trace rows are per epoch.
Trace msihg_run(const MinimaxProblem& problem, const SolverConfig& config);
Trace msihg_run(const MinimaxProblem& problem, const SolverConfig& config, const Vector& w0,
                const BlockVector& delta0, const BlockStepObserver& observer = {});

// Same scheme with the w direction fed through heavy-ball smoothing:
// v <- momentum * v + direction, w <- w - sigma * v. momentum = 0 reproduces
// msihg_run exactly.
Trace msihg_gd_run(const MinimaxProblem& problem, const SolverConfig& config, double momentum);
Trace msihg_gd_run(const MinimaxProblem& problem, const SolverConfig& config, double momentum,
                   const Vector& w0, const BlockVector& delta0,
                   const BlockStepObserver& observer = {});

// Explicit primal-dual reference for bilinear couplings phi_i = <A_i w, d_i>.
// Same draws, same update order as ssihg_run; the implicit delta step is
// closed-form here, and the extrapolation term is maintained through A^T
// bookkeeping rather than gradient oracles. Used as the equivalence oracle.
struct BilinearSpec {
  std::vector<Matrix> blocks;  // A_i, each d_i x m
  Regularizer f;
  std::vector<Regularizer> g;
};

Trace spdhg_bilinear_run(const BilinearSpec& spec, const SolverConfig& config);
Trace spdhg_bilinear_run(const BilinearSpec& spec, const SolverConfig& config, const Vector& w0,
                         const BlockVector& delta0);

// Multi-step gradient descent-ascent baseline (the forward adversarial
// training scheme): each iteration re-initializes every delta block uniformly
// in its box, runs inner_steps projected sign-ascent steps per block, then
// takes one prox step on w along the full coupling gradient. Requires box g.
// eta = 2.5 * radius / inner_steps unless overridden (> 0).
Trace mgda_baseline_run(const MinimaxProblem& problem, const SolverConfig& config, int inner_steps,
                        double eta = 0.0);
Trace mgda_baseline_run(const MinimaxProblem& problem, const SolverConfig& config, int inner_steps,
                        double eta, const Vector& w0, const BlockVector& delta0);

}  // namespace sihg
