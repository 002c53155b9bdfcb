#pragma once

#include <vector>

#include "sihg/block_vector.hpp"
#include "sihg/mlp.hpp"
#include "sihg/problem.hpp"
#include "sihg/rng.hpp"

namespace sihg {

// Small analytic problem families with exact constants and known solutions.
// All of them fill value_block, so finite-difference gradient checks apply.

// Optional convex terms around a coupling. Quadratic keeps the saddle at the
// origin for the families below.
struct TermSpec {
  enum class Kind { Zero, Quadratic, Box };
  Kind kind = Kind::Zero;
  double param = 0.0;  // lambda or radius
  Regularizer build() const;
};

// phi(w, d) = <A w, d> as one block. L11 = 0, L12 = |A|_2 (power iteration,
// tolerance 1e-10), L22 = 0. Saddle at the origin when f, g are zero or
// quadratic.
MinimaxProblem make_bilinear(const Matrix& a, const TermSpec& f_term, const TermSpec& g_term);

// phi_i(w, d_i) = <A_i w, d_i>, one term per block, f = g_i = zero by default.
// The stochastic-solver reduction target.
MinimaxProblem make_block_bilinear(const std::vector<Matrix>& blocks,
                                   const TermSpec& f_term = {}, const TermSpec& g_term = {});

// phi(w, d) = (a/2)|w|^2 + b <w, d> - (c/2)|d|^2 on R^dim x R^dim, f = g = 0.
// <F(z), z> = a|w|^2 + c|d|^2, so the origin saddle satisfies the strong
// inequality with mu <= 2 min(a, c) when a, c > 0; with a < 0 the game is
// nonconvex in w and only a weak parameter rho can hold.
// L11 = |a|, L12 = |b|, L22 = |c|.
MinimaxProblem make_quadratic_game(double a, double b, double c, Index dim);

// n-block version on w in R^{n*block_dim}: phi_i = (a/(2n))|w|^2
// + b <w_i, d_i> - (c/2)|d_i|^2 with w_i the i-th coordinate slice. Same
// <F(z), z> identity and constants L11 = |a|, L12 = |b|, L22 = |c|.
MinimaxProblem make_block_quadratic_game(double a, double b, double c, int n, Index block_dim);

// Ratio of the worst violation of plain monotonicity to the operator energy:
// the smallest rho for which the weak inequality can hold for the quadratic
// game, found by a fine sweep over directions (the margin is scale-invariant).
double quadratic_game_min_rho(double a, double b, double c);

// Adversarial training as the separable template: w is the flat network
// parameter vector, block i holds the flattened perturbation of batch i,
// phi_i = (1/n) * mean batch loss at the perturbed inputs, g_i = box(eps).
// The dataset is cut into n equal contiguous batches (make_blobs interleaves
// the classes, so these stay balanced). Lipschitz constants are sampled
// estimates, not certified bounds.
MinimaxProblem make_toy_at(const ToyDataset& data, const MlpShape& net, double eps, int n = 10);

}  // namespace sihg
