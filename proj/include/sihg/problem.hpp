#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sihg/block_vector.hpp"
#include "sihg/prox.hpp"

namespace sihg {

// Smoothness constants of the coupling phi in the two variables:
//   |grad_w phi(w,d) - grad_w phi(wb,d)|  <= L11 |w - wb|
//   |grad_d phi(w,d) - grad_d phi(wb,d)|  <= L12 |w - wb|
//   |grad_w phi(w,d) - grad_w phi(w,db)|  <= L12 |d - db|
//   |grad_d phi(w,d) - grad_d phi(w,db)|  <= L22 |d - db|
struct LipschitzConstants {
  double L11 = 0.0;
  double L12 = 0.0;
  double L22 = 0.0;
  double max() const { return std::max(L11, std::max(L12, L22)); }
};

struct SaddlePoint {
  Vector w;
  BlockVector delta;
};

// min_w max_d  f(w) + sum_i phi_i(w, d_i) - sum_i g_i(d_i)
// with f, g_i convex (prox-friendly) and phi smooth but otherwise arbitrary.
//
// Oracles take the block index first; grad_w_block returns a full length-m
// vector (block i's contribution to grad_w phi), grad_delta_block a length-d_i
// vector. value_block is optional and only needed by finite-difference checks
// and inner solvers that monitor objectives.
struct MinimaxProblem {
  int n = 1;
  Index dim_w = 0;
  std::vector<Index> block_dims;

  Regularizer f;
  std::vector<Regularizer> g;

  std::function<Vector(int, const Vector&, const Vector&)> grad_w_block;
  std::function<Vector(int, const Vector&, const Vector&)> grad_delta_block;
  std::function<double(int, const Vector&, const Vector&)> value_block;  // may be empty

  LipschitzConstants lipschitz;
  std::optional<SaddlePoint> known_solution;

  Vector grad_w_full(const Vector& w, const BlockVector& delta) const;
  BlockVector grad_delta_full(const Vector& w, const BlockVector& delta) const;
  double phi_value(const Vector& w, const BlockVector& delta) const;

  BlockVector zero_delta() const { return BlockVector(block_dims); }
  Vector zero_w() const { return Vector::Zero(dim_w); }

  // True when every term can produce a subgradient witness, i.e. the saddle
  // residual is computable.
  bool residual_supported() const;

  // Shape and oracle sanity; throws std::invalid_argument on violations.
  void validate() const;
};

struct InnerSolverConfig {
  enum class Method { FixedPoint, AcceleratedProximal };
  Method method = Method::FixedPoint;
  double tol = 1e-9;
  int max_iter = 1000;
  bool record_defects = false;  // keep the per-iteration defect sequence
};

// Sign-ascent surrogate for the implicit delta step (adversarial-training
// path). step_size == 0 means the 2.5 * radius / steps rule.
struct PgdSurrogateConfig {
  int steps = 5;
  double step_size = 0.0;
};

struct SolverConfig {
  double sigma = 0.1;
  double tau = 0.1;
  double theta = 1.0;
  int iterations = 100;
  std::uint64_t seed = 0;
  int metric_stride = 10;
  InnerSolverConfig inner;
  std::optional<PgdSurrogateConfig> surrogate;

  // Keep per-iteration iterate copies in the trace (small problems only).
  bool record_iterates = false;

  void validate() const;
};

// Step-size admissibility against the two convergence regimes.
//
// kappa = max{ L12 sqrt(sigma tau n), L11 sigma }.
// Sublinear regime (weak-MVI parameter rho >= 0):
//   ok iff kappa < min{ 1/3 - rho (1/sigma + 4 L11^2 sigma),
//                       1   - rho (1/tau   + 12 n L12^2 tau) }.
// Linear regime (strong-MVI parameter mu > 0):
//   ok iff kappa <= 1/3; contraction factor
//   theta = max{ 1/(1 + mu sigma), (1 + (n-1) mu tau / n) / (1 + mu tau) }.
struct AdmissibilityReport {
  double kappa = 0.0;
  double sublinear_bound_w = 0.0;      // 1/3 - rho (1/sigma + 4 L11^2 sigma)
  double sublinear_bound_delta = 0.0;  // 1 - rho (1/tau + 12 n L12^2 tau)
  bool sublinear_ok = false;
  double rho_max = 0.0;                // sup of admissible rho at these steps
  double linear_theta = 1.0;
  bool linear_ok = false;
};

AdmissibilityReport validate_config(const MinimaxProblem& problem, const SolverConfig& config,
                                    double rho = 0.0, double mu = 0.0);

}  // namespace sihg
