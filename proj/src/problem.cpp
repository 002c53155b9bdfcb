#include "sihg/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace sihg {

Vector MinimaxProblem::grad_w_full(const Vector& w, const BlockVector& delta) const {
  Vector out = Vector::Zero(dim_w);
  for (int i = 0; i < n; ++i) out += grad_w_block(i, w, delta.block(i));
  return out;
}

BlockVector MinimaxProblem::grad_delta_full(const Vector& w, const BlockVector& delta) const {
  BlockVector out(block_dims);
  for (int i = 0; i < n; ++i) out.block(i) = grad_delta_block(i, w, delta.block(i));
  return out;
}

double MinimaxProblem::phi_value(const Vector& w, const BlockVector& delta) const {
  if (!value_block) throw std::invalid_argument("MinimaxProblem: no value oracle");
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += value_block(i, w, delta.block(i));
  return total;
}

bool MinimaxProblem::residual_supported() const {
  auto ok = [](const Regularizer& r) {
    return r.kind != Regularizer::Kind::Custom || static_cast<bool>(r.witness);
  };
  if (!ok(f)) return false;
  for (const auto& gi : g)
    if (!ok(gi)) return false;
  return true;
}

void MinimaxProblem::validate() const {
  if (n <= 0) throw std::invalid_argument("MinimaxProblem: n must be positive");
  if (dim_w <= 0) throw std::invalid_argument("MinimaxProblem: dim_w must be positive");
  if (static_cast<int>(block_dims.size()) != n)
    throw std::invalid_argument("MinimaxProblem: block_dims size must equal n");
  for (Index d : block_dims)
    if (d <= 0) throw std::invalid_argument("MinimaxProblem: block dims must be positive");
  if (static_cast<int>(g.size()) != n)
    throw std::invalid_argument("MinimaxProblem: need one g term per block");
  if (!f.prox) throw std::invalid_argument("MinimaxProblem: f has no prox");
  for (const auto& gi : g)
    if (!gi.prox) throw std::invalid_argument("MinimaxProblem: some g_i has no prox");
  if (!grad_w_block || !grad_delta_block)
    throw std::invalid_argument("MinimaxProblem: gradient oracles are required");
  if (!(lipschitz.L11 >= 0.0) || !(lipschitz.L12 >= 0.0) || !(lipschitz.L22 >= 0.0))
    throw std::invalid_argument("MinimaxProblem: Lipschitz constants must be nonnegative");
  if (known_solution) {
    if (known_solution->w.size() != dim_w || !known_solution->delta.same_shape(BlockVector(block_dims)))
      throw std::invalid_argument("MinimaxProblem: known_solution shape mismatch");
  }
}

void SolverConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("SolverConfig: sigma must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("SolverConfig: tau must be positive");
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw std::invalid_argument("SolverConfig: theta must be nonnegative");
  if (iterations < 0) throw std::invalid_argument("SolverConfig: iterations must be nonnegative");
  if (metric_stride <= 0) throw std::invalid_argument("SolverConfig: metric_stride must be positive");
  if (!(inner.tol > 0.0)) throw std::invalid_argument("SolverConfig: inner tol must be positive");
  if (inner.max_iter <= 0) throw std::invalid_argument("SolverConfig: inner max_iter must be positive");
  if (surrogate) {
    if (surrogate->steps <= 0) throw std::invalid_argument("SolverConfig: surrogate steps must be positive");
    if (surrogate->step_size < 0.0) throw std::invalid_argument("SolverConfig: surrogate step size must be >= 0");
  }
}

AdmissibilityReport validate_config(const MinimaxProblem& problem, const SolverConfig& config,
                                    double rho, double mu) {
  config.validate();
  if (rho < 0.0) throw std::invalid_argument("validate_config: rho must be >= 0");
  if (mu < 0.0) throw std::invalid_argument("validate_config: mu must be >= 0");

  const double n = static_cast<double>(problem.n);
  const double sigma = config.sigma;
  const double tau = config.tau;
  const double L11 = problem.lipschitz.L11;
  const double L12 = problem.lipschitz.L12;

  AdmissibilityReport report;
  report.kappa = std::max(L12 * std::sqrt(sigma * tau * n), L11 * sigma);

  const double drag_w = 1.0 / sigma + 4.0 * L11 * L11 * sigma;
  const double drag_delta = 1.0 / tau + 12.0 * n * L12 * L12 * tau;
  report.sublinear_bound_w = 1.0 / 3.0 - rho * drag_w;
  report.sublinear_bound_delta = 1.0 - rho * drag_delta;
  report.sublinear_ok =
      report.kappa < std::min(report.sublinear_bound_w, report.sublinear_bound_delta);
  report.rho_max = std::max(
      0.0, std::min((1.0 / 3.0 - report.kappa) / drag_w, (1.0 - report.kappa) / drag_delta));

  report.linear_ok = report.kappa <= 1.0 / 3.0;
  if (mu > 0.0) {
    report.linear_theta = std::max(1.0 / (1.0 + mu * sigma),
                                   (1.0 + (n - 1.0) * mu * tau / n) / (1.0 + mu * tau));
  } else {
    report.linear_theta = 1.0;
    report.linear_ok = false;
  }
  return report;
}

}  // namespace sihg
