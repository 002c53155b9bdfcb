#include "sihg/analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sihg {

ResidualBreakdown saddle_residual_sq(const MinimaxProblem& problem, const Vector& w,
                                     const BlockVector& delta) {
  ResidualBreakdown out;

  // w part: minimize |gamma_f + grad_w phi| over gamma_f in df(w), i.e. pick
  // the subgradient closest to -grad_w phi.
  const Vector grad_w = problem.grad_w_full(w, delta);
  out.witness_gamma_f = problem.f.closest_subgradient(w, -grad_w);
  out.w_part_sq = (out.witness_gamma_f + grad_w).squaredNorm();

  // delta part: per block, minimize |gamma_g - grad_d phi| over gamma_g in dg_i.
  out.witness_gamma_g = BlockVector(problem.block_dims);
  out.delta_part_sq = 0.0;
  for (int i = 0; i < problem.n; ++i) {
    const Vector grad_d = problem.grad_delta_block(i, w, delta.block(i));
    const Vector gamma = problem.g[i].closest_subgradient(delta.block(i), grad_d);
    out.witness_gamma_g.block(i) = gamma;
    out.delta_part_sq += (gamma - grad_d).squaredNorm();
  }

  out.total_sq = out.w_part_sq + out.delta_part_sq;
  return out;
}

BlockVector implicit_delta_full(const MinimaxProblem& problem, const Vector& w,
                                const BlockVector& delta_prev, double tau,
                                const InnerSolverConfig& inner) {
  // Stacked fixed point: blocks are separable given w, so one joint Picard /
  // accelerated solve on the flat vector is exactly the n per-block solves,
  // sharing a tolerance on the joint defect.
  ProxFn prox = [&](const Vector& z, double eta) {
    BlockVector zb(problem.block_dims, z);
    Vector out(z.size());
    Index at = 0;
    for (int i = 0; i < problem.n; ++i) {
      const Vector p = problem.g[i].prox(zb.block(i), eta);
      out.segment(at, p.size()) = p;
      at += p.size();
    }
    return out;
  };
  GradFn grad = [&](const Vector& u) {
    BlockVector ub(problem.block_dims, u);
    return problem.grad_delta_full(w, ub).flat();
  };
  ImplicitResult res =
      solve_implicit(prox, grad, delta_prev.flat(), tau, problem.lipschitz.L22, inner);
  return BlockVector(problem.block_dims, res.delta);
}

namespace {

struct StackedPoint {
  Vector w;
  BlockVector delta;
};

StackedPoint split_point(const MinimaxProblem& problem, const Vector& z) {
  StackedPoint p;
  p.w = z.head(problem.dim_w);
  p.delta = BlockVector(problem.block_dims, z.tail(z.size() - problem.dim_w));
  return p;
}

// Clamp the delta part of a sample into every box constraint so the
// subdifferential is nonempty there.
void clamp_feasible(const MinimaxProblem& problem, BlockVector& delta) {
  for (int i = 0; i < problem.n; ++i) {
    if (problem.g[i].kind == Regularizer::Kind::Box) {
      const double r = problem.g[i].param;
      delta.block(i) = delta.block(i).cwiseMax(-r).cwiseMin(r);
    }
  }
}

}  // namespace

MviReport check_mvi(const MinimaxProblem& problem, MviKind kind, double parameter,
                    const MviDomain& domain, MviSampler sampler, long samples, Rng rng) {
  if (!problem.known_solution)
    throw std::invalid_argument("check_mvi: problem has no known solution to anchor the inequality");
  if (parameter < 0.0) throw std::invalid_argument("check_mvi: parameter must be >= 0");
  if (kind == MviKind::Strong && parameter <= 0.0)
    throw std::invalid_argument("check_mvi: strong kind needs parameter > 0");
  const Index dim = problem.dim_w + BlockVector(problem.block_dims).dim();
  if (domain.lo.size() != dim || domain.hi.size() != dim)
    throw std::invalid_argument("check_mvi: domain must cover the stacked (w, delta) space");
  for (Index j = 0; j < dim; ++j)
    if (!(domain.lo[j] <= domain.hi[j]))
      throw std::invalid_argument("check_mvi: empty domain");

  const Vector star = [&] {
    Vector s(dim);
    s.head(problem.dim_w) = problem.known_solution->w;
    s.tail(dim - problem.dim_w) = problem.known_solution->delta.flat();
    return s;
  }();

  MviReport report;
  report.sampler = (sampler == MviSampler::Grid) ? "grid" : "uniform";
  report.min_margin = std::numeric_limits<double>::infinity();

  auto evaluate = [&](Vector z) {
    StackedPoint p = split_point(problem, z);
    clamp_feasible(problem, p.delta);
    z.head(problem.dim_w) = p.w;
    z.tail(dim - problem.dim_w) = p.delta.flat();

    const ResidualBreakdown rb = saddle_residual_sq(problem, p.w, p.delta);
    Vector f_op(dim);
    f_op.head(problem.dim_w) = rb.witness_gamma_f + problem.grad_w_full(p.w, p.delta);
    const BlockVector grad_d = problem.grad_delta_full(p.w, p.delta);
    f_op.tail(dim - problem.dim_w) = rb.witness_gamma_g.flat() - grad_d.flat();

    const double inner_prod = f_op.dot(z - star);
    const double margin = (kind == MviKind::Weak)
                              ? inner_prod + 0.5 * parameter * f_op.squaredNorm()
                              : inner_prod - 0.5 * parameter * (z - star).squaredNorm();
    ++report.samples;
    if (margin < report.min_margin) {
      report.min_margin = margin;
      report.argmin_point = z;
    }
  };

  if (sampler == MviSampler::Grid) {
    // 21 points per axis; practical only for a handful of dimensions.
    if (dim > 4) throw std::invalid_argument("check_mvi: grid sampler limited to dim <= 4");
    const int per_axis = 21;
    long total = 1;
    for (Index j = 0; j < dim; ++j) total *= per_axis;
    for (long idx = 0; idx < total; ++idx) {
      long rest = idx;
      Vector z(dim);
      for (Index j = 0; j < dim; ++j) {
        const int cell = static_cast<int>(rest % per_axis);
        rest /= per_axis;
        z[j] = domain.lo[j] + (domain.hi[j] - domain.lo[j]) * cell / double(per_axis - 1);
      }
      evaluate(z);
    }
  } else {
    if (samples <= 0) throw std::invalid_argument("check_mvi: samples must be positive");
    // Sharded draw streams: shard results do not depend on traversal order,
    // so the loop could be split across threads without changing the report.
    const long shard_size = 4096;
    for (long s = 0; s * shard_size < samples; ++s) {
      Rng shard = rng.split(static_cast<std::uint64_t>(s));
      const long in_shard = std::min(shard_size, samples - s * shard_size);
      for (long t = 0; t < in_shard; ++t) {
        Vector z(dim);
        for (Index j = 0; j < dim; ++j) z[j] = shard.next_in(domain.lo[j], domain.hi[j]);
        evaluate(z);
      }
    }
  }

  report.certified = report.min_margin >= -1e-9;
  return report;
}

bool verify_expectation_identities(const BlockVector& delta_k, const BlockVector& delta_hat,
                                   const SeparableBlockFn& r, const BlockVector& reference,
                                   double tau, double tol) {
  if (!delta_k.same_shape(delta_hat) || !delta_k.same_shape(reference))
    throw std::invalid_argument("verify_expectation_identities: shape mismatch");
  if (!(tau > 0.0)) throw std::invalid_argument("verify_expectation_identities: tau must be positive");
  const int n = delta_k.blocks();
  const double nd = static_cast<double>(n);

  auto close = [tol](double a, double b) {
    return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
  };

  auto r_total = [&](const BlockVector& d) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += r(i, d.block(i));
    return s;
  };
  auto dist_t = [&](const BlockVector& a, const BlockVector& b) {
    return (a.flat() - b.flat()).squaredNorm() / tau;
  };

  // Enumerate the n single-block replacements delta_next(i).
  double mean_r = 0.0, mean_dist_ref = 0.0, mean_dist_step = 0.0;
  for (int i = 0; i < n; ++i) {
    BlockVector next = delta_k;
    next.block(i) = delta_hat.block(i);
    mean_r += r_total(next);
    mean_dist_ref += dist_t(reference, next);
    mean_dist_step += dist_t(next, delta_k);
  }
  mean_r /= nd;
  mean_dist_ref /= nd;
  mean_dist_step /= nd;

  const bool e1 = close(r_total(delta_hat), mean_r + (nd - 1.0) * (mean_r - r_total(delta_k)));
  const bool e2 = close(dist_t(reference, delta_hat), nd * mean_dist_ref -
                                                          nd * dist_t(reference, delta_k) +
                                                          dist_t(reference, delta_k));
  const bool e3 = close(dist_t(delta_hat, delta_k), nd * mean_dist_step);
  return e1 && e2 && e3;
}

CrossTermCheck verify_extrapolation_bound(const MinimaxProblem& problem, const Vector& w_next,
                                          const Vector& w, const Vector& w_prev,
                                          const BlockVector& delta, const BlockVector& delta_prev,
                                          double sigma, double tau) {
  if (!(sigma > 0.0) || !(tau > 0.0))
    throw std::invalid_argument("verify_extrapolation_bound: steps must be positive");
  const double n = static_cast<double>(problem.n);
  const double kappa = std::max(problem.lipschitz.L12 * std::sqrt(sigma * tau * n),
                                problem.lipschitz.L11 * sigma);

  // q from the history quadruple, exactly the solver's extrapolation term.
  const Vector grad_cur = problem.grad_w_full(w, delta);
  const Vector grad_hist = problem.grad_w_full(w_prev, delta_prev);
  const Vector grad_cross = problem.grad_w_full(w, delta_prev);
  const Vector q = grad_hist - (n - 1.0) * (grad_cur - grad_cross);

  CrossTermCheck check;
  check.lhs = std::abs((w - w_next).dot(grad_cur - q));
  check.rhs = kappa / sigma * (w_next - w).squaredNorm() +
              0.5 * kappa / sigma * (w - w_prev).squaredNorm() +
              0.5 * n * kappa / tau * (delta.flat() - delta_prev.flat()).squaredNorm();
  return check;
}

BudgetCheck verify_step_budget(const Trace& trace, const SaddlePoint& solution,
                               const LipschitzConstants& lipschitz, int n, double sigma,
                               double tau, double rho) {
  if (!(sigma > 0.0) || !(tau > 0.0) || rho < 0.0)
    throw std::invalid_argument("verify_step_budget: bad step or rho");
  if (trace.rows.empty()) throw std::invalid_argument("verify_step_budget: empty trace");

  const double nd = static_cast<double>(n);
  const double kappa =
      std::max(lipschitz.L12 * std::sqrt(sigma * tau * nd), lipschitz.L11 * sigma);
  BudgetCheck check;
  check.coeff_w = 1.0 - 3.0 * kappa - 3.0 * rho * (1.0 / sigma + 4.0 * lipschitz.L11 * lipschitz.L11 * sigma);
  check.coeff_delta = 1.0 - kappa - rho * (1.0 / tau + 12.0 * nd * lipschitz.L12 * lipschitz.L12 * tau);
  if (check.coeff_w <= 0.0 || check.coeff_delta <= 0.0)
    throw std::invalid_argument("verify_step_budget: steps inadmissible at this rho");

  double energy_w = 0.0, energy_delta = 0.0;
  for (const TraceRow& row : trace.rows) {
    energy_w += row.step_w_sq;
    energy_delta += row.step_delta_sq;
  }
  check.lhs = 0.5 * check.coeff_w * energy_w / sigma + 0.5 * nd * check.coeff_delta * energy_delta / tau;

  if (trace.w_start.size() == 0)
    throw std::invalid_argument("verify_step_budget: trace carries no start point");
  check.budget = 0.5 * (solution.w - trace.w_start).squaredNorm() / sigma +
                 0.5 * nd * (solution.delta.flat() - trace.delta_start.flat()).squaredNorm() / tau;
  return check;
}

RateFit fit_rate(const Trace& trace, RateMode mode, const RateWindow& window) {
  if (window.k_lo > window.k_hi) throw std::invalid_argument("fit_rate: empty window");
  RateFit fit;

  if (mode == RateMode::Sublinear) {
    // Running average over all metric points up to k, restricted to the window
    // for the fit itself.
    std::vector<double> log_k, log_raw, log_avg;
    double sum = 0.0;
    long count = 0;
    for (const TraceRow& row : trace.rows) {
      if (!row.residual_sq || row.k <= 0) continue;
      sum += *row.residual_sq;
      ++count;
      if (row.k < window.k_lo || row.k > window.k_hi) continue;
      if (*row.residual_sq <= 0.0 || sum <= 0.0) continue;  // log undefined; skip
      log_k.push_back(std::log(static_cast<double>(row.k)));
      log_raw.push_back(std::log(*row.residual_sq));
      log_avg.push_back(std::log(sum / static_cast<double>(count)));
    }
    if (log_k.size() < 3)
      throw std::invalid_argument("fit_rate: need at least 3 metric points in window");
    fit.points = static_cast<int>(log_k.size());

    auto slope = [&](const std::vector<double>& ys) {
      const double m = static_cast<double>(log_k.size());
      double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
      for (std::size_t j = 0; j < log_k.size(); ++j) {
        sx += log_k[j];
        sy += ys[j];
        sxx += log_k[j] * log_k[j];
        sxy += log_k[j] * ys[j];
      }
      const double denom = m * sxx - sx * sx;
      if (denom == 0.0) throw std::invalid_argument("fit_rate: degenerate abscissa");
      return (m * sxy - sx * sy) / denom;
    };
    fit.slope_raw = slope(log_raw);
    fit.slope_running_avg = slope(log_avg);
    return fit;
  }

  // Linear mode: geometric decay of the distance sum.
  std::vector<std::pair<int, double>> dist;
  for (const TraceRow& row : trace.rows) {
    if (!row.dist_w_sq || !row.dist_delta_sq) continue;
    if (row.k < window.k_lo || row.k > window.k_hi) continue;
    const double d = *row.dist_w_sq + *row.dist_delta_sq;
    if (d > 0.0) dist.emplace_back(row.k, d);
  }
  if (dist.size() < 2) throw std::invalid_argument("fit_rate: need at least 2 metric points in window");
  fit.points = static_cast<int>(dist.size());

  fit.ratio_max = 0.0;
  for (std::size_t j = 1; j < dist.size(); ++j) {
    const double gap = static_cast<double>(dist[j].first - dist[j - 1].first);
    const double ratio = std::pow(dist[j].second / dist[j - 1].second, 1.0 / gap);
    fit.ratio_max = std::max(fit.ratio_max, ratio);
  }
  const double span = static_cast<double>(dist.back().first - dist.front().first);
  fit.ratio_overall = std::pow(dist.back().second / dist.front().second, 1.0 / span);
  return fit;
}

LipschitzConstants estimate_lipschitz(const MinimaxProblem& problem, const MviDomain& domain,
                                      long samples, Rng rng) {
  const Index dim = problem.dim_w + BlockVector(problem.block_dims).dim();
  if (domain.lo.size() != dim || domain.hi.size() != dim)
    throw std::invalid_argument("estimate_lipschitz: domain must cover the stacked space");
  if (samples <= 0) throw std::invalid_argument("estimate_lipschitz: samples must be positive");

  auto draw = [&](Rng& r) {
    Vector z(dim);
    for (Index j = 0; j < dim; ++j) z[j] = r.next_in(domain.lo[j], domain.hi[j]);
    return split_point(problem, z);
  };

  LipschitzConstants est;
  for (long s = 0; s < samples; ++s) {
    StackedPoint a = draw(rng);
    StackedPoint b = draw(rng);

    // Vary w at fixed delta: quotients for L11 (w-gradient) and L12 (delta-gradient).
    const double dw = (a.w - b.w).norm();
    if (dw > 1e-12) {
      est.L11 = std::max(est.L11, (problem.grad_w_full(a.w, a.delta) -
                                   problem.grad_w_full(b.w, a.delta)).norm() / dw);
      est.L12 = std::max(est.L12, (problem.grad_delta_full(a.w, a.delta).flat() -
                                   problem.grad_delta_full(b.w, a.delta).flat()).norm() / dw);
    }
    // Vary delta at fixed w: quotients for L22 and the other L12 inequality.
    const double dd = (a.delta.flat() - b.delta.flat()).norm();
    if (dd > 1e-12) {
      est.L22 = std::max(est.L22, (problem.grad_delta_full(a.w, a.delta).flat() -
                                   problem.grad_delta_full(a.w, b.delta).flat()).norm() / dd);
      est.L12 = std::max(est.L12, (problem.grad_w_full(a.w, a.delta) -
                                   problem.grad_w_full(a.w, b.delta)).norm() / dd);
    }
  }
  return est;
}

}  // namespace sihg
