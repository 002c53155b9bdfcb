#include "sihg/solvers.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sihg {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

void check_start(const MinimaxProblem& problem, const Vector& w0, const BlockVector& delta0) {
  if (w0.size() != problem.dim_w)
    throw std::invalid_argument("solver: start w has wrong dimension");
  if (!delta0.same_shape(BlockVector(problem.block_dims)))
    throw std::invalid_argument("solver: start delta has wrong block shape");
}

// Shared per-row bookkeeping. Residuals are computed only at metric-stride
// rows and only when the problem's terms can produce subgradient witnesses;
// distances require a known solution.
struct Recorder {
  const MinimaxProblem* problem = nullptr;
  const SolverConfig* config = nullptr;
  Clock::time_point start = Clock::now();
  bool residuals = false;

  Recorder(const MinimaxProblem& p, const SolverConfig& c)
      : problem(&p), config(&c), residuals(p.residual_supported()) {}

  // delta_prev: previous-iterate delta, used for the full implicit measurement
  // point in stochastic runs; pass nullptr to measure at (w, delta) only.
  void row(Trace& trace, int k, const Vector& w, const BlockVector& delta,
           const BlockVector* delta_prev, double step_w_sq, double step_delta_sq) const {
    TraceRow r;
    r.k = k;
    r.step_w_sq = step_w_sq;
    r.step_delta_sq = step_delta_sq;
    if (residuals && k % config->metric_stride == 0) {
      if (delta_prev != nullptr) {
        const BlockVector hat =
            implicit_delta_full(*problem, w, *delta_prev, config->tau, config->inner);
        r.residual_sq = saddle_residual_sq(*problem, w, hat).total_sq;
        r.residual_iterate_sq = saddle_residual_sq(*problem, w, delta).total_sq;
      } else {
        r.residual_sq = saddle_residual_sq(*problem, w, delta).total_sq;
      }
    }
    if (problem->known_solution) {
      r.dist_w_sq = (w - problem->known_solution->w).squaredNorm();
      r.dist_delta_sq = (delta.flat() - problem->known_solution->delta.flat()).squaredNorm();
    }
    r.elapsed_ns = ns_since(start);
    trace.rows.push_back(std::move(r));
  }
};

Trace make_trace(const char* name, const MinimaxProblem& problem, const SolverConfig& config,
                 const Vector& w0, const BlockVector& delta0) {
  problem.validate();
  config.validate();
  check_start(problem, w0, delta0);
  Trace trace;
  trace.solver_name = name;
  trace.seed = config.seed;
  trace.config_echo = config;
  trace.w_start = w0;
  trace.delta_start = delta0;
  trace.final_state.w = w0;
  trace.final_state.w_prev = w0;
  trace.final_state.delta = delta0;
  trace.final_state.delta_prev = delta0;
  trace.final_state.k = 0;
  trace.final_state.rng = Rng(config.seed);
  trace.final_state.seed = config.seed;
  return trace;
}

void push_history(Trace& trace, const SolverState& s) {
  if (!trace.config_echo.record_iterates) return;
  trace.w_history.push_back(s.w);
  trace.delta_history.push_back(s.delta);
}

// Fisher-Yates with the trace's own stream; identity when n <= 1.
std::vector<int> shuffled_order(int n, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int j = n - 1; j >= 1; --j)
    std::swap(order[static_cast<std::size_t>(j)],
              order[rng.next_below(static_cast<std::uint32_t>(j + 1))]);
  return order;
}

}  // namespace

Trace ssihg_run(const MinimaxProblem& problem, const SolverConfig& config) {
  return ssihg_run(problem, config, problem.zero_w(), problem.zero_delta());
}

Trace ssihg_run(const MinimaxProblem& problem, const SolverConfig& config, const Vector& w0,
                const BlockVector& delta0) {
  Trace trace = make_trace("ssihg", problem, config, w0, delta0);
  Recorder rec(problem, config);
  SolverState& s = trace.final_state;
  const double n = static_cast<double>(problem.n);
  const double sigma = config.sigma;
  const double tau = config.tau;

  // Start-point convention: the extrapolation at k = 0 collapses to the plain
  // gradient because the fictitious previous iterate equals the start.
  Vector grad_cur = problem.grad_w_full(s.w, s.delta);
  s.q = grad_cur;

  push_history(trace, s);
  rec.row(trace, 0, s.w, s.delta, &s.delta_prev, 0.0, 0.0);

  for (int k = 0; k < config.iterations; ++k) {
    if (config.record_iterates) trace.q_history.push_back(s.q);

    const Vector w_next =
        problem.f.prox(s.w - sigma * (grad_cur + config.theta * (grad_cur - s.q)), sigma);

    const int i = static_cast<int>(s.rng.next_below(static_cast<std::uint32_t>(problem.n)));
    GradFn grad_i = [&](const Vector& u) { return problem.grad_delta_block(i, w_next, u); };
    ImplicitResult step;
    try {
      step = solve_implicit(problem.g[static_cast<std::size_t>(i)].prox, grad_i,
                            Vector(s.delta.block(i)), tau, problem.lipschitz.L22, config.inner);
    } catch (const InnerSolveError& e) {
      throw InnerSolveError("ssihg_run: implicit step failed at iteration " + std::to_string(k) +
                                ": " + e.what(),
                            e.iterations, e.defect);
    }

    s.w_prev = s.w;
    s.delta_prev = s.delta;
    s.w = w_next;
    s.delta.block(i) = step.delta;
    s.k = k + 1;

    // Refresh the extrapolation term for the next update; grad_cur and the
    // cross evaluation make it recomputable from (w_prev, delta_prev, w, delta).
    const Vector grad_hist = grad_cur;
    grad_cur = problem.grad_w_full(s.w, s.delta);
    const Vector grad_cross = problem.grad_w_full(s.w, s.delta_prev);
    s.q = grad_hist - (n - 1.0) * (grad_cur - grad_cross);

    push_history(trace, s);
    rec.row(trace, s.k, s.w, s.delta, &s.delta_prev, (s.w - s.w_prev).squaredNorm(),
            (s.delta.flat() - s.delta_prev.flat()).squaredNorm());
  }
  return trace;
}

Trace dsihg_run(const MinimaxProblem& problem, const SolverConfig& config) {
  return dsihg_run(problem, config, problem.zero_w(), problem.zero_delta());
}

Trace dsihg_run(const MinimaxProblem& problem, const SolverConfig& config, const Vector& w0,
                const BlockVector& delta0) {
  Trace trace = make_trace("dsihg", problem, config, w0, delta0);
  Recorder rec(problem, config);
  SolverState& s = trace.final_state;
  const double sigma = config.sigma;

  // Deterministic variant: all of delta moves each iteration (one block), the
  // extrapolation term is simply the previous iterate's gradient, and no
  // random draws are consumed. Residuals are measured at the iterate, which
  // is exactly the full implicit point here.
  Vector grad_cur = problem.grad_w_full(s.w, s.delta);
  s.q = grad_cur;

  push_history(trace, s);
  rec.row(trace, 0, s.w, s.delta, nullptr, 0.0, 0.0);

  for (int k = 0; k < config.iterations; ++k) {
    if (config.record_iterates) trace.q_history.push_back(s.q);

    const Vector w_next =
        problem.f.prox(s.w - sigma * (grad_cur + config.theta * (grad_cur - s.q)), sigma);

    BlockVector delta_next;
    try {
      delta_next = implicit_delta_full(problem, w_next, s.delta, config.tau, config.inner);
    } catch (const InnerSolveError& e) {
      throw InnerSolveError("dsihg_run: implicit step failed at iteration " + std::to_string(k) +
                                ": " + e.what(),
                            e.iterations, e.defect);
    }

    s.w_prev = s.w;
    s.delta_prev = s.delta;
    s.w = w_next;
    s.delta = delta_next;
    s.k = k + 1;

    s.q = grad_cur;  // gradient at (w_prev, delta_prev)
    grad_cur = problem.grad_w_full(s.w, s.delta);

    push_history(trace, s);
    rec.row(trace, s.k, s.w, s.delta, nullptr, (s.w - s.w_prev).squaredNorm(),
            (s.delta.flat() - s.delta_prev.flat()).squaredNorm());
  }
  return trace;
}

namespace {

Trace epoch_solver_run(const char* name, const MinimaxProblem& problem, const SolverConfig& config,
                       double momentum, const Vector& w0, const BlockVector& delta0,
                       const BlockStepObserver& observer) {
  Trace trace = make_trace(name, problem, config, w0, delta0);
  Recorder rec(problem, config);
  SolverState& s = trace.final_state;
  const double sigma = config.sigma;
  const double tau = config.tau;

  if (config.surrogate) {
    for (const auto& gi : problem.g)
      if (gi.kind != Regularizer::Kind::Box)
        throw std::invalid_argument(std::string(name) +
                                    ": surrogate delta step needs box constraints on every block");
  }

  push_history(trace, s);
  rec.row(trace, 0, s.w, s.delta, nullptr, 0.0, 0.0);

  // prev_grad is the previous processed block's w-gradient, evaluated where
  // its own doubled term was; it survives epoch boundaries. The very first
  // step seeds it at the start point so the leading direction is gradient-like.
  Vector prev_grad;
  Vector velocity = Vector::Zero(problem.dim_w);

  for (int epoch = 0; epoch < config.iterations; ++epoch) {
    const Vector w_epoch_start = s.w;
    const BlockVector delta_epoch_start = s.delta;
    const std::vector<int> order = shuffled_order(problem.n, s.rng);

    for (int pos = 0; pos < problem.n; ++pos) {
      const int i = order[static_cast<std::size_t>(pos)];
      const Vector anchor = s.delta.block(i);
      if (epoch == 0 && pos == 0) prev_grad = problem.grad_w_block(i, s.w, anchor);

      GradFn grad_i = [&](const Vector& u) { return problem.grad_delta_block(i, s.w, u); };
      Vector updated;
      if (config.surrogate) {
        updated = pgd_surrogate_step(grad_i, anchor, problem.g[static_cast<std::size_t>(i)].param,
                                     tau, config.surrogate->steps, config.surrogate->step_size,
                                     s.rng);
      } else {
        try {
          updated = solve_implicit(problem.g[static_cast<std::size_t>(i)].prox, grad_i, anchor,
                                   tau, problem.lipschitz.L22, config.inner)
                        .delta;
        } catch (const InnerSolveError& e) {
          throw InnerSolveError(std::string(name) + ": implicit step failed at epoch " +
                                    std::to_string(epoch) + " block " + std::to_string(i) + ": " +
                                    e.what(),
                                e.iterations, e.defect);
        }
      }
      s.delta.block(i) = updated;
      if (observer) observer(BlockStepInfo{epoch, pos, i, anchor, updated});

      const Vector grad_here = problem.grad_w_block(i, s.w, s.delta.block(i));
      const Vector direction = 2.0 * grad_here - prev_grad;
      velocity = momentum * velocity + direction;
      s.w = problem.f.prox(s.w - sigma * velocity, sigma);
      prev_grad = grad_here;
    }

    s.w_prev = w_epoch_start;
    s.delta_prev = delta_epoch_start;
    s.k = epoch + 1;
    s.q = prev_grad;  // last combined-step gradient; epoch solvers have no line-3 term

    push_history(trace, s);
    rec.row(trace, s.k, s.w, s.delta, nullptr, (s.w - w_epoch_start).squaredNorm(),
            (s.delta.flat() - delta_epoch_start.flat()).squaredNorm());
  }
  return trace;
}

}  // namespace

Trace msihg_run(const MinimaxProblem& problem, const SolverConfig& config) {
  return msihg_run(problem, config, problem.zero_w(), problem.zero_delta());
}

Trace msihg_run(const MinimaxProblem& problem, const SolverConfig& config, const Vector& w0,
                const BlockVector& delta0, const BlockStepObserver& observer) {
  return epoch_solver_run("msihg", problem, config, 0.0, w0, delta0, observer);
}

Trace msihg_gd_run(const MinimaxProblem& problem, const SolverConfig& config, double momentum) {
  return msihg_gd_run(problem, config, momentum, problem.zero_w(), problem.zero_delta());
}

Trace msihg_gd_run(const MinimaxProblem& problem, const SolverConfig& config, double momentum,
                   const Vector& w0, const BlockVector& delta0, const BlockStepObserver& observer) {
  if (!(momentum >= 0.0) || momentum >= 1.0)
    throw std::invalid_argument("msihg_gd_run: momentum must be in [0, 1)");
  return epoch_solver_run("msihg_gd", problem, config, momentum, w0, delta0, observer);
}

namespace {

MinimaxProblem problem_from_bilinear(const BilinearSpec& spec) {
  if (spec.blocks.empty()) throw std::invalid_argument("spdhg_bilinear_run: no blocks");
  MinimaxProblem p;
  p.n = static_cast<int>(spec.blocks.size());
  p.dim_w = spec.blocks.front().cols();
  for (const Matrix& a : spec.blocks) {
    if (a.cols() != p.dim_w)
      throw std::invalid_argument("spdhg_bilinear_run: inconsistent block widths");
    p.block_dims.push_back(a.rows());
  }
  p.f = spec.f;
  p.g = spec.g;
  const std::vector<Matrix> blocks = spec.blocks;  // closures own a copy
  p.grad_w_block = [blocks](int i, const Vector&, const Vector& di) {
    return Vector(blocks[static_cast<std::size_t>(i)].transpose() * di);
  };
  p.grad_delta_block = [blocks](int i, const Vector& w, const Vector&) {
    return Vector(blocks[static_cast<std::size_t>(i)] * w);
  };
  return p;
}

}  // namespace

Trace spdhg_bilinear_run(const BilinearSpec& spec, const SolverConfig& config) {
  MinimaxProblem shape = problem_from_bilinear(spec);
  return spdhg_bilinear_run(spec, config, shape.zero_w(), shape.zero_delta());
}

Trace spdhg_bilinear_run(const BilinearSpec& spec, const SolverConfig& config, const Vector& w0,
                         const BlockVector& delta0) {
  // Explicit path: prox steps against A^T delta and A w directly, extrapolation
  // maintained with a single-block correction. No gradient oracles, no inner
  // solver; this is the reference the implicit machinery must collapse to on
  // bilinear problems.
  MinimaxProblem metrics_problem = problem_from_bilinear(spec);
  Trace trace = make_trace("spdhg_bilinear", metrics_problem, config, w0, delta0);
  Recorder rec(metrics_problem, config);
  SolverState& s = trace.final_state;
  const double n = static_cast<double>(metrics_problem.n);
  const double sigma = config.sigma;
  const double tau = config.tau;

  auto at_full = [&](const BlockVector& delta) {
    Vector out = Vector::Zero(metrics_problem.dim_w);
    for (int i = 0; i < metrics_problem.n; ++i)
      out += spec.blocks[static_cast<std::size_t>(i)].transpose() * delta.block(i);
    return out;
  };

  Vector at_cur = at_full(s.delta);  // A^T delta^k
  s.q = at_cur;

  push_history(trace, s);
  rec.row(trace, 0, s.w, s.delta, nullptr, 0.0, 0.0);

  for (int k = 0; k < config.iterations; ++k) {
    if (config.record_iterates) trace.q_history.push_back(s.q);

    const Vector w_next =
        spec.f.prox(s.w - sigma * (at_cur + config.theta * (at_cur - s.q)), sigma);

    const int i = static_cast<int>(s.rng.next_below(static_cast<std::uint32_t>(metrics_problem.n)));
    const Vector delta_i_new =
        spec.g[static_cast<std::size_t>(i)].prox(
            Vector(s.delta.block(i)) + tau * (spec.blocks[static_cast<std::size_t>(i)] * w_next),
            tau);

    s.w_prev = s.w;
    s.delta_prev = s.delta;
    s.w = w_next;
    const Vector changed = delta_i_new - s.delta.block(i);
    s.delta.block(i) = delta_i_new;
    s.k = k + 1;

    // Only block i moved, so A^T delta^{k+1} - A^T delta^k is one product.
    const Vector at_hist = at_cur;
    at_cur += spec.blocks[static_cast<std::size_t>(i)].transpose() * changed;
    s.q = at_hist - (n - 1.0) * (spec.blocks[static_cast<std::size_t>(i)].transpose() * changed);

    push_history(trace, s);
    rec.row(trace, s.k, s.w, s.delta, nullptr, (s.w - s.w_prev).squaredNorm(),
            (s.delta.flat() - s.delta_prev.flat()).squaredNorm());
  }
  return trace;
}

Trace mgda_baseline_run(const MinimaxProblem& problem, const SolverConfig& config,
                        int inner_steps, double eta) {
  return mgda_baseline_run(problem, config, inner_steps, eta, problem.zero_w(),
                           problem.zero_delta());
}

Trace mgda_baseline_run(const MinimaxProblem& problem, const SolverConfig& config, int inner_steps,
                        double eta, const Vector& w0, const BlockVector& delta0) {
  if (inner_steps < 0) throw std::invalid_argument("mgda_baseline_run: inner_steps must be >= 0");
  Trace trace = make_trace("mgda", problem, config, w0, delta0);
  Recorder rec(problem, config);
  SolverState& s = trace.final_state;
  const double sigma = config.sigma;

  if (inner_steps > 0) {
    for (const auto& gi : problem.g)
      if (gi.kind != Regularizer::Kind::Box)
        throw std::invalid_argument("mgda_baseline_run: ascent steps need box constraints");
  }

  push_history(trace, s);
  rec.row(trace, 0, s.w, s.delta, nullptr, 0.0, 0.0);

  for (int k = 0; k < config.iterations; ++k) {
    if (inner_steps > 0) {
      // Fresh adversary every iteration: uniform restart in each box, then
      // projected sign ascent. No state carries over from the last iteration.
      for (int i = 0; i < problem.n; ++i) {
        const double radius = problem.g[static_cast<std::size_t>(i)].param;
        const double step = (eta > 0.0) ? eta : 2.5 * radius / static_cast<double>(inner_steps);
        Vector di(problem.block_dims[static_cast<std::size_t>(i)]);
        for (Index j = 0; j < di.size(); ++j) di[j] = s.rng.next_in(-radius, radius);
        for (int t = 0; t < inner_steps; ++t) {
          const Vector g = problem.grad_delta_block(i, s.w, di);
          for (Index j = 0; j < di.size(); ++j) {
            const double sgn = (g[j] > 0.0) ? 1.0 : (g[j] < 0.0 ? -1.0 : 0.0);
            di[j] = std::min(std::max(di[j] + step * sgn, -radius), radius);
          }
        }
        s.delta.block(i) = di;
      }
    }

    s.w_prev = s.w;
    s.delta_prev = s.delta;
    s.w = problem.f.prox(s.w - sigma * problem.grad_w_full(s.w, s.delta), sigma);
    s.k = k + 1;
    s.q = problem.grad_w_full(s.w_prev, s.delta_prev);

    push_history(trace, s);
    rec.row(trace, s.k, s.w, s.delta, nullptr, (s.w - s.w_prev).squaredNorm(),
            (s.delta.flat() - s.delta_prev.flat()).squaredNorm());
  }
  return trace;
}

}  // namespace sihg
