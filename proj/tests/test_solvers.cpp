// Outer solvers: hand-unrolled traces, reductions between the variants, the
// explicit bilinear reference, and trace bookkeeping invariants.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sihg/solvers.hpp"
#include "sihg/zoo.hpp"

using namespace sihg;

namespace {

Matrix mat1(double a) {
  Matrix m(1, 1);
  m << a;
  return m;
}

std::vector<Matrix> random_blocks(int n, Index rows, Index cols, Rng& rng) {
  std::vector<Matrix> blocks;
  for (int i = 0; i < n; ++i) {
    Matrix a(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) a(r, c) = rng.next_in(-1.0, 1.0);
    blocks.push_back(std::move(a));
  }
  return blocks;
}

double history_gap(const Trace& a, const Trace& b) {
  REQUIRE(a.w_history.size() == b.w_history.size());
  double gap = 0.0;
  for (std::size_t j = 0; j < a.w_history.size(); ++j) {
    gap = std::max(gap, (a.w_history[j] - b.w_history[j]).cwiseAbs().maxCoeff());
    gap = std::max(gap,
                   (a.delta_history[j].flat() - b.delta_history[j].flat()).cwiseAbs().maxCoeff());
  }
  return gap;
}

// Constant w-gradient, inert delta: isolates the w-side direction logic.
MinimaxProblem constant_pull_problem(double pull) {
  MinimaxProblem p;
  p.n = 1;
  p.dim_w = 1;
  p.block_dims = {1};
  p.f = Regularizer::zero();
  p.g = {Regularizer::box(1.0)};
  p.grad_w_block = [pull](int, const Vector&, const Vector&) {
    Vector g(1);
    g << pull;
    return g;
  };
  p.grad_delta_block = [](int, const Vector&, const Vector&) { return Vector::Zero(1); };
  return p;
}

}  // namespace

TEST_CASE("dsihg reproduces the hand-unrolled trace on the scalar coupling") {
  // phi(w, d) = w d, f = g = 0, sigma = tau = 0.1, theta = 1, start (1, 0).
  const MinimaxProblem problem = make_bilinear(mat1(1.0), TermSpec{}, TermSpec{});
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  config.theta = 1.0;
  config.iterations = 2;
  config.metric_stride = 1;
  config.record_iterates = true;

  Vector w0(1);
  w0 << 1.0;
  const Trace trace = dsihg_run(problem, config, w0, problem.zero_delta());

  REQUIRE(trace.w_history.size() == 3);
  CHECK(trace.w_history[1][0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(trace.delta_history[1].flat()[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(trace.w_history[2][0] == doctest::Approx(0.98).epsilon(1e-15));
  CHECK(trace.delta_history[2].flat()[0] == doctest::Approx(0.198).epsilon(1e-15));
  // The term consumed by iteration 1 is the gradient at the start point.
  CHECK(trace.q_history[1][0] == 0.0);
}

TEST_CASE("ssihg with one block is dsihg") {
  const MinimaxProblem problem = make_quadratic_game(1.0, 1.0, 1.0, 2);
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  config.iterations = 50;
  config.metric_stride = 5;
  config.seed = 21;
  config.record_iterates = true;

  Vector w0(2);
  w0 << 1.0, -0.5;
  BlockVector d0({2});
  d0.flat() << 0.3, 0.7;

  const Trace s = ssihg_run(problem, config, w0, d0);
  const Trace d = dsihg_run(problem, config, w0, d0);
  CHECK(history_gap(s, d) == 0.0);
  CHECK((s.final_state.w - d.final_state.w).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(s.rows.size() == d.rows.size());
  // The stochastic run measures residual_sq at the full implicit shadow
  // point and keeps the iterate value in residual_iterate_sq; the
  // deterministic run records the iterate value as residual_sq. With one
  // block the shadow point IS the next iterate, so from k = 1 on all three
  // agree bitwise; at k = 0 only the iterate values match.
  for (std::size_t j = 0; j < s.rows.size(); ++j) {
    CHECK(s.rows[j].residual_sq.has_value() == d.rows[j].residual_sq.has_value());
    CHECK_FALSE(d.rows[j].residual_iterate_sq.has_value());
    if (!s.rows[j].residual_sq) continue;
    REQUIRE(s.rows[j].residual_iterate_sq.has_value());
    CHECK(*s.rows[j].residual_iterate_sq == *d.rows[j].residual_sq);
    if (j > 0) CHECK(*s.rows[j].residual_sq == *d.rows[j].residual_sq);
  }
  CHECK(*s.rows[0].residual_sq != *d.rows[0].residual_sq);
}

TEST_CASE("ssihg tracks the explicit primal dual reference on bilinear problems") {
  Rng rng(7);
  const std::vector<Matrix> blocks = random_blocks(2, 3, 4, rng);

  SolverConfig config;
  config.sigma = 0.05;
  config.tau = 0.05;
  config.iterations = 100;
  config.seed = 42;
  config.metric_stride = 25;
  config.record_iterates = true;

  for (const auto kind : {TermSpec::Kind::Quadratic, TermSpec::Kind::Box}) {
    TermSpec f, g;
    if (kind == TermSpec::Kind::Quadratic) {
      f = TermSpec{TermSpec::Kind::Quadratic, 0.5};
      g = TermSpec{TermSpec::Kind::Quadratic, 0.5};
    } else {
      g = TermSpec{TermSpec::Kind::Box, 0.7};
    }
    const MinimaxProblem problem = make_block_bilinear(blocks, f, g);
    BilinearSpec spec{blocks, f.build(), std::vector<Regularizer>(2, g.build())};

    Vector w0 = Vector::Constant(4, 0.2);
    BlockVector d0({3, 3});
    d0.flat() = Vector::Constant(6, -0.1);

    const Trace implicit_path = ssihg_run(problem, config, w0, d0);
    const Trace explicit_path = spdhg_bilinear_run(spec, config, w0, d0);
    CHECK(history_gap(implicit_path, explicit_path) <= 1e-12);
  }
}

TEST_CASE("msihg_gd with zero momentum is msihg") {
  const MinimaxProblem problem = make_block_quadratic_game(1.0, 1.0, 1.0, 3, 2);
  SolverConfig config;
  config.sigma = 0.05;
  config.tau = 0.05;
  config.iterations = 20;
  config.seed = 5;
  config.record_iterates = true;

  Vector w0 = Vector::Constant(6, 0.4);
  BlockVector d0({2, 2, 2});
  d0.flat() = Vector::Constant(6, 0.2);

  const Trace plain = msihg_run(problem, config, w0, d0);
  const Trace gd = msihg_gd_run(problem, config, 0.0, w0, d0);
  CHECK(history_gap(plain, gd) == 0.0);

  CHECK_THROWS_WITH_AS(msihg_gd_run(problem, config, 1.0, w0, d0),
                       "msihg_gd_run: momentum must be in [0, 1)", std::invalid_argument);
}

TEST_CASE("heavy ball accumulates the momentum series on a constant pull") {
  // Constant direction d per block step: after three epochs the displacement
  // is sigma d (1 + (1 + beta) + (1 + beta + beta^2)).
  const MinimaxProblem problem = constant_pull_problem(1.0);
  SolverConfig config;
  config.sigma = 0.2;
  config.tau = 0.1;
  config.iterations = 3;

  const double beta = 0.5;
  const Trace trace = msihg_gd_run(problem, config, beta);
  const double expected =
      config.sigma * (1.0 + (1.0 + beta) + (1.0 + beta + beta * beta));
  CHECK(trace.final_state.w[0] == doctest::Approx(-expected).epsilon(1e-14));

  // Without momentum each epoch moves by exactly sigma.
  const Trace plain = msihg_run(problem, config);
  CHECK(plain.final_state.w[0] == doctest::Approx(-3.0 * config.sigma).epsilon(1e-14));
}

TEST_CASE("msihg reproduces the hand-unrolled epoch updates") {
  // Same scalar coupling as the dsihg unroll; the doubled-gradient direction
  // 2 grad_here - prev_grad drives w.
  const MinimaxProblem problem = make_bilinear(mat1(1.0), TermSpec{}, TermSpec{});
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  config.iterations = 2;
  config.record_iterates = true;

  Vector w0(1);
  w0 << 1.0;
  const Trace trace = msihg_run(problem, config, w0, problem.zero_delta());

  REQUIRE(trace.w_history.size() == 3);
  // Epoch 1: delta 0 -> 0.1, direction 2 * 0.1 - 0 = 0.2, w = 1 - 0.1 * 0.2.
  CHECK(trace.delta_history[1].flat()[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(trace.w_history[1][0] == doctest::Approx(0.98).epsilon(1e-15));
  // Epoch 2: delta 0.1 + 0.1 * 0.98, direction 2 * 0.198 - 0.1 = 0.296.
  CHECK(trace.delta_history[2].flat()[0] == doctest::Approx(0.198).epsilon(1e-15));
  CHECK(trace.w_history[2][0] == doctest::Approx(0.9504).epsilon(1e-15));
}

TEST_CASE("ssihg matches a scalar mirror that replays the block draws") {
  // Two 1x1 blocks; every solver operation has a scalar counterpart, and the
  // block draws replay from the same seed, so the mirror is exact.
  const double a0 = 0.7, a1 = -0.4;
  const MinimaxProblem problem = make_block_bilinear({mat1(a0), mat1(a1)});
  SolverConfig config;
  config.sigma = 0.15;
  config.tau = 0.2;
  config.theta = 1.0;
  config.iterations = 10;
  config.seed = 12345;
  config.record_iterates = true;

  Vector w0(1);
  w0 << 1.0;
  BlockVector d0({1, 1});
  d0.flat() << 0.3, -0.2;
  const Trace trace = ssihg_run(problem, config, w0, d0);

  Rng rng(config.seed);
  double w = 1.0, d0v = 0.3, d1v = -0.2;
  double gcur = a0 * d0v + a1 * d1v;
  double q = gcur;
  REQUIRE(trace.q_history.size() == 10);
  for (int k = 0; k < config.iterations; ++k) {
    CHECK(trace.q_history[static_cast<std::size_t>(k)][0] == q);
    const double wn = w - config.sigma * (gcur + config.theta * (gcur - q));
    const int i = static_cast<int>(rng.next_below(2));
    const double d0_prev = d0v, d1_prev = d1v;
    if (i == 0)
      d0v = d0v + config.tau * (a0 * wn);
    else
      d1v = d1v + config.tau * (a1 * wn);
    w = wn;
    const double ghist = gcur;
    gcur = a0 * d0v + a1 * d1v;
    const double gcross = a0 * d0_prev + a1 * d1_prev;
    q = ghist - (gcur - gcross);  // n - 1 = 1

    CHECK(trace.w_history[static_cast<std::size_t>(k) + 1][0] == w);
    CHECK(trace.delta_history[static_cast<std::size_t>(k) + 1].flat()[0] == d0v);
    CHECK(trace.delta_history[static_cast<std::size_t>(k) + 1].flat()[1] == d1v);
  }
}

TEST_CASE("recorded extrapolation terms are recomputable from the history") {
  const MinimaxProblem problem = make_block_quadratic_game(1.0, 1.0, 1.0, 3, 2);
  SolverConfig config;
  config.sigma = 0.05;
  config.tau = 0.05;
  config.iterations = 30;
  config.seed = 3;
  config.record_iterates = true;

  Vector w0 = Vector::Constant(6, 0.5);
  BlockVector d0({2, 2, 2});
  d0.flat() = Vector::Constant(6, 0.3);

  const Trace s = ssihg_run(problem, config, w0, d0);
  const double n_minus_1 = problem.n - 1.0;
  CHECK((s.q_history[0] - problem.grad_w_full(w0, d0)).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t j = 1; j < s.q_history.size(); ++j) {
    const Vector grad_hist = problem.grad_w_full(s.w_history[j - 1], s.delta_history[j - 1]);
    const Vector grad_cur = problem.grad_w_full(s.w_history[j], s.delta_history[j]);
    const Vector grad_cross = problem.grad_w_full(s.w_history[j], s.delta_history[j - 1]);
    const Vector expected = grad_hist - n_minus_1 * (grad_cur - grad_cross);
    CHECK((s.q_history[j] - expected).cwiseAbs().maxCoeff() == 0.0);
  }

  const Trace d = dsihg_run(problem, config, w0, d0);
  for (std::size_t j = 1; j < d.q_history.size(); ++j) {
    const Vector expected = problem.grad_w_full(d.w_history[j - 1], d.delta_history[j - 1]);
    CHECK((d.q_history[j] - expected).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("box constrained iterates never leave the box") {
  Rng rng(19);
  const std::vector<Matrix> blocks = random_blocks(2, 2, 3, rng);
  const MinimaxProblem problem =
      make_block_bilinear(blocks, TermSpec{}, TermSpec{TermSpec::Kind::Box, 0.5});
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  config.iterations = 40;
  config.seed = 8;
  config.record_iterates = true;

  const Trace trace = ssihg_run(problem, config);
  for (const BlockVector& d : trace.delta_history)
    CHECK(d.flat().cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("mgda with no inner steps is plain descent at frozen delta") {
  const MinimaxProblem problem = make_quadratic_game(1.0, 1.0, 1.0, 1);
  SolverConfig config;
  config.sigma = 0.2;
  config.tau = 0.1;
  config.iterations = 5;
  config.record_iterates = true;

  Vector w0(1);
  w0 << 1.0;
  BlockVector d0({1});
  d0.flat() << 0.5;
  const Trace trace = mgda_baseline_run(problem, config, 0, 0.0, w0, d0);

  double w = 1.0;
  for (int k = 0; k < config.iterations; ++k) {
    w = w - config.sigma * (1.0 * w + 1.0 * 0.5);
    CHECK(trace.w_history[static_cast<std::size_t>(k) + 1][0] == doctest::Approx(w).epsilon(1e-15));
    CHECK(trace.delta_history[static_cast<std::size_t>(k) + 1].flat()[0] == 0.5);
  }

  // Ascent steps need a box to project into.
  CHECK_THROWS_WITH_AS(mgda_baseline_run(problem, config, 3, 0.0, w0, d0),
                       "mgda_baseline_run: ascent steps need box constraints",
                       std::invalid_argument);
}

TEST_CASE("mgda restarts are deterministic in the seed") {
  const MinimaxProblem problem =
      make_block_bilinear({mat1(1.0), mat1(0.5)}, TermSpec{}, TermSpec{TermSpec::Kind::Box, 0.3});
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  config.iterations = 10;
  config.seed = 77;
  config.record_iterates = true;

  const Trace a = mgda_baseline_run(problem, config, 4, 0.0);
  const Trace b = mgda_baseline_run(problem, config, 4, 0.0);
  CHECK(history_gap(a, b) == 0.0);

  SolverConfig other = config;
  other.seed = 78;
  const Trace c = mgda_baseline_run(problem, other, 4, 0.0);
  CHECK((a.delta_history[1].flat() - c.delta_history[1].flat()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("spdhg decouples when the coupling matrix is zero") {
  // A = [0]: w and delta evolve as independent prox flows of their quadratics.
  BilinearSpec spec{{mat1(0.0)}, Regularizer::quadratic(2.0), {Regularizer::quadratic(3.0)}};
  SolverConfig config;
  config.sigma = 0.25;
  config.tau = 0.5;
  config.iterations = 20;
  config.metric_stride = 20;

  Vector w0(1);
  w0 << 1.0;
  BlockVector d0({1});
  d0.flat() << -1.0;
  const Trace trace = spdhg_bilinear_run(spec, config, w0, d0);

  const double w_shrink = 1.0 / (1.0 + config.sigma * 2.0);
  const double d_shrink = 1.0 / (1.0 + config.tau * 3.0);
  CHECK(trace.final_state.w[0] ==
        doctest::Approx(std::pow(w_shrink, 20)).epsilon(1e-12));
  CHECK(trace.final_state.delta.flat()[0] ==
        doctest::Approx(-std::pow(d_shrink, 20)).epsilon(1e-12));
}

TEST_CASE("repeated runs are bit identical") {
  const MinimaxProblem problem = make_block_quadratic_game(1.0, 0.8, 1.2, 4, 2);
  SolverConfig config;
  config.sigma = 0.05;
  config.tau = 0.05;
  config.iterations = 25;
  config.seed = 99;
  config.metric_stride = 5;
  config.record_iterates = true;

  const Trace a = ssihg_run(problem, config);
  const Trace b = ssihg_run(problem, config);
  CHECK(history_gap(a, b) == 0.0);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t j = 0; j < a.rows.size(); ++j) {
    if (a.rows[j].residual_sq) CHECK(*a.rows[j].residual_sq == *b.rows[j].residual_sq);
    CHECK(*a.rows[j].dist_w_sq == *b.rows[j].dist_w_sq);
    CHECK(a.rows[j].step_w_sq == b.rows[j].step_w_sq);
  }
}

TEST_CASE("epoch shuffles replay from the config seed") {
  const MinimaxProblem problem = make_block_quadratic_game(1.0, 1.0, 1.0, 4, 1);
  SolverConfig config;
  config.sigma = 0.05;
  config.tau = 0.05;
  config.iterations = 6;
  config.seed = 13;

  std::vector<std::vector<int>> seen;
  const BlockStepObserver observer = [&seen](const BlockStepInfo& info) {
    if (info.position == 0) seen.emplace_back();
    seen.back().push_back(info.block);
  };
  msihg_run(problem, config, problem.zero_w(), problem.zero_delta(), observer);
  REQUIRE(seen.size() == 6);

  // Mirror of the in-solver shuffle: Fisher-Yates on the same stream.
  Rng rng(config.seed);
  for (const std::vector<int>& epoch_order : seen) {
    std::vector<int> expected = {0, 1, 2, 3};
    for (int j = 3; j >= 1; --j)
      std::swap(expected[static_cast<std::size_t>(j)],
                expected[rng.next_below(static_cast<std::uint32_t>(j + 1))]);
    CHECK(epoch_order == expected);
    bool sorted_copy[4] = {false, false, false, false};
    for (int b : epoch_order) sorted_copy[b] = true;
    CHECK((sorted_copy[0] && sorted_copy[1] && sorted_copy[2] && sorted_copy[3]));
  }
}

TEST_CASE("trace rows follow the stride and echo the start") {
  const MinimaxProblem problem = make_quadratic_game(1.0, 1.0, 1.0, 2);
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  config.iterations = 10;
  config.metric_stride = 3;
  config.seed = 4;

  Vector w0(2);
  w0 << 1.0, 2.0;
  const Trace trace = dsihg_run(problem, config, w0, problem.zero_delta());

  CHECK(trace.solver_name == "dsihg");
  CHECK(trace.seed == 4);
  CHECK((trace.w_start - w0).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(trace.rows.size() == 11);
  for (std::size_t j = 0; j < trace.rows.size(); ++j) {
    const TraceRow& r = trace.rows[j];
    CHECK(r.k == static_cast<int>(j));
    CHECK(r.residual_sq.has_value() == (r.k % 3 == 0));
    CHECK(r.dist_w_sq.has_value());
  }
  CHECK(trace.rows[0].step_w_sq == 0.0);
  CHECK(trace.rows[0].step_delta_sq == 0.0);
}

TEST_CASE("zero iterations leave the start state in place") {
  const MinimaxProblem problem = make_quadratic_game(1.0, 1.0, 1.0, 2);
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  config.iterations = 0;

  Vector w0(2);
  w0 << 0.5, -0.5;
  BlockVector d0({2});
  d0.flat() << 0.1, 0.2;
  const Trace trace = ssihg_run(problem, config, w0, d0);

  CHECK(trace.final_state.k == 0);
  CHECK((trace.final_state.w - w0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((trace.final_state.w_prev - w0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((trace.final_state.delta.flat() - d0.flat()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((trace.final_state.delta_prev.flat() - d0.flat()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((trace.final_state.q - problem.grad_w_full(w0, d0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(trace.rows.size() == 1);
  CHECK(trace.final_state.rng_algorithm == "xoshiro256++");
}

TEST_CASE("solvers reject mismatched start points") {
  const MinimaxProblem problem = make_quadratic_game(1.0, 1.0, 1.0, 2);
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  CHECK_THROWS_WITH_AS(ssihg_run(problem, config, Vector::Zero(3), problem.zero_delta()),
                       "solver: start w has wrong dimension", std::invalid_argument);
  CHECK_THROWS_WITH_AS(ssihg_run(problem, config, problem.zero_w(), BlockVector({3})),
                       "solver: start delta has wrong block shape", std::invalid_argument);
}

TEST_CASE("surrogate steps require box constraints on every block") {
  const MinimaxProblem problem = make_quadratic_game(1.0, 1.0, 1.0, 2);
  SolverConfig config;
  config.sigma = 0.1;
  config.tau = 0.1;
  config.surrogate = PgdSurrogateConfig{3, 0.0};
  CHECK_THROWS_WITH_AS(msihg_run(problem, config),
                       "msihg: surrogate delta step needs box constraints on every block",
                       std::invalid_argument);
}

TEST_CASE("the first step moves w by exactly sigma times the gradient") {
  // With q seeded at the start gradient, iteration one is a plain prox step;
  // the general bound sigma (1 + theta) sup|grad| holds with room to spare.
  const MinimaxProblem problem = make_quadratic_game(1.0, 1.0, 1.0, 2);
  SolverConfig config;
  config.sigma = 0.07;
  config.tau = 0.07;
  config.iterations = 1;
  config.record_iterates = true;

  Rng rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    Vector w0(2);
    BlockVector d0({2});
    for (Index j = 0; j < 2; ++j) {
      w0[j] = rng.next_in(-1.0, 1.0);
      d0.flat()[j] = rng.next_in(-1.0, 1.0);
    }
    const Trace trace = dsihg_run(problem, config, w0, d0);
    const double moved = (trace.w_history[1] - w0).norm();
    const double grad_norm = problem.grad_w_full(w0, d0).norm();
    CHECK(moved == doctest::Approx(config.sigma * grad_norm).epsilon(1e-13));
    CHECK(moved <= config.sigma * (1.0 + config.theta) * grad_norm + 1e-15);
  }
}
