// Core primitives: prox operators, regularizer witnesses, block vectors,
// the RNG contract, and step-size admissibility.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <stdexcept>

#include "sihg/problem.hpp"
#include "sihg/prox.hpp"
#include "sihg/rng.hpp"
#include "sihg/zoo.hpp"

using namespace sihg;

namespace {

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

Vector random_vector(Index dim, Rng& rng, double lo = -3.0, double hi = 3.0) {
  Vector v(dim);
  for (Index j = 0; j < dim; ++j) v[j] = rng.next_in(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("prox_quadratic matches the closed form and a grid oracle") {
  CHECK(prox_quadratic(vec1(4.0), 0.5, 2.0)[0] == doctest::Approx(2.0).epsilon(1e-15));

  Rng rng(11);
  const Vector z = random_vector(6, rng);
  CHECK((prox_quadratic(z, 0.7, 0.0) - z).cwiseAbs().maxCoeff() == 0.0);

  // argmin_u lambda u^2 / 2 + (u - z)^2 / (2 eta) by exhaustive sweep.
  const double zz = 1.0, eta = 1.0, lambda = 1.0;
  double best_u = 0.0, best_value = 1e300;
  for (double u = -2.0; u <= 2.0; u += 1e-4) {
    const double value = 0.5 * lambda * u * u + (u - zz) * (u - zz) / (2.0 * eta);
    if (value < best_value) {
      best_value = value;
      best_u = u;
    }
  }
  const double prox = prox_quadratic(vec1(zz), eta, lambda)[0];
  CHECK(prox == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(prox - best_u) <= 1e-4);
}

TEST_CASE("prox_box clamps coordinatewise and ignores eta") {
  Vector z(3);
  z << 0.7, -0.1, -0.5;
  const Vector p = prox_box(z, 1.0, 0.4);
  CHECK(p[0] == 0.4);
  CHECK(p[1] == -0.1);
  CHECK(p[2] == -0.4);

  Vector inside(2);
  inside << 0.2, -0.3;
  CHECK((prox_box(inside, 0.5, 0.4) - inside).cwiseAbs().maxCoeff() == 0.0);

  CHECK(prox_box(vec1(10.0), 1.0, 8.0 / 255.0)[0] == 8.0 / 255.0);

  Rng rng(5);
  const Vector q = random_vector(8, rng);
  CHECK((prox_box(q, 0.1, 0.9) - prox_box(q, 10.0, 0.9)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("prox_zero is the identity") {
  Rng rng(7);
  const Vector z = random_vector(5, rng);
  CHECK((prox_zero(z, 2.5) - z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("prox operators reject bad arguments") {
  Vector bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_WITH_AS(prox_zero(bad, 1.0), "prox_zero: non-finite operand",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(prox_quadratic(bad, 1.0, 1.0), "prox_quadratic: non-finite operand",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(prox_box(bad, 1.0, 1.0), "prox_box: non-finite operand",
                       std::invalid_argument);

  const Vector ok = vec1(1.0);
  CHECK_THROWS_WITH_AS(prox_zero(ok, 0.0), "prox_zero: eta must be positive",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(prox_quadratic(ok, 1.0, -0.1),
                       "prox_quadratic: lambda must be nonnegative", std::invalid_argument);
  CHECK_THROWS_WITH_AS(prox_box(ok, 1.0, 0.0), "prox_box: radius must be positive",
                       std::invalid_argument);
}

TEST_CASE("prox outputs satisfy the optimality inclusions") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector z = random_vector(5, rng);
    const double eta = rng.next_in(0.1, 2.0);
    const double lambda = rng.next_in(0.0, 3.0);
    const double radius = rng.next_in(0.2, 2.0);

    // Quadratic: the minimizer zeroes lambda u + (u - z) / eta.
    const Vector uq = prox_quadratic(z, eta, lambda);
    CHECK((lambda * uq + (uq - z) / eta).cwiseAbs().maxCoeff() <= 1e-12);

    // Box: exact clamp, so each coordinate is either z or the nearest face.
    const Vector ub = prox_box(z, eta, radius);
    CHECK(ub.cwiseAbs().maxCoeff() <= radius);
    for (Index j = 0; j < z.size(); ++j)
      CHECK(ub[j] == std::min(radius, std::max(-radius, z[j])));
  }
}

TEST_CASE("prox operators are non-expansive") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector a = random_vector(6, rng);
    const Vector b = random_vector(6, rng);
    const double gap = (a - b).norm();
    CHECK((prox_zero(a, 0.3) - prox_zero(b, 0.3)).norm() <= gap + 1e-12);
    CHECK((prox_quadratic(a, 0.3, 1.7) - prox_quadratic(b, 0.3, 1.7)).norm() <= gap + 1e-12);
    CHECK((prox_box(a, 0.3, 0.8) - prox_box(b, 0.3, 0.8)).norm() <= gap + 1e-12);
  }
}

TEST_CASE("closest_subgradient picks the minimal selection per kind") {
  const Vector z = vec1(0.2);
  const Vector target = vec1(1.5);
  CHECK(Regularizer::zero().closest_subgradient(z, target)[0] == 0.0);
  CHECK(Regularizer::quadratic(3.0).closest_subgradient(z, target)[0] ==
        doctest::Approx(0.6).epsilon(1e-15));

  const Regularizer box = Regularizer::box(0.4);
  // Interior: the subdifferential is {0}.
  CHECK(box.closest_subgradient(vec1(0.1), vec1(-5.0))[0] == 0.0);
  // Upper face: normal cone [0, inf), so the projection of the target.
  CHECK(box.closest_subgradient(vec1(0.4), vec1(1.5))[0] == 1.5);
  CHECK(box.closest_subgradient(vec1(0.4), vec1(-0.3))[0] == 0.0);
  // Lower face mirrors it.
  CHECK(box.closest_subgradient(vec1(-0.4), vec1(-2.0))[0] == -2.0);
  CHECK(box.closest_subgradient(vec1(-0.4), vec1(0.7))[0] == 0.0);

  CHECK(box.subdifferentiable_at(vec1(0.39)));
  CHECK(box.subdifferentiable_at(vec1(0.4)));
  CHECK_FALSE(box.subdifferentiable_at(vec1(0.5)));
  CHECK_THROWS_AS(box.closest_subgradient(vec1(0.5), vec1(0.0)), std::domain_error);

  Regularizer custom =
      Regularizer::custom([](const Vector& v, double) { return v; }, nullptr);
  CHECK_THROWS_AS(custom.closest_subgradient(z, target), std::invalid_argument);
  CHECK_THROWS_AS(Regularizer::custom(nullptr, nullptr), std::invalid_argument);

  CHECK(Regularizer::zero().describe() == "zero");
  CHECK(Regularizer::box(0.4).describe().substr(0, 4) == "box(");
}

TEST_CASE("BlockVector views alias the flat storage") {
  BlockVector v({2, 3});
  CHECK(v.blocks() == 2);
  CHECK(v.dim() == 5);
  CHECK(v.block_dim(1) == 3);
  CHECK(v.flat().cwiseAbs().maxCoeff() == 0.0);

  v.block(1)[0] = 5.0;
  CHECK(v.flat()[2] == 5.0);
  v.flat()[4] = -2.0;
  CHECK(v.block(1)[2] == -2.0);

  Vector flat(5);
  flat << 1, 2, 3, 4, 5;
  const BlockVector w({2, 3}, flat);
  CHECK(w.block(0)[1] == 2.0);
  CHECK(w.same_shape(v));
  CHECK_FALSE(w.same_shape(BlockVector({5})));

  CHECK_THROWS_WITH_AS(BlockVector({2, 0}), "BlockVector: block dims must be positive",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(BlockVector({2, 2}, flat),
                       "BlockVector: flat size does not match block dims",
                       std::invalid_argument);
}

TEST_CASE("Rng streams are deterministic and split is by seed") {
  Rng a(42), b(42);
  for (int j = 0; j < 8; ++j) CHECK(a.next_u64() == b.next_u64());

  // Children depend on the parent's seed only, never on its position.
  Rng parent(42);
  Rng child_before = parent.split(3);
  for (int j = 0; j < 100; ++j) parent.next_u64();
  Rng child_after = parent.split(3);
  for (int j = 0; j < 16; ++j) CHECK(child_before.next_u64() == child_after.next_u64());
  CHECK(Rng(42).split(0).next_u64() != Rng(42).split(1).next_u64());

  Rng c(9);
  std::set<std::uint32_t> seen;
  for (int j = 0; j < 10000; ++j) {
    const std::uint32_t draw = c.next_below(7);
    CHECK(draw < 7);
    seen.insert(draw);
  }
  CHECK(seen.size() == 7);

  Rng d(13);
  for (int j = 0; j < 10000; ++j) {
    const double u = d.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }

  // Fixed seed, so these moment checks are exact reruns, not statistics.
  Rng e(17);
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 20000;
  for (int j = 0; j < draws; ++j) {
    const double x = e.next_normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / draws;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(sum_sq / draws - mean * mean - 1.0) < 0.1);

  CHECK(Rng(1).seed() == 1);
  CHECK(Rng::kAlgorithm == "xoshiro256++");
}

TEST_CASE("SolverConfig::validate names the violated field") {
  SolverConfig config;
  config.validate();  // defaults are admissible

  SolverConfig bad = config;
  bad.sigma = 0.0;
  CHECK_THROWS_WITH_AS(bad.validate(), "SolverConfig: sigma must be positive",
                       std::invalid_argument);
  bad = config;
  bad.tau = -1.0;
  CHECK_THROWS_WITH_AS(bad.validate(), "SolverConfig: tau must be positive",
                       std::invalid_argument);
  bad = config;
  bad.theta = -0.1;
  CHECK_THROWS_WITH_AS(bad.validate(), "SolverConfig: theta must be nonnegative",
                       std::invalid_argument);
  bad = config;
  bad.iterations = -1;
  CHECK_THROWS_WITH_AS(bad.validate(), "SolverConfig: iterations must be nonnegative",
                       std::invalid_argument);
  bad = config;
  bad.metric_stride = 0;
  CHECK_THROWS_WITH_AS(bad.validate(), "SolverConfig: metric_stride must be positive",
                       std::invalid_argument);
  bad = config;
  bad.inner.tol = 0.0;
  CHECK_THROWS_WITH_AS(bad.validate(), "SolverConfig: inner tol must be positive",
                       std::invalid_argument);
  bad = config;
  bad.surrogate = PgdSurrogateConfig{0, 0.0};
  CHECK_THROWS_WITH_AS(bad.validate(), "SolverConfig: surrogate steps must be positive",
                       std::invalid_argument);
}

TEST_CASE("MinimaxProblem::validate names the violated field") {
  const MinimaxProblem good = make_quadratic_game(1.0, 1.0, 1.0, 2);
  good.validate();

  MinimaxProblem bad = good;
  bad.n = 0;
  CHECK_THROWS_WITH_AS(bad.validate(), "MinimaxProblem: n must be positive",
                       std::invalid_argument);
  bad = good;
  bad.block_dims = {2, 2};
  CHECK_THROWS_WITH_AS(bad.validate(), "MinimaxProblem: block_dims size must equal n",
                       std::invalid_argument);
  bad = good;
  bad.g.clear();
  CHECK_THROWS_WITH_AS(bad.validate(), "MinimaxProblem: need one g term per block",
                       std::invalid_argument);
  bad = good;
  bad.f.prox = nullptr;
  CHECK_THROWS_WITH_AS(bad.validate(), "MinimaxProblem: f has no prox", std::invalid_argument);
  bad = good;
  bad.grad_w_block = nullptr;
  CHECK_THROWS_WITH_AS(bad.validate(), "MinimaxProblem: gradient oracles are required",
                       std::invalid_argument);
  bad = good;
  bad.lipschitz.L12 = -1.0;
  CHECK_THROWS_WITH_AS(bad.validate(), "MinimaxProblem: Lipschitz constants must be nonnegative",
                       std::invalid_argument);
  bad = good;
  bad.known_solution->w = Vector::Zero(3);
  CHECK_THROWS_WITH_AS(bad.validate(), "MinimaxProblem: known_solution shape mismatch",
                       std::invalid_argument);
}

TEST_CASE("validate_config reproduces the worked admissibility numbers") {
  // Unit constants: L11 = L12 = L22 = 1, one block.
  const MinimaxProblem game = make_quadratic_game(1.0, 1.0, 1.0, 2);
  SolverConfig config;
  config.sigma = 1.0 / 6.0;
  config.tau = 1.0 / 6.0;

  const AdmissibilityReport report = validate_config(game, config, 0.02);
  CHECK(report.kappa == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  // Drag factors: 1/sigma + 4 L11^2 sigma = 20/3 and 1/tau + 12 n L12^2 tau = 8.
  CHECK(report.sublinear_bound_w == doctest::Approx(1.0 / 3.0 - 0.02 * 20.0 / 3.0).epsilon(1e-14));
  CHECK(report.sublinear_bound_delta == doctest::Approx(1.0 - 0.02 * 8.0).epsilon(1e-14));
  CHECK(report.sublinear_ok);
  CHECK(report.rho_max == doctest::Approx(0.025).epsilon(1e-14));

  // Past rho_max the w-side bound drops below kappa.
  CHECK_FALSE(validate_config(game, config, 0.03).sublinear_ok);
  CHECK(validate_config(game, config, 0.0251).sublinear_ok == false);
  CHECK(validate_config(game, config, 0.0249).sublinear_ok == true);

  // Linear regime on five blocks: theta = max{1/(1+mu sigma),
  // (1 + (n-1) mu tau / n) / (1 + mu tau)}.
  const MinimaxProblem blocks = make_block_quadratic_game(1.0, 1.0, 1.0, 5, 2);
  SolverConfig lin;
  lin.sigma = 0.1;
  lin.tau = 0.1;
  const AdmissibilityReport linear = validate_config(blocks, lin, 0.0, 1.0);
  CHECK(linear.linear_theta == doctest::Approx(1.08 / 1.1).epsilon(1e-15));
  CHECK(linear.linear_ok);
  CHECK_FALSE(validate_config(blocks, lin, 0.0, 0.0).linear_ok);
}

TEST_CASE("one sixth steps stay admissible at rho zero across scales") {
  for (double L : {0.5, 1.0, 2.0, 4.0}) {
    for (int n : {1, 2, 5, 10}) {
      const MinimaxProblem game = make_block_quadratic_game(L, L, L, n, 2);
      SolverConfig config;
      config.sigma = 1.0 / (6.0 * L);
      config.tau = 1.0 / (6.0 * n * L);
      const AdmissibilityReport report = validate_config(game, config);
      CHECK(report.sublinear_ok);
      CHECK(report.kappa == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("admissibility report is reproducible from the constants") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(4));
    const double a = rng.next_in(0.1, 3.0);
    const double b = rng.next_in(0.1, 3.0);
    const double c = rng.next_in(0.1, 3.0);
    const MinimaxProblem game = make_block_quadratic_game(a, b, c, n, 2);
    SolverConfig config;
    config.sigma = rng.next_in(0.01, 0.5);
    config.tau = rng.next_in(0.01, 0.5);
    const double rho = rng.next_in(0.0, 0.1);
    const double mu = rng.next_in(0.1, 2.0);

    const AdmissibilityReport report = validate_config(game, config, rho, mu);
    const double L11 = game.lipschitz.L11, L12 = game.lipschitz.L12;
    const double kappa = std::max(L12 * std::sqrt(config.sigma * config.tau * n),
                                  L11 * config.sigma);
    const double drag_w = 1.0 / config.sigma + 4.0 * L11 * L11 * config.sigma;
    const double drag_delta = 1.0 / config.tau + 12.0 * n * L12 * L12 * config.tau;
    const double bound_w = 1.0 / 3.0 - rho * drag_w;
    const double bound_delta = 1.0 - rho * drag_delta;
    const double theta =
        std::max(1.0 / (1.0 + mu * config.sigma),
                 (1.0 + (n - 1) * mu * config.tau / n) / (1.0 + mu * config.tau));

    CHECK(report.kappa == doctest::Approx(kappa).epsilon(1e-12));
    CHECK(report.sublinear_bound_w == doctest::Approx(bound_w).epsilon(1e-12));
    CHECK(report.sublinear_bound_delta == doctest::Approx(bound_delta).epsilon(1e-12));
    CHECK(report.sublinear_ok == (kappa < std::min(bound_w, bound_delta)));
    const double rho_max =
        std::max(0.0, std::min((1.0 / 3.0 - kappa) / drag_w, (1.0 - kappa) / drag_delta));
    CHECK(report.rho_max == doctest::Approx(rho_max).epsilon(1e-12));
    CHECK(report.linear_theta == doctest::Approx(theta).epsilon(1e-12));
    CHECK(report.linear_ok == (kappa <= 1.0 / 3.0));
  }

  CHECK_THROWS_AS(validate_config(make_quadratic_game(1, 1, 1, 2), SolverConfig{}, -0.1),
                  std::invalid_argument);
}
