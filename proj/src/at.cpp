#include "sihg/at.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sihg/zoo.hpp"

namespace sihg {

namespace {

int argmax_col(const Matrix& logits) {
  int best = 0;
  for (Index r = 1; r < logits.rows(); ++r)
    if (logits(r, 0) > logits(best, 0)) best = static_cast<int>(r);
  return best;
}

double loss_from_logits(const Matrix& logits, int y) {
  const double top = logits.col(0).maxCoeff();
  return top + std::log((logits.col(0).array() - top).exp().sum()) - logits(y, 0);
}

}  // namespace

std::string AttackConfig::name() const {
  std::string out = "PGD-" + std::to_string(steps);
  if (restarts > 0) out += "-" + std::to_string(restarts);
  return out;
}

void AttackConfig::validate() const {
  if (!(eps >= 0.0) || !std::isfinite(eps))
    throw std::invalid_argument("AttackConfig: eps must be finite and nonnegative");
  if (steps < 0) throw std::invalid_argument("AttackConfig: steps must be nonnegative");
  if (restarts < 0) throw std::invalid_argument("AttackConfig: restarts must be nonnegative");
  if (!(step_size >= 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("AttackConfig: step_size must be finite and nonnegative");
}

AttackResult pgd_attack(const MlpShape& shape, const Vector& params, const Vector& x, int y,
                        const AttackConfig& attack, Rng& rng) {
  attack.validate();
  const double eta = attack.eta();
  const Vector lo = x.array() - attack.eps;
  const Vector hi = x.array() + attack.eps;

  Vector best = x;
  double best_loss = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial <= attack.restarts; ++trial) {
    Vector xa = x;
    if (trial > 0)
      for (Index j = 0; j < xa.size(); ++j) xa[j] = x[j] + rng.next_in(-attack.eps, attack.eps);
    for (int t = 0;; ++t) {
      const Matrix logits = mlp_forward(shape, params, xa);
      if (argmax_col(logits) != y) return {xa, true};
      const double loss = loss_from_logits(logits, y);
      if (loss > best_loss) {
        best_loss = loss;
        best = xa;
      }
      if (t == attack.steps) break;
      const LossGrads lg = mlp_loss_and_grads(shape, params, xa, {y});
      xa = (xa + eta * lg.grad_inputs.col(0).array().sign().matrix())
               .cwiseMax(lo)
               .cwiseMin(hi);
    }
  }
  return {best, false};
}

AttackResult pgd_attack(const MlpShape& shape, const Vector& params, const Vector& x, int y,
                        const AttackConfig& attack) {
  Rng rng(attack.seed);
  return pgd_attack(shape, params, x, y, attack, rng);
}

EvalResult evaluate(const MlpShape& shape, const Vector& params, const ToyDataset& data,
                    const AttackConfig& attack) {
  attack.validate();
  const Index total = data.size();
  if (total == 0) throw std::invalid_argument("evaluate: empty dataset");
  const std::vector<int> preds = mlp_predict(shape, params, data.inputs);
  const Rng base(attack.seed);
  Index natural = 0, safe = 0;
  for (Index j = 0; j < total; ++j) {
    const int y = data.labels[static_cast<std::size_t>(j)];
    if (preds[static_cast<std::size_t>(j)] == y) ++natural;
    Rng stream = base.split(static_cast<std::uint64_t>(j));
    if (!pgd_attack(shape, params, data.inputs.col(j), y, attack, stream).fooled) ++safe;
  }
  return {static_cast<double>(natural) / static_cast<double>(total),
          static_cast<double>(safe) / static_cast<double>(total)};
}

std::string to_string(AtMethod method) {
  switch (method) {
    case AtMethod::Natural: return "natural";
    case AtMethod::PgdAt: return "pgd_at";
    case AtMethod::Msihg: return "msihg";
    case AtMethod::MsihgGd: return "msihg_gd";
  }
  throw std::logic_error("to_string: unknown AtMethod");
}

AtMethod at_method_from_string(const std::string& name) {
  if (name == "natural") return AtMethod::Natural;
  if (name == "pgd_at") return AtMethod::PgdAt;
  if (name == "msihg") return AtMethod::Msihg;
  if (name == "msihg_gd") return AtMethod::MsihgGd;
  throw std::invalid_argument("at_method_from_string: expected one of natural, pgd_at, msihg, "
                              "msihg_gd; got '" +
                              name + "'");
}

void AtConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("AtConfig: epochs must be nonnegative");
  if (batches <= 0) throw std::invalid_argument("AtConfig: batches must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("AtConfig: sigma must be positive");
  if (!(tau >= 0.0)) throw std::invalid_argument("AtConfig: tau must be nonnegative");
  if (inner_steps <= 0) throw std::invalid_argument("AtConfig: inner_steps must be positive");
  if (!(inner_eta >= 0.0)) throw std::invalid_argument("AtConfig: inner_eta must be nonnegative");
  if (pgd_at_steps <= 0) throw std::invalid_argument("AtConfig: pgd_at_steps must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("AtConfig: momentum must lie in [0, 1)");
  if (!(init_scale > 0.0)) throw std::invalid_argument("AtConfig: init_scale must be positive");
}

AtResult at_train(AtMethod method, const ToyDataset& data, const MlpShape& net, double eps,
                  const AtConfig& config, const BlockStepObserver& observer) {
  config.validate();
  MinimaxProblem problem = make_toy_at(data, net, eps, config.batches);

  Rng init_rng = Rng(config.seed).split(1);
  const Vector w0 = mlp_init(net, config.init_scale, init_rng);

  AttackConfig probe = config.curve_attack;
  if (probe.eps == 0.0) probe.eps = eps;

  AtResult result;
  result.shape = net;
  result.method = to_string(method);
  result.delta = problem.zero_delta();

  auto curve_point = [&](int epoch, const Vector& params) {
    const EvalResult ev = evaluate(net, params, data, probe);
    result.curve.push_back(CurvePoint{epoch, ev.natural_acc, ev.robust_acc,
                                      mlp_loss(net, params, data.inputs, data.labels)});
  };

  if (method == AtMethod::Msihg || method == AtMethod::MsihgGd) {
    SolverConfig sc;
    sc.sigma = config.sigma;
    sc.tau = config.band(eps);
    sc.iterations = config.epochs;
    sc.seed = config.seed;
    sc.surrogate = PgdSurrogateConfig{config.inner_steps, config.inner_eta};
    sc.record_iterates = true;
    const Trace trace = method == AtMethod::Msihg
                            ? msihg_run(problem, sc, w0, problem.zero_delta(), observer)
                            : msihg_gd_run(problem, sc, config.momentum, w0, problem.zero_delta(),
                                           observer);
    for (int e = 0; e <= config.epochs; ++e)
      curve_point(e, trace.w_history[static_cast<std::size_t>(e)]);
    result.params = trace.final_state.w;
    result.delta = trace.final_state.delta;
    return result;
  }

  // Forward baselines share the per-batch oracle and step scale with the
  // epoch solvers; neither keeps delta between visits.
  Vector w = w0;
  Rng rng = Rng(config.seed).split(2);
  curve_point(0, w);
  const double eta_at =
      config.inner_eta > 0.0 ? config.inner_eta : 2.5 * eps / config.pgd_at_steps;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (int i = 0; i < problem.n; ++i) {
      Vector d = Vector::Zero(problem.block_dims[static_cast<std::size_t>(i)]);
      if (method == AtMethod::PgdAt) {
        for (Index j = 0; j < d.size(); ++j) d[j] = rng.next_in(-eps, eps);
        for (int t = 0; t < config.pgd_at_steps; ++t) {
          const Vector g = problem.grad_delta_block(i, w, d);
          d = (d + eta_at * g.array().sign().matrix())
                  .cwiseMax(-eps)
                  .cwiseMin(eps);
        }
      }
      w -= config.sigma * problem.grad_w_block(i, w, d);
    }
    curve_point(epoch, w);
  }
  result.params = w;
  return result;
}

}  // namespace sihg
