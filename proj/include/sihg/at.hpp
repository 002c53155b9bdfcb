#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sihg/mlp.hpp"
#include "sihg/solvers.hpp"

namespace sihg {

// Evaluation attack: projected sign-gradient ascent inside the eps box around
// the clean input. Trial 0 starts exactly at the clean input; each of the
// `restarts` extra trials starts uniformly inside the box. Reported as
// "PGD-T" or, with restarts, "PGD-T-R".
struct AttackConfig {
  double eps = 0.3;
  int steps = 20;
  int restarts = 0;
  double step_size = 0.0;  // 0 selects 2.5 * eps / steps
  std::uint64_t seed = 0;

  double eta() const { return step_size > 0.0 ? step_size : (steps > 0 ? 2.5 * eps / steps : 0.0); }
  std::string name() const;
  void validate() const;
};

struct AttackResult {
  Vector x_adv;
  bool fooled = false;
};

// Every iterate of every trial is probed; the first misclassified one is
// returned immediately, so the set of probed points for a smaller step count
// is a prefix of the set for a larger one (same seed, same step size). If no
// probe fools, the highest-loss probe comes back.
AttackResult pgd_attack(const MlpShape& shape, const Vector& params, const Vector& x, int y,
                        const AttackConfig& attack, Rng& rng);
AttackResult pgd_attack(const MlpShape& shape, const Vector& params, const Vector& x, int y,
                        const AttackConfig& attack);

struct EvalResult {
  double natural_acc = 0.0;
  double robust_acc = 0.0;  // fraction of examples no attack trial fooled
};

// Per-example attack streams split off attack.seed by example index, so the
// result does not depend on evaluation order.
EvalResult evaluate(const MlpShape& shape, const Vector& params, const ToyDataset& data,
                    const AttackConfig& attack);

enum class AtMethod { Natural, PgdAt, Msihg, MsihgGd };

std::string to_string(AtMethod method);
AtMethod at_method_from_string(const std::string& name);

struct AtConfig {
  int epochs = 150;
  int batches = 10;        // blocks of the minimax problem
  double sigma = 2.0;      // w step per block visit; effective lr is sigma/batches
  double tau = 0.0;        // per-epoch travel band; 0 selects eps / 2
  int inner_steps = 5;     // ascent steps of the surrogate / the pgd_at inner loop
  double inner_eta = 0.0;  // 0 selects 2.5 * eps / inner_steps
  int pgd_at_steps = 10;
  double momentum = 0.9;   // msihg_gd only
  double init_scale = 1.0;
  std::uint64_t seed = 0;
  // Robust-accuracy probe for the learning curve; eps == 0 inherits the
  // training eps.
  AttackConfig curve_attack{0.0, 20, 0, 0.0, 0};

  double band(double eps) const { return tau > 0.0 ? tau : eps / 2.0; }
  void validate() const;
};

struct CurvePoint {
  int epoch = 0;  // 0 is the untrained init
  double natural_acc = 0.0;
  double robust_acc = 0.0;
  double train_loss = 0.0;  // mean loss on the clean training set
};

struct AtResult {
  MlpShape shape;
  Vector params;
  std::vector<CurvePoint> curve;
  BlockVector delta;  // final training perturbations; zero for natural / pgd_at
  std::string method;
};

// Natural: plain descent on the clean batches. PgdAt: fresh uniform delta per
// batch visit, inner sign ascent in the eps box, one descent step. Msihg /
// MsihgGd: the epoch solvers on the adversarial minimax problem with the
// sign-ascent surrogate, delta carried across epochs. The observer fires on
// the epoch-solver paths only.
AtResult at_train(AtMethod method, const ToyDataset& data, const MlpShape& net, double eps,
                  const AtConfig& config, const BlockStepObserver& observer = {});

}  // namespace sihg
