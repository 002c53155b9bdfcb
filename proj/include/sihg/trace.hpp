#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sihg/block_vector.hpp"
#include "sihg/problem.hpp"
#include "sihg/rng.hpp"

namespace sihg {

// Live solver state after k outer iterations. The convention (w_prev, delta_prev)
// = (w, delta) holds at k = 0; q always equals the extrapolation term the next
// w-update would use, recomputable from the stored history.
struct SolverState {
  Vector w;
  Vector w_prev;
  BlockVector delta;
  BlockVector delta_prev;
  Vector q;
  int k = 0;
  Rng rng;
  std::uint64_t seed = 0;
  std::string rng_algorithm = std::string(Rng::kAlgorithm);
};

struct TraceRow {
  int k = 0;
  // |F|^2 at the measurement point: stochastic runs evaluate at the full
  // implicit update of delta, deterministic runs at the iterate (same point
  // when n = 1). Present exactly at multiples of metric_stride, and only when
  // the problem supports residual witnesses.
  std::optional<double> residual_sq;
  // Stochastic runs additionally report |F|^2 at the raw iterate (w^k, d^k).
  std::optional<double> residual_iterate_sq;
  std::optional<double> dist_w_sq;      // |w^k - w*|^2 when a solution is known
  std::optional<double> dist_delta_sq;  // |d^k - d*|^2
  double step_w_sq = 0.0;      // |w^k - w^{k-1}|^2 (0 at k = 0)
  double step_delta_sq = 0.0;  // |d^k - d^{k-1}|^2
  std::int64_t elapsed_ns = 0;
};

struct Trace {
  std::string solver_name;
  std::uint64_t seed = 0;
  SolverConfig config_echo;
  Vector w_start;
  BlockVector delta_start;
  std::vector<TraceRow> rows;
  SolverState final_state;

  // Filled only when SolverConfig::record_iterates: entry j is the state
  // after j iterations (entry 0 is the start point). q_history[j] is the
  // extrapolation term consumed by iteration j's w-update.
  std::vector<Vector> w_history;
  std::vector<BlockVector> delta_history;
  std::vector<Vector> q_history;
};

}  // namespace sihg
