#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "cema/best_response.hpp"
#include "cema/scenario.hpp"

namespace cema {

struct NodeState {
  double lambda = 0.0;
  double P = 0.0;
  double xi = 0.0;

  friend bool operator==(const NodeState &, const NodeState &) = default;
};

struct IterationRecord {
  std::size_t k = 0;
  std::vector<NodeState> nodes;
  /// Demand minus net supply.
  double mismatch = 0.0;
  double lambda_spread = 0.0;
  double max_abs_xi = 0.0;
  double xi_sum = 0.0;
};

enum class Termination { by_tolerance, by_max_iters, diverged };

const char *to_string(Termination t);

struct RunResult {
  Variant variant = Variant::corrected;
  Termination terminated = Termination::by_max_iters;
  std::size_t rounds = 0;
  std::vector<IterationRecord> trace;
  std::vector<NodeState> final_states;
  /// Largest |sum xi - mismatch| seen over rounds k >= 1, recorded or not.
  double max_conservation_error = 0.0;
};

struct RunOptions {
  /// Record every `trace_stride`-th round; round 0 and the final round are
  /// always recorded.
  std::size_t trace_stride = 1;
};

/// |xi| above this (or any non-finite value) stops the run as diverged.
inline constexpr double kDivergenceBound = 1e9;

/// lambda_i(k+1) = sum_j W_ij lambda_j(k) + eta xi_i(k), from one snapshot.
std::vector<double> lambda_step(std::span<const NodeState> states, const Matrix &W, double eta);

/// Best responses to the freshly mixed prices.
std::vector<double> power_step(std::span<const NodeState> states, const Scenario &s, Variant v,
                               std::span<const double> new_lambdas);

/// Column-stochastic surplus mixing plus each node's change in its own
/// contribution to the balance.
std::vector<double> surplus_step(std::span<const NodeState> states, const Scenario &s,
                                 const Matrix &Q, std::span<const double> old_P,
                                 std::span<const double> new_P);

/// Demand minus net supply. Uses the unchecked loss formula so the P = 0
/// initial state is accepted.
double mismatch(std::span<const NodeState> states, const Scenario &s);

std::vector<NodeState> initial_states(const Scenario &s);

RunResult run(const Scenario &s, Variant v, const RunOptions &opts = {});

/// `k,node_id,kind,lambda,P,xi`, one row per recorded round and node.
void write_trace_csv(std::ostream &os, const Scenario &s, const RunResult &r);
/// `k,mismatch,lambda_spread,max_abs_xi`, one row per recorded round.
void write_round_summary_csv(std::ostream &os, const RunResult &r);

/// Mean of the final prices; the consensus value when the run converged.
double consensus_price(const RunResult &r);

} // namespace cema
