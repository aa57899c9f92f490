#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cema/best_response.hpp"
#include "cema/scenario.hpp"

namespace cema {

/// The relaxed dispatch problem has no feasible point, or the relaxation is
/// not tight for this scenario.
class Infeasible : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bisection could not bracket or resolve the balancing price.
class SolverFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Total generation cost minus total consumer utility, P indexed by node.
double social_cost(const Scenario &s, std::span<const double> P);

/// Net supply minus demand when every agent best-responds (corrected
/// generator response) to one common price. Nondecreasing in lambda.
double balance_gap(const Scenario &s, double lambda);

struct CentralizedSolution {
  std::vector<double> P;
  double lambda = 0.0;
  double objective = 0.0;
  /// balance_gap at the returned price.
  double balance_residual = 0.0;
  double bracket_width = 0.0;
  std::size_t iterations = 0;
};

/// Solves the convex relaxation (net supply >= demand, boxes) by bisection on
/// the common price over [0, inf). Returns lambda = 0 when supply at zero price
/// already covers demand.
CentralizedSolution solve_centralized(const Scenario &s, double tol = 1e-10);

/// Residuals of the first-order optimality system of the relaxed problem.
/// Node-indexed vectors have one entry per node.
struct KktReport {
  double lambda = 0.0;
  std::vector<double> gamma;
  std::vector<double> nu;
  std::vector<double> stationarity;
  /// lambda * (demand - net supply).
  double balance_complementarity = 0.0;
  std::vector<double> lower_complementarity;
  std::vector<double> upper_complementarity;
  /// demand - net supply; feasible when <= 0.
  double balance_slack = 0.0;
  /// Amount by which each node leaves its box (0 inside).
  std::vector<double> box_violation;
  /// max(-lambda, 0).
  double dual_violation = 0.0;
  double max_residual = 0.0;
  bool certified = false;
};

/// Bound multipliers are recovered only at bounds within `tol` of P, chosen to
/// cancel stationarity and clamped at zero; whatever they cannot absorb stays
/// in the stationarity residual.
KktReport kkt_check(std::span<const double> P, double lambda, const Scenario &s, double tol);

/// Price each generator would need to be at the given dispatch, assuming an
/// interior solution: 2aP + b for `original`, (2aP + b) / (1 - 2BP) for
/// `corrected`. Takes generator powers only.
std::vector<double> implied_prices(std::span<const double> generator_P, const Scenario &s,
                                   Variant v);

double spread(std::span<const double> xs);

struct BruteForceResult {
  std::vector<double> P;
  double objective = 0.0;
  std::size_t points_evaluated = 0;
};

/// Independent reference for small cases (at most 3 generators): every
/// generator except the last runs over a grid of `grid_step`, the last one is
/// minimised by golden section, and consumers split the resulting net supply
/// at the price that clears it. Lexicographically smallest grid point wins
/// objective ties.
BruteForceResult brute_force_reference(const Scenario &s, double grid_step);

} // namespace cema
