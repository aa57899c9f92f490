#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cema/engine.hpp"
#include "cema/oracle.hpp"

namespace cema {

/// Loss-adjusted implied prices among interior generators must agree within
/// this for a fixed point to be called consistent.
inline constexpr double kPriceAgreementTol = 1e-3;

struct RunSummary {
  Variant variant = Variant::corrected;
  Termination terminated = Termination::by_max_iters;
  std::size_t rounds = 0;
  std::vector<double> lambda;
  std::vector<double> P;
  double mismatch = 0.0;
  double lambda_spread = 0.0;
  double max_abs_xi = 0.0;
  double max_conservation_error = 0.0;
  /// (2aP + b) / (1 - 2BP) for generators strictly inside their box.
  std::vector<double> interior_loss_adjusted_prices;
  bool prices_disagree = false;
};

RunSummary summarize(const Scenario &s, const RunResult &r);
std::string to_json(const RunSummary &summary);
std::string to_text(const RunSummary &summary);

std::string to_json(const KktReport &report);

enum class CounterexampleOutcome { exhibited, not_converged, no_contradiction };

struct CounterexampleThresholds {
  double min_price_spread = 0.1;
  double min_original_residual = 1e-2;
  double max_corrected_residual = 1e-4;
};

struct FixedPointAnalysis {
  RunSummary run;
  double consensus_price = 0.0;
  std::vector<double> raw_prices;
  std::vector<double> loss_adjusted_prices;
  KktReport kkt;
  double max_generator_stationarity = 0.0;
};

struct CounterexampleReport {
  CentralizedSolution oracle;
  double oracle_kkt_residual = 0.0;
  /// Raw marginal costs 2aP + b at the oracle optimum. A converged run of
  /// the original update equalises these, so a spread here means it cannot
  /// land on the optimum.
  std::vector<double> oracle_raw_prices;
  double oracle_raw_spread = 0.0;

  std::optional<std::vector<double>> reference_dispatch;
  std::vector<double> reference_raw_prices;
  double reference_raw_spread = 0.0;

  FixedPointAnalysis original;
  FixedPointAnalysis corrected;
  bool variants_coincide = false;
  CounterexampleThresholds thresholds;
  CounterexampleOutcome outcome = CounterexampleOutcome::no_contradiction;
  std::string verdict;
};

/// Runs both variants and the oracle, then checks that the original update
/// converges to a non-optimal point while the corrected one certifies.
/// `reference_dispatch`, when given, holds generator powers at which to
/// evaluate raw implied prices as well.
CounterexampleReport
analyze_counterexample(const Scenario &s,
                       std::optional<std::vector<double>> reference_dispatch = std::nullopt,
                       CounterexampleThresholds thresholds = {});

std::string to_json(const CounterexampleReport &report);
std::string to_text(const CounterexampleReport &report);

} // namespace cema
