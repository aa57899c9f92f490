#include "cema/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace cema {

using nlohmann::json;

namespace {

constexpr double kFixedPointKktTol = 1e-4;

std::string num(double x, int digits = 10) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string list(const std::vector<double> &xs, int digits = 10) {
  std::string out = "(";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i)
      out += ", ";
    out += num(xs[i], digits);
  }
  return out + ")";
}

std::vector<double> generator_part(const Scenario &s, const std::vector<double> &P) {
  return {P.begin(), P.begin() + static_cast<std::ptrdiff_t>(s.generators.size())};
}

json summary_json(const RunSummary &r) {
  return {{"variant", to_string(r.variant)},
          {"terminated", to_string(r.terminated)},
          {"rounds", r.rounds},
          {"lambda", r.lambda},
          {"P", r.P},
          {"mismatch", r.mismatch},
          {"lambda_spread", r.lambda_spread},
          {"max_abs_xi", r.max_abs_xi},
          {"max_conservation_error", r.max_conservation_error},
          {"interior_loss_adjusted_prices", r.interior_loss_adjusted_prices},
          {"prices_disagree", r.prices_disagree}};
}

json kkt_json(const KktReport &r) {
  return {{"lambda", r.lambda},
          {"gamma", r.gamma},
          {"nu", r.nu},
          {"stationarity", r.stationarity},
          {"balance_complementarity", r.balance_complementarity},
          {"lower_complementarity", r.lower_complementarity},
          {"upper_complementarity", r.upper_complementarity},
          {"balance_slack", r.balance_slack},
          {"box_violation", r.box_violation},
          {"dual_violation", r.dual_violation},
          {"max_residual", r.max_residual},
          {"certified", r.certified}};
}

const char *to_string(CounterexampleOutcome o) {
  switch (o) {
  case CounterexampleOutcome::exhibited:
    return "exhibited";
  case CounterexampleOutcome::not_converged:
    return "not-converged";
  case CounterexampleOutcome::no_contradiction:
    return "no-contradiction";
  }
  return "unknown";
}

FixedPointAnalysis analyze_fixed_point(const Scenario &s, Variant v) {
  FixedPointAnalysis fp;
  const RunResult r = run(s, v);
  fp.run = summarize(s, r);
  fp.consensus_price = consensus_price(r);
  const auto gen_P = generator_part(s, fp.run.P);
  fp.raw_prices = implied_prices(gen_P, s, Variant::original);
  fp.loss_adjusted_prices = implied_prices(gen_P, s, Variant::corrected);
  fp.kkt = kkt_check(fp.run.P, fp.consensus_price, s, kFixedPointKktTol);
  for (std::size_t i = 0; i < s.generators.size(); ++i)
    fp.max_generator_stationarity =
        std::max(fp.max_generator_stationarity, std::abs(fp.kkt.stationarity[i]));
  return fp;
}

json fixed_point_json(const FixedPointAnalysis &fp) {
  return {{"run", summary_json(fp.run)},
          {"consensus_price", fp.consensus_price},
          {"raw_implied_prices", fp.raw_prices},
          {"raw_implied_spread", spread(fp.raw_prices)},
          {"loss_adjusted_implied_prices", fp.loss_adjusted_prices},
          {"loss_adjusted_implied_spread", spread(fp.loss_adjusted_prices)},
          {"max_generator_stationarity", fp.max_generator_stationarity},
          {"kkt", kkt_json(fp.kkt)}};
}

} // namespace

RunSummary summarize(const Scenario &s, const RunResult &r) {
  RunSummary out;
  out.variant = r.variant;
  out.terminated = r.terminated;
  out.rounds = r.rounds;
  out.max_conservation_error = r.max_conservation_error;
  for (const auto &n : r.final_states) {
    out.lambda.push_back(n.lambda);
    out.P.push_back(n.P);
  }
  if (!r.trace.empty()) {
    const auto &last = r.trace.back();
    out.mismatch = last.mismatch;
    out.lambda_spread = last.lambda_spread;
    out.max_abs_xi = last.max_abs_xi;
  }
  for (std::size_t i = 0; i < s.generators.size() && i < out.P.size(); ++i) {
    const auto &g = s.generators[i];
    const double P = out.P[i];
    if (P > g.p_min && P < g.p_max)
      out.interior_loss_adjusted_prices.push_back(g.marginal_cost(P) / (1.0 - 2.0 * g.B * P));
  }
  out.prices_disagree = spread(out.interior_loss_adjusted_prices) > kPriceAgreementTol;
  return out;
}

std::string to_json(const RunSummary &summary) { return summary_json(summary).dump(2) + "\n"; }

std::string to_text(const RunSummary &r) {
  std::ostringstream os;
  os << "variant:        " << to_string(r.variant) << "\n"
     << "terminated:     " << to_string(r.terminated) << " after " << r.rounds << " rounds\n"
     << "final lambda:   " << list(r.lambda) << "\n"
     << "final P:        " << list(r.P) << "\n"
     << "mismatch:       " << num(r.mismatch) << "\n"
     << "lambda spread:  " << num(r.lambda_spread) << "\n"
     << "max |xi|:       " << num(r.max_abs_xi) << "\n";
  if (r.prices_disagree)
    os << "diagnostic:     implied generator prices disagree: loss-adjusted marginal costs "
       << list(r.interior_loss_adjusted_prices, 6) << " differ by "
       << num(spread(r.interior_loss_adjusted_prices), 4)
       << "; this fixed point is not the dispatch optimum\n";
  return os.str();
}

std::string to_json(const KktReport &report) { return kkt_json(report).dump(2) + "\n"; }

CounterexampleReport analyze_counterexample(const Scenario &s,
                                            std::optional<std::vector<double>> reference_dispatch,
                                            CounterexampleThresholds thresholds) {
  require_valid(s);
  CounterexampleReport rep;
  rep.thresholds = thresholds;

  rep.oracle = solve_centralized(s);
  rep.oracle_kkt_residual = kkt_check(rep.oracle.P, rep.oracle.lambda, s, 1e-6).max_residual;
  rep.oracle_raw_prices = implied_prices(generator_part(s, rep.oracle.P), s, Variant::original);
  rep.oracle_raw_spread = spread(rep.oracle_raw_prices);

  if (reference_dispatch) {
    rep.reference_raw_prices = implied_prices(*reference_dispatch, s, Variant::original);
    rep.reference_raw_spread = spread(rep.reference_raw_prices);
    rep.reference_dispatch = std::move(reference_dispatch);
  }

  rep.original = analyze_fixed_point(s, Variant::original);
  rep.corrected = analyze_fixed_point(s, Variant::corrected);
  rep.variants_coincide = std::all_of(s.generators.begin(), s.generators.end(),
                                      [](const GeneratorParams &g) { return g.B == 0.0; });

  const bool both_converged = rep.original.run.terminated == Termination::by_tolerance &&
                              rep.corrected.run.terminated == Termination::by_tolerance;
  if (rep.variants_coincide) {
    rep.outcome = CounterexampleOutcome::no_contradiction;
    rep.verdict = "variants coincide; no contradiction (every loss coefficient is zero)";
  } else if (!both_converged) {
    rep.outcome = CounterexampleOutcome::not_converged;
    rep.verdict = std::string("a variant failed to converge (original: ") +
                  to_string(rep.original.run.terminated) +
                  ", corrected: " + to_string(rep.corrected.run.terminated) + ")";
  } else {
    const bool spread_ok = rep.oracle_raw_spread >= thresholds.min_price_spread;
    const bool original_bad =
        rep.original.max_generator_stationarity >= thresholds.min_original_residual;
    const bool corrected_ok = rep.corrected.kkt.max_residual <= thresholds.max_corrected_residual;
    if (spread_ok && original_bad && corrected_ok) {
      rep.outcome = CounterexampleOutcome::exhibited;
      rep.verdict = "contradiction exhibited: the original update reaches price consensus at a "
                    "dispatch that violates generator stationarity, while the corrected update "
                    "reaches a certified optimum";
    } else {
      rep.outcome = CounterexampleOutcome::no_contradiction;
      rep.verdict = std::string("no contradiction: oracle raw-price spread ") +
                    num(rep.oracle_raw_spread, 4) + (spread_ok ? " (ok)" : " (too small)") +
                    ", original stationarity residual " +
                    num(rep.original.max_generator_stationarity, 4) +
                    (original_bad ? " (ok)" : " (too small)") + ", corrected KKT residual " +
                    num(rep.corrected.kkt.max_residual, 4) +
                    (corrected_ok ? " (ok)" : " (too large)");
    }
  }
  return rep;
}

std::string to_json(const CounterexampleReport &rep) {
  json doc;
  doc["outcome"] = to_string(rep.outcome);
  doc["verdict"] = rep.verdict;
  doc["variants_coincide"] = rep.variants_coincide;
  doc["thresholds"] = {{"min_price_spread", rep.thresholds.min_price_spread},
                       {"min_original_residual", rep.thresholds.min_original_residual},
                       {"max_corrected_residual", rep.thresholds.max_corrected_residual}};
  doc["oracle"] = {{"P", rep.oracle.P},
                   {"lambda", rep.oracle.lambda},
                   {"objective", rep.oracle.objective},
                   {"kkt_max_residual", rep.oracle_kkt_residual},
                   {"raw_implied_prices", rep.oracle_raw_prices},
                   {"raw_implied_spread", rep.oracle_raw_spread}};
  if (rep.reference_dispatch)
    doc["reference"] = {{"generator_P", *rep.reference_dispatch},
                        {"raw_implied_prices", rep.reference_raw_prices},
                        {"raw_implied_spread", rep.reference_raw_spread}};
  doc["original"] = fixed_point_json(rep.original);
  doc["corrected"] = fixed_point_json(rep.corrected);
  return doc.dump(2) + "\n";
}

std::string to_text(const CounterexampleReport &rep) {
  std::ostringstream os;
  os << "== centralized optimum ==\n"
     << "lambda*:                  " << num(rep.oracle.lambda) << "\n"
     << "P*:                       " << list(rep.oracle.P) << "\n"
     << "objective:                " << num(rep.oracle.objective) << "\n"
     << "KKT max residual:         " << num(rep.oracle_kkt_residual, 4) << "\n"
     << "raw prices 2aP+b at P*:   " << list(rep.oracle_raw_prices, 6) << " spread "
     << num(rep.oracle_raw_spread, 4) << "\n";
  if (rep.reference_dispatch)
    os << "raw prices at reference " << list(*rep.reference_dispatch, 6) << ": "
       << list(rep.reference_raw_prices, 3) << " spread " << num(rep.reference_raw_spread, 4)
       << "\n";

  const auto section = [&](const char *title, const FixedPointAnalysis &fp) {
    os << "\n== " << title << " ==\n"
       << "terminated:               " << to_string(fp.run.terminated) << " after "
       << fp.run.rounds << " rounds\n"
       << "consensus price:          " << num(fp.consensus_price) << "\n"
       << "P:                        " << list(fp.run.P) << "\n"
       << "mismatch:                 " << num(fp.run.mismatch, 4) << "\n"
       << "raw implied prices:       " << list(fp.raw_prices, 6) << " spread "
       << num(spread(fp.raw_prices), 4) << "\n"
       << "loss-adjusted prices:     " << list(fp.loss_adjusted_prices, 6) << " spread "
       << num(spread(fp.loss_adjusted_prices), 4) << "\n"
       << "generator stationarity:   "
       << list(std::vector<double>(fp.kkt.stationarity.begin(),
                                   fp.kkt.stationarity.begin() +
                                       static_cast<std::ptrdiff_t>(fp.raw_prices.size())),
               4)
       << "\n"
       << "KKT max residual:         " << num(fp.kkt.max_residual, 4) << "\n";
  };
  section("original update", rep.original);
  section("corrected update", rep.corrected);
  os << "\nverdict: " << rep.verdict << "\n";
  return os.str();
}

} // namespace cema
