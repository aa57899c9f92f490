#include "cema/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace cema {

double social_cost(const Scenario &s, std::span<const double> P) {
  if (P.size() != s.node_count())
    throw InvalidArgument("social_cost: expected one power per node");
  double total = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i)
    total += s.kind_of(i) == NodeKind::generator ? s.generator_at(i).cost(P[i])
                                                 : -s.consumer_at(i).utility(P[i]);
  return total;
}

double balance_gap(const Scenario &s, double lambda) {
  double gap = 0.0;
  for (const auto &g : s.generators)
    gap += net_injection_unchecked(g, generator_response_corrected(g, lambda));
  for (const auto &c : s.consumers)
    gap -= consumer_response(c, lambda);
  return gap;
}

namespace {

std::vector<double> responses_at(const Scenario &s, double lambda) {
  std::vector<double> P(s.node_count());
  for (std::size_t i = 0; i < P.size(); ++i)
    P[i] = s.kind_of(i) == NodeKind::generator
               ? generator_response_corrected(s.generator_at(i), lambda)
               : consumer_response(s.consumer_at(i), lambda);
  return P;
}

void require_solvable(const Scenario &s) {
  const auto cond = check_feasibility_condition(s);
  if (!cond.holds)
    throw Infeasible("minimum net generation exceeds maximum demand (slack " +
                     std::to_string(cond.slack) + "); relaxation is not tight");
  double max_supply = 0.0, min_demand = 0.0;
  for (const auto &g : s.generators)
    max_supply += net_injection_unchecked(g, g.p_max);
  for (const auto &c : s.consumers)
    min_demand += c.p_min;
  if (max_supply < min_demand)
    throw Infeasible("demand floor " + std::to_string(min_demand) +
                     " exceeds maximum net supply " + std::to_string(max_supply));
}

} // namespace

CentralizedSolution solve_centralized(const Scenario &s, double tol) {
  require_valid(s);
  require_solvable(s);
  if (!(tol > 0))
    throw InvalidArgument("solve_centralized: tolerance must be positive");

  CentralizedSolution sol;
  const double gap0 = balance_gap(s, 0.0);
  if (gap0 >= 0.0) {
    sol.P = responses_at(s, 0.0);
    sol.lambda = 0.0;
    sol.balance_residual = gap0;
    sol.objective = social_cost(s, sol.P);
    return sol;
  }

  double hi = 0.0;
  for (const auto &g : s.generators)
    hi = std::max(hi, g.marginal_cost(g.p_max) / (1.0 - 2.0 * g.B * g.p_max));
  for (const auto &c : s.consumers)
    hi = std::max(hi, c.w);
  int doublings = 0;
  while (balance_gap(s, hi) < 0.0) {
    if (++doublings > 200 || !std::isfinite(hi))
      throw SolverFailure("could not bracket the balancing price");
    hi *= 2.0;
  }

  double lo = 0.0;
  double mid = 0.5 * (lo + hi);
  double gap = balance_gap(s, mid);
  for (;;) {
    ++sol.iterations;
    if (gap < 0.0)
      lo = mid;
    else
      hi = mid;
    if (std::abs(gap) <= tol && hi - lo <= tol * std::max(1.0, mid))
      break;
    const double next = 0.5 * (lo + hi);
    if (next <= lo || next >= hi) {
      // Bracket exhausted at machine precision; keep the better end.
      const double glo = balance_gap(s, lo), ghi = balance_gap(s, hi);
      if (std::abs(glo) < std::abs(ghi)) {
        mid = lo;
        gap = glo;
      } else {
        mid = hi;
        gap = ghi;
      }
      break;
    }
    mid = next;
    gap = balance_gap(s, mid);
  }

  sol.lambda = mid;
  sol.P = responses_at(s, mid);
  sol.balance_residual = gap;
  sol.bracket_width = hi - lo;
  sol.objective = social_cost(s, sol.P);
  return sol;
}

KktReport kkt_check(std::span<const double> P, double lambda, const Scenario &s, double tol) {
  const std::size_t n = s.node_count();
  if (P.size() != n)
    throw InvalidArgument("kkt_check: expected one power per node");

  KktReport r;
  r.lambda = lambda;
  r.gamma.assign(n, 0.0);
  r.nu.assign(n, 0.0);
  r.stationarity.assign(n, 0.0);
  r.lower_complementarity.assign(n, 0.0);
  r.upper_complementarity.assign(n, 0.0);
  r.box_violation.assign(n, 0.0);

  double demand = 0.0, supply = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = s.p_min(i), hi = s.p_max(i);
    // Derivative of the Lagrangian without the bound multipliers.
    double grad;
    if (s.kind_of(i) == NodeKind::generator) {
      const auto &g = s.generator_at(i);
      grad = g.marginal_cost(P[i]) - lambda * (1.0 - 2.0 * g.B * P[i]);
      supply += net_injection_unchecked(g, P[i]);
    } else {
      grad = lambda - s.consumer_at(i).marginal_utility(P[i]);
      demand += P[i];
    }

    double gamma = 0.0, nu = 0.0;
    if (std::abs(P[i] - lo) <= tol)
      gamma = std::max(grad, 0.0);
    if (std::abs(P[i] - hi) <= tol)
      nu = std::max(-(grad - gamma), 0.0);
    r.gamma[i] = gamma;
    r.nu[i] = nu;
    r.stationarity[i] = grad - gamma + nu;
    r.lower_complementarity[i] = gamma * (lo - P[i]);
    r.upper_complementarity[i] = nu * (P[i] - hi);
    r.box_violation[i] = std::max({lo - P[i], P[i] - hi, 0.0});
  }
  r.balance_slack = demand - supply;
  r.balance_complementarity = lambda * r.balance_slack;
  r.dual_violation = std::max(-lambda, 0.0);

  double worst = std::max({std::abs(r.balance_complementarity), std::max(r.balance_slack, 0.0),
                           r.dual_violation});
  for (std::size_t i = 0; i < n; ++i)
    worst = std::max({worst, std::abs(r.stationarity[i]), std::abs(r.lower_complementarity[i]),
                      std::abs(r.upper_complementarity[i]), r.box_violation[i]});
  if (!std::isfinite(lambda))
    worst = std::numeric_limits<double>::infinity();
  r.max_residual = worst;
  r.certified = worst <= tol;
  return r;
}

std::vector<double> implied_prices(std::span<const double> generator_P, const Scenario &s,
                                   Variant v) {
  if (generator_P.size() != s.generators.size())
    throw InvalidArgument("implied_prices: expected one power per generator");
  std::vector<double> out(generator_P.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto &g = s.generators[i];
    out[i] = g.marginal_cost(generator_P[i]);
    if (v == Variant::corrected)
      out[i] /= 1.0 - 2.0 * g.B * generator_P[i];
  }
  return out;
}

double spread(std::span<const double> xs) {
  if (xs.empty())
    return 0.0;
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  return *hi - *lo;
}

namespace {

struct ConsumerSplit {
  std::vector<double> P;
  double utility = 0.0;
};

/// Welfare-maximising consumer allocation for a given net supply: the price mu
/// at which total consumer demand falls to the supply (0 if demand at zero
/// price already fits).
std::optional<ConsumerSplit> split_supply(const Scenario &s, double supply) {
  const auto demand = [&](double mu) {
    double d = 0.0;
    for (const auto &c : s.consumers)
      d += consumer_response(c, mu);
    return d;
  };
  double floor = 0.0, top = 0.0;
  for (const auto &c : s.consumers) {
    floor += c.p_min;
    top = std::max(top, c.w);
  }
  if (supply < floor)
    return std::nullopt;

  double mu = 0.0;
  if (demand(0.0) > supply) {
    double lo = 0.0, hi = top;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi)
        break;
      (demand(mid) > supply ? lo : hi) = mid;
    }
    mu = hi;
  }
  ConsumerSplit out;
  for (const auto &c : s.consumers) {
    const double p = consumer_response(c, mu);
    out.P.push_back(p);
    out.utility += c.utility(p);
  }
  return out;
}

/// Smallest P in the box with net_injection(P) >= target, if any.
std::optional<double> min_power_for(const GeneratorParams &g, double target) {
  if (net_injection_unchecked(g, g.p_min) >= target)
    return g.p_min;
  if (net_injection_unchecked(g, g.p_max) < target)
    return std::nullopt;
  const double disc = std::max(0.0, 1.0 - 4.0 * g.B * target);
  double P = 2.0 * target / (1.0 + std::sqrt(disc));
  P = std::clamp(P, g.p_min, g.p_max);
  for (int i = 0; i < 64 && net_injection_unchecked(g, P) < target; ++i)
    P = std::nextafter(P, g.p_max);
  return P;
}

struct InnerResult {
  double P = 0.0;
  double value = std::numeric_limits<double>::infinity();
  std::vector<double> consumers;
};

/// Minimises C(P) - U*(fixed_net + net(P)) over the last generator's feasible
/// interval, U* being the best consumer utility for that supply.
std::optional<InnerResult> optimise_last(const Scenario &s, const GeneratorParams &g,
                                         double fixed_net, double consumer_floor) {
  const auto lower = min_power_for(g, consumer_floor - fixed_net);
  if (!lower)
    return std::nullopt;

  const auto eval = [&](double P) -> std::optional<InnerResult> {
    const auto split = split_supply(s, fixed_net + net_injection_unchecked(g, P));
    if (!split)
      return std::nullopt;
    return InnerResult{P, g.cost(P) - split->utility, split->P};
  };

  double a = *lower, b = g.p_max;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  auto f1 = eval(x1), f2 = eval(x2);
  const auto value = [](const std::optional<InnerResult> &r) {
    return r ? r->value : std::numeric_limits<double>::infinity();
  };
  for (int it = 0; it < 200 && b - a > 1e-10 * std::max(1.0, std::abs(a)); ++it) {
    if (value(f1) <= value(f2)) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = eval(x2);
    }
  }

  std::optional<InnerResult> best;
  for (double P : {*lower, x1, x2, g.p_max}) {
    auto r = eval(P);
    if (r && (!best || r->value < best->value))
      best = std::move(r);
  }
  return best;
}

std::vector<double> grid_for(const GeneratorParams &g, double step) {
  std::vector<double> pts;
  for (std::size_t k = 0;; ++k) {
    const double P = g.p_min + static_cast<double>(k) * step;
    if (P > g.p_max)
      break;
    pts.push_back(P);
  }
  if (pts.back() < g.p_max)
    pts.push_back(g.p_max);
  return pts;
}

/// Odometer over the grid, last coordinate fastest.
bool advance(std::vector<std::size_t> &idx, const std::vector<std::vector<double>> &grids) {
  for (std::size_t d = idx.size(); d-- > 0;) {
    if (++idx[d] < grids[d].size())
      return true;
    idx[d] = 0;
  }
  return false;
}

} // namespace

BruteForceResult brute_force_reference(const Scenario &s, double grid_step) {
  require_valid(s);
  if (s.generators.size() > 3)
    throw InvalidArgument("brute_force_reference supports at most 3 generators");
  if (!(grid_step > 0) || !std::isfinite(grid_step))
    throw InvalidArgument("grid_step must be positive");

  const std::size_t ng = s.generators.size();
  std::vector<std::vector<double>> grids;
  for (std::size_t i = 0; i + 1 < ng; ++i)
    grids.push_back(grid_for(s.generators[i], grid_step));

  double consumer_floor = 0.0;
  for (const auto &c : s.consumers)
    consumer_floor += c.p_min;

  BruteForceResult best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(grids.size(), 0);
  do {
    double fixed_net = 0.0, fixed_cost = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double P = grids[i][idx[i]];
      fixed_net += net_injection_unchecked(s.generators[i], P);
      fixed_cost += s.generators[i].cost(P);
    }
    ++best.points_evaluated;
    if (auto inner = optimise_last(s, s.generators.back(), fixed_net, consumer_floor)) {
      const double obj = fixed_cost + inner->value;
      if (obj < best.objective) {
        best.objective = obj;
        best.P.clear();
        for (std::size_t i = 0; i < idx.size(); ++i)
          best.P.push_back(grids[i][idx[i]]);
        best.P.push_back(inner->P);
        best.P.insert(best.P.end(), inner->consumers.begin(), inner->consumers.end());
      }
    }

  } while (advance(idx, grids));

  if (best.P.empty())
    throw Infeasible("no feasible grid point");
  return best;
}

} // namespace cema
