#include "cema/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace cema {

const char *to_string(Termination t) {
  switch (t) {
  case Termination::by_tolerance:
    return "by-tolerance";
  case Termination::by_max_iters:
    return "by-max-iters";
  case Termination::diverged:
    return "diverged";
  }
  return "unknown";
}

namespace {

void require_size(std::size_t got, std::size_t want, const char *what) {
  if (got != want)
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(want) +
                          " entries, got " + std::to_string(got));
}

IterationRecord make_record(std::size_t k, const std::vector<NodeState> &nodes,
                            const Scenario &s) {
  IterationRecord rec;
  rec.k = k;
  rec.nodes = nodes;
  rec.mismatch = mismatch(nodes, s);
  double lo = nodes.front().lambda, hi = lo;
  for (const auto &n : nodes) {
    lo = std::min(lo, n.lambda);
    hi = std::max(hi, n.lambda);
    rec.max_abs_xi = std::max(rec.max_abs_xi, std::abs(n.xi));
    rec.xi_sum += n.xi;
  }
  rec.lambda_spread = hi - lo;
  return rec;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

} // namespace

std::vector<double> lambda_step(std::span<const NodeState> states, const Matrix &W, double eta) {
  const std::size_t n = states.size();
  require_size(W.size(), n, "lambda_step weight matrix");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc += W(i, j) * states[j].lambda;
    out[i] = acc + eta * states[i].xi;
  }
  return out;
}

std::vector<double> power_step(std::span<const NodeState> states, const Scenario &s, Variant v,
                               std::span<const double> new_lambdas) {
  const std::size_t n = s.node_count();
  require_size(states.size(), n, "power_step states");
  require_size(new_lambdas.size(), n, "power_step prices");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = s.kind_of(i) == NodeKind::generator
                 ? generator_response(s.generator_at(i), new_lambdas[i], v)
                 : consumer_response(s.consumer_at(i), new_lambdas[i]);
  return out;
}

std::vector<double> surplus_step(std::span<const NodeState> states, const Scenario &s,
                                 const Matrix &Q, std::span<const double> old_P,
                                 std::span<const double> new_P) {
  const std::size_t n = s.node_count();
  require_size(states.size(), n, "surplus_step states");
  require_size(Q.size(), n, "surplus_step weight matrix");
  require_size(old_P.size(), n, "surplus_step old powers");
  require_size(new_P.size(), n, "surplus_step new powers");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc += Q(i, j) * states[j].xi;
    if (s.kind_of(i) == NodeKind::generator) {
      const auto &g = s.generator_at(i);
      acc += net_injection_unchecked(g, old_P[i]) - net_injection_unchecked(g, new_P[i]);
    } else {
      acc += new_P[i] - old_P[i];
    }
    out[i] = acc;
  }
  return out;
}

double mismatch(std::span<const NodeState> states, const Scenario &s) {
  const std::size_t n = std::min(states.size(), s.node_count());
  double demand = 0.0, supply = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.kind_of(i) == NodeKind::generator)
      supply += net_injection_unchecked(s.generator_at(i), states[i].P);
    else
      demand += states[i].P;
  }
  return demand - supply;
}

std::vector<NodeState> initial_states(const Scenario &s) {
  std::vector<NodeState> states(s.node_count());
  for (std::size_t i = 0; i < states.size(); ++i)
    states[i].lambda = s.kind_of(i) == NodeKind::generator ? lambda_init(s.generator_at(i))
                                                           : lambda_init(s.consumer_at(i));
  return states;
}

RunResult run(const Scenario &s, Variant v, const RunOptions &opts) {
  require_valid(s);
  const std::size_t stride = std::max<std::size_t>(1, opts.trace_stride);
  const std::size_t n = s.node_count();

  RunResult result;
  result.variant = v;
  std::vector<NodeState> states = initial_states(s);
  result.trace.push_back(make_record(0, states, s));

  std::vector<double> old_P(n);
  for (std::size_t k = 1; k <= s.max_iters; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      old_P[i] = states[i].P;

    const auto lambdas = lambda_step(states, s.weights.W, s.eta);
    bool finite = std::all_of(lambdas.begin(), lambdas.end(), [](double x) { return std::isfinite(x); });
    if (!finite) {
      result.terminated = Termination::diverged;
      break;
    }
    const auto powers = power_step(states, s, v, lambdas);
    const auto surpluses = surplus_step(states, s, s.weights.Q, old_P, powers);

    bool converged = true;
    bool diverged = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(lambdas[i] - states[i].lambda) > s.eps_l || std::abs(surpluses[i]) > s.eps_m)
        converged = false;
      if (!std::isfinite(surpluses[i]) || std::abs(surpluses[i]) > kDivergenceBound)
        diverged = true;
      states[i] = {lambdas[i], powers[i], surpluses[i]};
    }
    result.rounds = k;

    const IterationRecord rec = make_record(k, states, s);
    result.max_conservation_error =
        std::max(result.max_conservation_error, std::abs(rec.xi_sum - rec.mismatch));

    if (diverged)
      result.terminated = Termination::diverged;
    else if (converged)
      result.terminated = Termination::by_tolerance;
    const bool last = diverged || converged || k == s.max_iters;
    if (last || k % stride == 0)
      result.trace.push_back(rec);
    if (diverged || converged)
      break;
  }
  result.final_states = std::move(states);
  return result;
}

void write_trace_csv(std::ostream &os, const Scenario &s, const RunResult &r) {
  os << "k,node_id,kind,lambda,P,xi\n";
  for (const auto &rec : r.trace)
    for (std::size_t i = 0; i < rec.nodes.size(); ++i) {
      const auto &n = rec.nodes[i];
      os << rec.k << ',' << i << ',' << to_string(s.kind_of(i)) << ',' << num(n.lambda) << ','
         << num(n.P) << ',' << num(n.xi) << '\n';
    }
}

void write_round_summary_csv(std::ostream &os, const RunResult &r) {
  os << "k,mismatch,lambda_spread,max_abs_xi\n";
  for (const auto &rec : r.trace)
    os << rec.k << ',' << num(rec.mismatch) << ',' << num(rec.lambda_spread) << ','
       << num(rec.max_abs_xi) << '\n';
}

double consensus_price(const RunResult &r) {
  if (r.final_states.empty())
    return 0.0;
  double sum = 0.0;
  for (const auto &n : r.final_states)
    sum += n.lambda;
  return sum / static_cast<double>(r.final_states.size());
}

} // namespace cema
