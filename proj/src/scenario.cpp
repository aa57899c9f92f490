#include "cema/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

namespace cema {

double ConsumerParams::utility(double P) const {
  if (P <= saturation())
    return w * P - alpha * P * P;
  return w * w / (4.0 * alpha);
}

double ConsumerParams::marginal_utility(double P) const {
  if (P <= saturation())
    return w - 2.0 * alpha * P;
  return 0.0;
}

const char *to_string(NodeKind kind) {
  return kind == NodeKind::generator ? "generator" : "consumer";
}

bool Digraph::has_edge(std::size_t from, std::size_t to) const {
  return std::find(edges.begin(), edges.end(), std::pair{from, to}) != edges.end();
}

bool Digraph::has_self_loops() const {
  for (std::size_t i = 0; i < n; ++i)
    if (!has_edge(i, i))
      return false;
  return true;
}

namespace {

std::vector<bool> reachable_from(const Digraph &g, std::size_t start, bool reverse) {
  std::vector<bool> seen(g.n, false);
  std::vector<std::size_t> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (const auto &[from, to] : g.edges) {
      const std::size_t src = reverse ? to : from;
      const std::size_t dst = reverse ? from : to;
      if (src == u && dst < g.n && !seen[dst]) {
        seen[dst] = true;
        stack.push_back(dst);
      }
    }
  }
  return seen;
}

} // namespace

bool Digraph::strongly_connected() const {
  if (n == 0)
    return false;
  const auto fwd = reachable_from(*this, 0, false);
  const auto bwd = reachable_from(*this, 0, true);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

double Matrix::row_sum(std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < n_; ++j)
    s += (*this)(i, j);
  return s;
}

double Matrix::col_sum(std::size_t j) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i)
    s += (*this)(i, j);
  return s;
}

double Scenario::p_min(std::size_t node) const {
  return kind_of(node) == NodeKind::generator ? generator_at(node).p_min
                                              : consumer_at(node).p_min;
}

double Scenario::p_max(std::size_t node) const {
  return kind_of(node) == NodeKind::generator ? generator_at(node).p_max
                                              : consumer_at(node).p_max;
}

namespace {

constexpr double kStochasticTol = 1e-12;

class ViolationSink {
public:
  void add(long node, std::string rule, std::string message) {
    out_.push_back({node, std::move(rule), std::move(message)});
  }
  std::vector<Violation> take() {
    std::stable_sort(out_.begin(), out_.end(), [](const Violation &l, const Violation &r) {
      return std::tie(l.node, l.rule) < std::tie(r.node, r.rule);
    });
    return std::move(out_);
  }

private:
  std::vector<Violation> out_;
};

bool finite_all(std::initializer_list<double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

void check_generator(ViolationSink &sink, long node, const GeneratorParams &g) {
  if (!finite_all({g.a, g.b, g.c, g.B, g.p_min, g.p_max})) {
    sink.add(node, "finite", "generator parameters must be finite");
    return;
  }
  if (!(g.a > 0))
    sink.add(node, "a>0", "cost curvature a must be positive, got " + fmt(g.a));
  if (!(g.B >= 0))
    sink.add(node, "B>=0", "loss coefficient B must be nonnegative, got " + fmt(g.B));
  if (!(g.p_min > 0))
    sink.add(node, "p_min>0", "p_min must be positive, got " + fmt(g.p_min));
  if (!(g.p_min <= g.p_max))
    sink.add(node, "p_min<=p_max", "p_min " + fmt(g.p_min) + " exceeds p_max " + fmt(g.p_max));
  if (!(g.B * g.p_max < 1.0))
    sink.add(node, "B·p_max<1", "B·p_max = " + fmt(g.B * g.p_max) + " must be < 1");
  if (!(2.0 * g.B * g.p_max < 1.0))
    sink.add(node, "2B·p_max<1",
             "2B·p_max ≥ 1 (got " + fmt(2.0 * g.B * g.p_max) + "); net injection not monotone");
}

void check_consumer(ViolationSink &sink, long node, const ConsumerParams &c) {
  if (!finite_all({c.w, c.alpha, c.p_min, c.p_max})) {
    sink.add(node, "finite", "consumer parameters must be finite");
    return;
  }
  if (!(c.w > 0))
    sink.add(node, "w>0", "utility intercept w must be positive, got " + fmt(c.w));
  if (!(c.alpha > 0))
    sink.add(node, "alpha>0", "utility curvature alpha must be positive, got " + fmt(c.alpha));
  if (!(c.p_min > 0))
    sink.add(node, "p_min>0", "p_min must be positive, got " + fmt(c.p_min));
  if (!(c.p_min <= c.p_max))
    sink.add(node, "p_min<=p_max", "p_min " + fmt(c.p_min) + " exceeds p_max " + fmt(c.p_max));
}

void check_weights(ViolationSink &sink, const Scenario &s) {
  const std::size_t n = s.node_count();
  const auto &W = s.weights.W;
  const auto &Q = s.weights.Q;
  if (W.size() != n || Q.size() != n) {
    sink.add(-1, "weights-size", "weight matrices must be " + std::to_string(n) + "x" +
                                     std::to_string(n));
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const long node = static_cast<long>(i);
    if (std::abs(W.row_sum(i) - 1.0) > kStochasticTol)
      sink.add(node, "W-row-stochastic", "row " + std::to_string(i) + " of W sums to " +
                                             fmt(W.row_sum(i)));
    if (std::abs(Q.col_sum(i) - 1.0) > kStochasticTol)
      sink.add(node, "Q-column-stochastic", "column " + std::to_string(i) + " of Q sums to " +
                                                fmt(Q.col_sum(i)));
    for (std::size_t j = 0; j < n; ++j) {
      const bool allowed = i == j || s.graph.has_edge(j, i);
      if (!std::isfinite(W(i, j)) || W(i, j) < 0 || (W(i, j) > 0 && !allowed))
        sink.add(node, "W-support", "W[" + std::to_string(i) + "][" + std::to_string(j) +
                                        "] must be nonnegative and supported by an edge");
      if (!std::isfinite(Q(i, j)) || Q(i, j) < 0 || (Q(i, j) > 0 && !allowed))
        sink.add(node, "Q-support", "Q[" + std::to_string(i) + "][" + std::to_string(j) +
                                        "] must be nonnegative and supported by an edge");
    }
  }
}

} // namespace

std::vector<Violation> validate_scenario(const Scenario &s) {
  ViolationSink sink;
  const std::size_t n = s.node_count();

  if (s.generators.empty())
    sink.add(-1, "generators", "at least one generator is required");
  if (s.consumers.empty())
    sink.add(-1, "consumers", "at least one consumer is required");
  if (!(s.eta > 0 && s.eta < 1))
    sink.add(-1, "eta", "eta must lie in (0, 1), got " + fmt(s.eta));
  if (!(s.eps_m > 0) || !std::isfinite(s.eps_m))
    sink.add(-1, "eps_m", "eps_m must be positive");
  if (!(s.eps_l > 0) || !std::isfinite(s.eps_l))
    sink.add(-1, "eps_l", "eps_l must be positive");
  if (s.max_iters == 0)
    sink.add(-1, "max_iters", "max_iters must be positive");

  bool graph_ok = true;
  if (s.graph.n != n) {
    sink.add(-1, "graph-size", "graph has " + std::to_string(s.graph.n) + " nodes, scenario has " +
                                   std::to_string(n));
    graph_ok = false;
  } else if (s.graph.kinds.size() != n) {
    sink.add(-1, "graph-kinds", "graph kinds list has wrong length");
    graph_ok = false;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (s.graph.kinds[i] != s.kind_of(i))
        sink.add(static_cast<long>(i), "node-kind",
                 std::string("node kind must be ") + to_string(s.kind_of(i)) +
                     " (generators first, then consumers)");
  }
  for (const auto &[from, to] : s.graph.edges)
    if (from >= s.graph.n || to >= s.graph.n) {
      sink.add(-1, "edge-range", "edge (" + std::to_string(from) + "," + std::to_string(to) +
                                     ") references a missing node");
      graph_ok = false;
    }
  if (graph_ok) {
    if (!s.graph.strongly_connected())
      sink.add(-1, "strongly-connected", "graph is not strongly connected");
    for (std::size_t i = 0; i < s.graph.n; ++i)
      if (!s.graph.has_edge(i, i))
        sink.add(static_cast<long>(i), "self-loop", "node has no self-loop");
    check_weights(sink, s);
  }

  for (std::size_t i = 0; i < s.generators.size(); ++i)
    check_generator(sink, static_cast<long>(i), s.generators[i]);
  for (std::size_t j = 0; j < s.consumers.size(); ++j)
    check_consumer(sink, static_cast<long>(s.generators.size() + j), s.consumers[j]);

  return sink.take();
}

void require_valid(const Scenario &s) {
  const auto violations = validate_scenario(s);
  if (violations.empty())
    return;
  std::string msg = "invalid scenario:";
  for (const auto &v : violations) {
    msg += "\n  ";
    if (v.node >= 0)
      msg += "node " + std::to_string(v.node) + ": ";
    msg += v.message;
  }
  throw InvalidArgument(msg);
}

WeightMatrices build_uniform_weights(const Digraph &g) {
  if (g.n == 0)
    throw InvalidArgument("graph has no nodes");
  if (!g.has_self_loops())
    throw InvalidArgument("uniform weights require a self-loop at every node");
  if (!g.strongly_connected())
    throw InvalidArgument("uniform weights require a strongly connected graph");

  // Deduplicate edges so repeated entries do not skew the degrees.
  std::vector<std::vector<bool>> adj(g.n, std::vector<bool>(g.n, false));
  for (const auto &[from, to] : g.edges)
    adj[from][to] = true;

  std::vector<std::size_t> in_deg(g.n, 0), out_deg(g.n, 0);
  for (std::size_t from = 0; from < g.n; ++from)
    for (std::size_t to = 0; to < g.n; ++to)
      if (adj[from][to]) {
        ++out_deg[from];
        ++in_deg[to];
      }

  WeightMatrices wm{Matrix(g.n), Matrix(g.n)};
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      if (adj[j][i]) {
        wm.W(i, j) = 1.0 / static_cast<double>(in_deg[i]);
        wm.Q(i, j) = 1.0 / static_cast<double>(out_deg[j]);
      }
  return wm;
}

FeasibilityCheck check_feasibility_condition(const Scenario &s) {
  double demand_ceiling = 0.0;
  for (const auto &c : s.consumers)
    demand_ceiling += c.p_max;
  double supply_floor = 0.0;
  for (const auto &g : s.generators)
    supply_floor += g.p_min - g.B * g.p_max * g.p_max;
  const double slack = demand_ceiling - supply_floor;
  return {slack >= 0.0, slack};
}

double net_injection(const GeneratorParams &p, double P) {
  if (!(P >= p.p_min && P <= p.p_max))
    throw InvalidArgument("power " + fmt(P) + " outside generator box [" + fmt(p.p_min) + ", " +
                          fmt(p.p_max) + "]");
  return net_injection_unchecked(p, P);
}

Digraph bidirectional_ring(std::vector<NodeKind> kinds) {
  Digraph g;
  g.n = kinds.size();
  g.kinds = std::move(kinds);
  for (std::size_t i = 0; i < g.n; ++i)
    g.edges.emplace_back(i, i);
  if (g.n > 1) {
    for (std::size_t i = 0; i < g.n; ++i) {
      const std::size_t next = (i + 1) % g.n;
      if (!g.has_edge(i, next))
        g.edges.emplace_back(i, next);
      if (!g.has_edge(next, i))
        g.edges.emplace_back(next, i);
    }
  }
  return g;
}

Scenario table1_scenario() {
  Scenario s;
  s.generators = {
      {.a = 0.0024, .b = 5.56, .c = 30, .B = 0.00021, .p_min = 60, .p_max = 339.69},
      {.a = 0.0056, .b = 4.32, .c = 25, .B = 0.00031, .p_min = 25, .p_max = 479.10},
  };
  s.consumers = {
      {.w = 18.43, .alpha = 0.0545, .p_min = 50, .p_max = 100.34},
      {.w = 13.17, .alpha = 0.0877, .p_min = 100, .p_max = 159.13},
  };
  s.graph = bidirectional_ring(
      {NodeKind::generator, NodeKind::generator, NodeKind::consumer, NodeKind::consumer});
  s.weights = build_uniform_weights(s.graph);
  s.eta = 0.002;
  s.eps_m = 1e-8;
  s.eps_l = 1e-8;
  s.max_iters = 200000;
  return s;
}

std::vector<double> table1_reference_dispatch() { return {81.98, 124.80}; }

} // namespace cema
