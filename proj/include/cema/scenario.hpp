#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cema {

/// Error raised for malformed input or violated preconditions. The C API maps
/// it to CEMA_ERR_INVALID_ARGUMENT.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Quadratic-cost generator: C(P) = a P^2 + b P + c, net injection P - B P^2.
struct GeneratorParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double B = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;

  double cost(double P) const { return (a * P + b) * P + c; }
  double marginal_cost(double P) const { return 2.0 * a * P + b; }

  friend bool operator==(const GeneratorParams &, const GeneratorParams &) = default;
};

/// Consumer with a saturating quadratic utility:
/// U(P) = w P - alpha P^2 for P <= w / (2 alpha), constant beyond.
struct ConsumerParams {
  double w = 0.0;
  double alpha = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;

  double saturation() const { return w / (2.0 * alpha); }
  double utility(double P) const;
  double marginal_utility(double P) const;

  friend bool operator==(const ConsumerParams &, const ConsumerParams &) = default;
};

enum class NodeKind { generator, consumer };

const char *to_string(NodeKind kind);

/// Directed communication graph. An edge (from, to) means `to` receives from
/// `from`.
struct Digraph {
  std::size_t n = 0;
  std::vector<NodeKind> kinds;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  bool has_edge(std::size_t from, std::size_t to) const;
  bool has_self_loops() const;
  bool strongly_connected() const;

  friend bool operator==(const Digraph &, const Digraph &) = default;
};

/// Dense square matrix, row-major.
class Matrix {
public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double &operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  double row_sum(std::size_t i) const;
  double col_sum(std::size_t j) const;

  friend bool operator==(const Matrix &, const Matrix &) = default;

private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// W mixes prices (row-stochastic), Q mixes surpluses (column-stochastic).
struct WeightMatrices {
  Matrix W;
  Matrix Q;

  friend bool operator==(const WeightMatrices &, const WeightMatrices &) = default;
};

struct Scenario {
  std::vector<GeneratorParams> generators;
  std::vector<ConsumerParams> consumers;
  Digraph graph;
  WeightMatrices weights;
  double eta = 0.002;
  double eps_m = 1e-8;
  double eps_l = 1e-8;
  std::size_t max_iters = 200000;

  std::size_t node_count() const { return generators.size() + consumers.size(); }
  NodeKind kind_of(std::size_t node) const {
    return node < generators.size() ? NodeKind::generator : NodeKind::consumer;
  }
  const GeneratorParams &generator_at(std::size_t node) const { return generators.at(node); }
  const ConsumerParams &consumer_at(std::size_t node) const {
    return consumers.at(node - generators.size());
  }
  double p_min(std::size_t node) const;
  double p_max(std::size_t node) const;

  friend bool operator==(const Scenario &, const Scenario &) = default;
};

struct Violation {
  /// Node index, or -1 for scenario-level rules.
  long node = -1;
  std::string rule;
  std::string message;
};

/// Every violated model invariant, ordered by (node, rule). Scenario-level
/// violations come first.
std::vector<Violation> validate_scenario(const Scenario &s);

/// Throws InvalidArgument listing all violations if the scenario is invalid.
void require_valid(const Scenario &s);

/// Uniform in-neighbour averaging for W, uniform out-neighbour splitting for Q,
/// self-loops included.
WeightMatrices build_uniform_weights(const Digraph &g);

struct FeasibilityCheck {
  bool holds = false;
  /// sum of consumer p_max minus sum of generator (p_min - B p_max^2).
  double slack = 0.0;
};

/// Condition under which the inequality relaxation of the power balance has
/// the same optimum as the equality-constrained problem.
FeasibilityCheck check_feasibility_condition(const Scenario &s);

/// P - B P^2. Rejects P outside [p_min, p_max].
double net_injection(const GeneratorParams &p, double P);

/// Same formula without the box check; used where P(0) = 0 is legitimate.
inline double net_injection_unchecked(const GeneratorParams &p, double P) {
  return P - p.B * P * P;
}

/// Directed ring plus reverse ring plus self-loops over the given node kinds.
Digraph bidirectional_ring(std::vector<NodeKind> kinds);

/// Two generators and two consumers on a bidirectional 4-ring with uniform
/// weights. Decimal-point form of the benchmark parameter table.
Scenario table1_scenario();

/// Generator powers (81.98, 124.80) published as the optimum of the table1
/// case. Only good to about a megawatt.
std::vector<double> table1_reference_dispatch();

} // namespace cema
