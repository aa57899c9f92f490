#include "cema/scenario_io.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace cema {

using nlohmann::json;

namespace {

const json &field(const json &obj, const char *key, const std::string &where) {
  const auto it = obj.find(key);
  if (it == obj.end())
    throw InvalidArgument(where + ": missing key '" + key + "'");
  return *it;
}

double number(const json &obj, const char *key, const std::string &where) {
  const auto &v = field(obj, key, where);
  if (!v.is_number())
    throw InvalidArgument(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

void reject_unknown(const json &obj, std::initializer_list<const char *> allowed,
                    const std::string &where) {
  for (const auto &[key, _] : obj.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char *a) { return key == a; }))
      throw InvalidArgument(where + ": unknown key '" + key + "'");
}

NodeKind parse_kind(const json &v) {
  const auto name = v.get<std::string>();
  if (name == "generator")
    return NodeKind::generator;
  if (name == "consumer")
    return NodeKind::consumer;
  throw InvalidArgument("graph.kinds: unknown node kind '" + name + "'");
}

Matrix parse_matrix(const json &rows, std::size_t n, const char *name) {
  if (!rows.is_array() || rows.size() != n)
    throw InvalidArgument(std::string("weights.") + name + " must have " + std::to_string(n) +
                          " rows");
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != n)
      throw InvalidArgument(std::string("weights.") + name + " row " + std::to_string(i) +
                            " must have " + std::to_string(n) + " entries");
    for (std::size_t j = 0; j < n; ++j) {
      if (!rows[i][j].is_number())
        throw InvalidArgument(std::string("weights.") + name + " entries must be numbers");
      m(i, j) = rows[i][j].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Matrix &m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.size(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Digraph parse_graph(const json &g, const Scenario &s) {
  std::vector<NodeKind> kinds;
  for (std::size_t i = 0; i < s.node_count(); ++i)
    kinds.push_back(s.kind_of(i));

  if (g.contains("preset")) {
    reject_unknown(g, {"preset"}, "graph");
    const auto preset = g["preset"].get<std::string>();
    if (preset == "ring4") {
      if (s.node_count() != 4)
        throw InvalidArgument("graph preset ring4 needs exactly 4 nodes");
      return bidirectional_ring(std::move(kinds));
    }
    if (preset == "ring")
      return bidirectional_ring(std::move(kinds));
    throw InvalidArgument("graph: unknown preset '" + preset + "'");
  }

  reject_unknown(g, {"n", "kinds", "edges"}, "graph");
  Digraph out;
  out.n = field(g, "n", "graph").get<std::size_t>();
  for (const auto &k : field(g, "kinds", "graph"))
    out.kinds.push_back(parse_kind(k));
  for (const auto &e : field(g, "edges", "graph")) {
    if (!e.is_array() || e.size() != 2)
      throw InvalidArgument("graph.edges entries must be [from, to] pairs");
    out.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  return out;
}

Scenario from_json(const json &doc) {
  if (!doc.is_object())
    throw InvalidArgument("scenario document must be a JSON object");
  reject_unknown(doc,
                 {"generators", "consumers", "graph", "weights", "eta", "eps_m", "eps_l",
                  "max_iters"},
                 "scenario");
  Scenario s;
  for (const auto &g : field(doc, "generators", "scenario")) {
    reject_unknown(g, {"a", "b", "c", "B", "p_min", "p_max"}, "generator");
    s.generators.push_back({number(g, "a", "generator"), number(g, "b", "generator"),
                            number(g, "c", "generator"), number(g, "B", "generator"),
                            number(g, "p_min", "generator"), number(g, "p_max", "generator")});
  }
  for (const auto &c : field(doc, "consumers", "scenario")) {
    reject_unknown(c, {"w", "alpha", "p_min", "p_max"}, "consumer");
    s.consumers.push_back({number(c, "w", "consumer"), number(c, "alpha", "consumer"),
                           number(c, "p_min", "consumer"), number(c, "p_max", "consumer")});
  }
  if (doc.contains("eta"))
    s.eta = number(doc, "eta", "scenario");
  if (doc.contains("eps_m"))
    s.eps_m = number(doc, "eps_m", "scenario");
  if (doc.contains("eps_l"))
    s.eps_l = number(doc, "eps_l", "scenario");
  if (doc.contains("max_iters"))
    s.max_iters = doc["max_iters"].get<std::size_t>();

  s.graph = parse_graph(field(doc, "graph", "scenario"), s);

  const auto &w = field(doc, "weights", "scenario");
  if (w.is_string()) {
    if (w.get<std::string>() != "uniform")
      throw InvalidArgument("weights must be \"uniform\" or explicit {W, Q}");
    s.weights = build_uniform_weights(s.graph);
  } else {
    reject_unknown(w, {"W", "Q"}, "weights");
    s.weights.W = parse_matrix(field(w, "W", "weights"), s.graph.n, "W");
    s.weights.Q = parse_matrix(field(w, "Q", "weights"), s.graph.n, "Q");
  }
  return s;
}

} // namespace

Scenario parse_scenario(const std::string &json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
    return from_json(doc);
  } catch (const json::exception &e) {
    throw InvalidArgument(std::string("malformed scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::string &path_or_preset) {
  if (path_or_preset == "table1")
    return table1_scenario();
  std::ifstream in(path_or_preset);
  if (!in)
    throw InvalidArgument("cannot read scenario file '" + path_or_preset + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string scenario_to_json(const Scenario &s) {
  json doc;
  doc["generators"] = json::array();
  for (const auto &g : s.generators)
    doc["generators"].push_back(
        {{"a", g.a}, {"b", g.b}, {"c", g.c}, {"B", g.B}, {"p_min", g.p_min}, {"p_max", g.p_max}});
  doc["consumers"] = json::array();
  for (const auto &c : s.consumers)
    doc["consumers"].push_back(
        {{"w", c.w}, {"alpha", c.alpha}, {"p_min", c.p_min}, {"p_max", c.p_max}});

  json kinds = json::array(), edges = json::array();
  for (auto k : s.graph.kinds)
    kinds.push_back(to_string(k));
  for (const auto &[from, to] : s.graph.edges)
    edges.push_back({from, to});
  doc["graph"] = {{"n", s.graph.n}, {"kinds", kinds}, {"edges", edges}};

  bool uniform = false;
  try {
    uniform = build_uniform_weights(s.graph) == s.weights;
  } catch (const InvalidArgument &) {
  }
  if (uniform)
    doc["weights"] = "uniform";
  else
    doc["weights"] = {{"W", matrix_to_json(s.weights.W)}, {"Q", matrix_to_json(s.weights.Q)}};

  doc["eta"] = s.eta;
  doc["eps_m"] = s.eps_m;
  doc["eps_l"] = s.eps_l;
  doc["max_iters"] = s.max_iters;
  return doc.dump(2) + "\n";
}

namespace {

/// Uniform draw on [lo, hi) from the top 53 bits; the standard distributions
/// are not specified bit-for-bit across library implementations.
class Draw {
public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double operator()(double lo, double hi) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

private:
  std::mt19937_64 rng_;
};

} // namespace

Scenario generate_scenario(std::uint64_t seed, std::size_t generators, std::size_t consumers) {
  if (generators == 0 || consumers == 0)
    throw InvalidArgument("need at least one generator and one consumer");

  Draw draw(seed);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Scenario s;
    for (std::size_t i = 0; i < generators; ++i) {
      GeneratorParams g;
      g.a = draw(0.002, 0.008);
      g.b = draw(3.0, 7.0);
      g.c = draw(10.0, 40.0);
      g.B = draw(1e-4, 4e-4);
      g.p_min = draw(20.0, 80.0);
      g.p_max = draw(250.0, 500.0);
      s.generators.push_back(g);
    }
    for (std::size_t j = 0; j < consumers; ++j) {
      ConsumerParams c;
      c.w = draw(10.0, 20.0);
      c.alpha = draw(0.03, 0.1);
      c.p_min = draw(40.0, 110.0);
      c.p_max = c.p_min + draw(20.0, 80.0);
      s.consumers.push_back(c);
    }
    std::vector<NodeKind> kinds(generators, NodeKind::generator);
    kinds.resize(generators + consumers, NodeKind::consumer);
    s.graph = bidirectional_ring(std::move(kinds));
    s.weights = build_uniform_weights(s.graph);

    double min_two_a = s.generators.front().a * 2.0;
    for (const auto &g : s.generators)
      min_two_a = std::min(min_two_a, 2.0 * g.a);
    s.eta = 0.4 * min_two_a;

    if (!validate_scenario(s).empty() || !check_feasibility_condition(s).holds)
      continue;
    double max_supply = 0.0, min_demand = 0.0;
    for (const auto &g : s.generators)
      max_supply += net_injection_unchecked(g, g.p_max);
    for (const auto &c : s.consumers)
      min_demand += c.p_min;
    if (max_supply < min_demand)
      continue;
    return s;
  }
  throw InvalidArgument("could not draw a feasible scenario");
}

} // namespace cema
