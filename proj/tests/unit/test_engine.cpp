#include "doctest.h"

#include <cmath>
#include <sstream>

#include "cema/engine.hpp"
#include "cema/oracle.hpp"
#include "cema/scenario_io.hpp"
#include "test_support.hpp"

using namespace cema;

namespace {

std::vector<NodeState> with_powers(const std::vector<double> &P) {
  std::vector<NodeState> out(P.size());
  for (std::size_t i = 0; i < P.size(); ++i)
    out[i].P = P[i];
  return out;
}

std::string trace_text(const Scenario &s, const RunResult &r) {
  std::ostringstream os;
  write_trace_csv(os, s, r);
  write_round_summary_csv(os, r);
  return os.str();
}

struct Row {
  double lambda, P, xi;
};

// Round 1 of the built-in case, computed independently with the same
// summation order in plain double arithmetic.
const Row kRound1Original[] = {
    {3.5572006227840514, 60, -59.244},
    {6.054847289450718, 154.89707941524267, -147.45921679971735},
    {4.055120849839174, 100.34, 100.34},
    {4.497373106278211, 100, 100.0},
};
const Row kRound1Corrected[] = {
    {3.5572006227840514, 60, -59.244},
    {6.054847289450718, 116.01221561645325, -111.83997702305933},
    {4.055120849839174, 100.34, 100.34},
    {4.497373106278211, 100, 100.0},
};

} // namespace

TEST_CASE("price mixing") {
  Matrix W(2, 0.5);
  std::vector<NodeState> st{{.lambda = 0, .P = 0, .xi = 1}, {.lambda = 2, .P = 0, .xi = 0}};
  const auto out = lambda_step(st, W, 0.5);
  CHECK(out[0] == 1.5);
  CHECK(out[1] == 1.0);

  const Scenario s = table1_scenario();
  std::vector<NodeState> consensus(4, NodeState{.lambda = 3.7, .P = 0, .xi = 0});
  for (double l : lambda_step(consensus, s.weights.W, 0.3))
    CHECK(l == doctest::Approx(3.7).epsilon(1e-15));

  CHECK_THROWS_AS(lambda_step(consensus, W, 0.1), InvalidArgument);
}

TEST_CASE("power step") {
  const Scenario s = table1_scenario();
  const std::vector<NodeState> st(4);
  const std::vector<double> lam{5.56, 5.56, 6.2, 6.2};
  for (Variant v : {Variant::original, Variant::corrected}) {
    const auto P = power_step(st, s, v, lam);
    CHECK(P[0] == 60.0);
    CHECK(P[2] == 100.34);
    CHECK(P[3] == 100.0);
  }

  const Scenario lossless = testing::lossless_table1();
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> l(4);
    for (auto &x : l)
      x = testing::uniform(rng, -5, 20);
    CHECK(power_step(st, lossless, Variant::original, l) ==
          power_step(st, lossless, Variant::corrected, l));
  }
}

TEST_CASE("surplus step") {
  const Scenario s = table1_scenario();
  std::vector<NodeState> st{{0, 80, 1.5}, {0, 120, -0.25}, {0, 100.34, 2.0}, {0, 100, -0.75}};
  const std::vector<double> P{80, 120, 100.34, 100};
  const auto xi = surplus_step(st, s, s.weights.Q, P, P);
  double before = 0, after = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    before += st[i].xi;
    after += xi[i];
  }
  CHECK(after == doctest::Approx(before).epsilon(1e-15));

  // From the zero state the surplus total is the mismatch of the new powers.
  const std::vector<NodeState> zero(4);
  const std::vector<double> old(4, 0.0);
  const std::vector<double> fresh{90, 110, 100.34, 100};
  const auto xi1 = surplus_step(zero, s, s.weights.Q, old, fresh);
  double total = 0;
  for (double x : xi1)
    total += x;
  CHECK(total == doctest::Approx(mismatch(with_powers(fresh), s)).epsilon(1e-13));
}

TEST_CASE("mismatch") {
  const Scenario s = table1_scenario();
  CHECK(mismatch(std::vector<NodeState>(4), s) == 0.0);

  // Net generator outputs given directly via a lossless copy.
  const Scenario lossless = testing::lossless_table1();
  CHECK(mismatch(with_powers({80.57, 119.97, 100.34, 100}), lossless) ==
        doctest::Approx(-0.20).epsilon(1e-9));

  const double net1 = 90 - 0.00021 * 90 * 90;
  const double net2 = 110 - 0.00031 * 110 * 110;
  CHECK(std::abs(mismatch(with_powers({90, 110, net1, net2}), s)) <= 1e-12);
}

TEST_CASE("initial state") {
  const auto st = initial_states(table1_scenario());
  CHECK(st[0].lambda == doctest::Approx(5.99917931883));
  CHECK(st[3].lambda == 0.0);
  for (const auto &n : st) {
    CHECK(n.P == 0.0);
    CHECK(n.xi == 0.0);
  }
}

TEST_CASE("round 1 of the built-in case matches the frozen fixture") {
  const Scenario s = table1_scenario();
  for (Variant v : {Variant::original, Variant::corrected}) {
    Scenario one = s;
    one.max_iters = 1;
    const RunResult r = run(one, v);
    REQUIRE(r.trace.size() == 2);
    const Row *want = v == Variant::original ? kRound1Original : kRound1Corrected;
    for (std::size_t i = 0; i < 4; ++i) {
      CAPTURE(i);
      CHECK(r.trace[1].nodes[i].lambda == want[i].lambda);
      CHECK(r.trace[1].nodes[i].P == want[i].P);
      CHECK(r.trace[1].nodes[i].xi == want[i].xi);
    }
    CHECK(r.terminated == Termination::by_max_iters);
  }
}

TEST_CASE("corrected run reaches the centralized optimum") {
  const Scenario s = table1_scenario();
  const auto opt = solve_centralized(s);
  const RunResult r = run(s, Variant::corrected);
  REQUIRE(r.terminated == Termination::by_tolerance);
  CHECK(r.rounds <= s.max_iters);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(std::abs(r.final_states[i].P - opt.P[i]) <= 1e-3);

  const auto &last = r.trace.back();
  CHECK(last.lambda_spread <= 1e-6);
  CHECK(last.lambda_spread <= 10 * s.eps_l);
  CHECK(std::abs(last.mismatch) <= s.node_count() * s.eps_m);
  CHECK(r.max_conservation_error <= 1e-9);
  for (const auto &n : r.final_states) {
    CHECK(std::abs(n.xi) <= s.eps_m);
  }

  // Interior generators agree on the loss-adjusted price.
  const auto g0 = s.generators[0], g1 = s.generators[1];
  const double p0 = r.final_states[0].P, p1 = r.final_states[1].P;
  CHECK(std::abs(g0.marginal_cost(p0) / (1 - 2 * g0.B * p0) -
                 g1.marginal_cost(p1) / (1 - 2 * g1.B * p1)) <= 1e-4);
}

TEST_CASE("original run settles away from the optimum") {
  const Scenario s = table1_scenario();
  const auto opt = solve_centralized(s);
  const RunResult r = run(s, Variant::original);
  REQUIRE(r.terminated == Termination::by_tolerance);
  CHECK(r.trace.back().lambda_spread <= 1e-6);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(std::abs(r.final_states[i].P - opt.P[i]) > 1.0);
  CHECK(r.final_states[0].P == doctest::Approx(67.646).epsilon(1e-4));
  CHECK(r.final_states[1].P == doctest::Approx(139.705).epsilon(1e-4));

  // Raw marginal costs are what the original update equalises.
  const double c0 = s.generators[0].marginal_cost(r.final_states[0].P);
  const double c1 = s.generators[1].marginal_cost(r.final_states[1].P);
  CHECK(std::abs(c0 - c1) <= 1e-4);
  CHECK(r.max_conservation_error <= 1e-9);
}

TEST_CASE("pinned pair balances immediately") {
  const Scenario s = testing::pinned_pair();
  const RunResult r = run(s, Variant::corrected);
  CHECK(r.terminated == Termination::by_tolerance);
  CHECK(r.trace.back().mismatch == 0.0);
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    CHECK(r.trace[k].mismatch == 0.0);
}

TEST_CASE("runs are deterministic") {
  const Scenario s = table1_scenario();
  for (Variant v : {Variant::original, Variant::corrected}) {
    const std::string a = trace_text(s, run(s, v));
    const std::string b = trace_text(s, run(s, v));
    CHECK(a == b);
  }
}

TEST_CASE("trace stride keeps round 0 and the final round") {
  const Scenario s = table1_scenario();
  const RunResult r = run(s, Variant::corrected, {.trace_stride = 100});
  REQUIRE(r.trace.size() >= 2);
  CHECK(r.trace.front().k == 0);
  CHECK(r.trace.back().k == r.rounds);
  for (std::size_t i = 1; i + 1 < r.trace.size(); ++i)
    CHECK(r.trace[i].k % 100 == 0);
}

TEST_CASE("trace CSV round-trips every value") {
  const Scenario s = table1_scenario();
  Scenario short_run = s;
  short_run.max_iters = 3;
  const RunResult r = run(short_run, Variant::corrected);
  std::ostringstream os;
  write_trace_csv(os, s, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "k,node_id,kind,lambda,P,xi");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    std::istringstream fields(line);
    std::string k, id, kind, lam, P, xi;
    std::getline(fields, k, ',');
    std::getline(fields, id, ',');
    std::getline(fields, kind, ',');
    std::getline(fields, lam, ',');
    std::getline(fields, P, ',');
    std::getline(fields, xi, ',');
    const auto &node = r.trace[std::stoul(k)].nodes[std::stoul(id)];
    CHECK(kind == (std::stoul(id) < 2 ? "generator" : "consumer"));
    CHECK(std::stod(lam) == node.lambda);
    CHECK(std::stod(P) == node.P);
    CHECK(std::stod(xi) == node.xi);
    ++rows;
  }
  CHECK(rows == 4 * r.trace.size());

  std::ostringstream summary;
  write_round_summary_csv(summary, r);
  CHECK(summary.str().rfind("k,mismatch,lambda_spread,max_abs_xi\n", 0) == 0);
}

TEST_CASE("fixed points of random scenarios") {
  int converged = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const Scenario s = generate_scenario(seed, 1 + seed % 3, 1 + (seed / 3) % 3);
    const RunResult r = run(s, Variant::corrected);
    CHECK(r.max_conservation_error <= 1e-9);
    if (r.terminated != Termination::by_tolerance)
      continue;
    ++converged;
    CHECK(std::abs(r.trace.back().mismatch) <= s.node_count() * s.eps_m);
    CHECK(r.trace.back().lambda_spread <= 10 * s.eps_l);

    std::vector<double> prices;
    for (std::size_t i = 0; i < s.generators.size(); ++i) {
      const auto &g = s.generators[i];
      const double P = r.final_states[i].P;
      if (P > g.p_min && P < g.p_max)
        prices.push_back(g.marginal_cost(P) / (1 - 2 * g.B * P));
    }
    CHECK(spread(prices) <= 1e-4);
  }
  CHECK(converged >= 30);
}

TEST_CASE("invalid scenarios are refused") {
  Scenario s = table1_scenario();
  s.eta = 0;
  CHECK_THROWS_AS(run(s, Variant::corrected), InvalidArgument);
}

TEST_CASE("a large gain does not settle") {
  Scenario s = table1_scenario();
  s.eta = 0.9;
  s.max_iters = 5000;
  const RunResult r = run(s, Variant::original);
  CHECK(r.terminated != Termination::by_tolerance);
}
