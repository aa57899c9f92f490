#include "doctest.h"

#include <cmath>
#include <limits>

#include "cema/best_response.hpp"
#include "cema/oracle.hpp"
#include "test_support.hpp"

using namespace cema;
using cema::testing::quad;

namespace {

const GeneratorParams &gen1() {
  static const Scenario s = table1_scenario();
  return s.generators[0];
}
const GeneratorParams &gen2() {
  static const Scenario s = table1_scenario();
  return s.generators[1];
}
const ConsumerParams &cons1() {
  static const Scenario s = table1_scenario();
  return s.consumers[0];
}
const ConsumerParams &cons2() {
  static const Scenario s = table1_scenario();
  return s.consumers[1];
}

} // namespace

TEST_CASE("original generator response on the benchmark generator") {
  // Inverting 2aP + b at the published dispatch.
  CHECK(generator_response_original(gen1(), 5.9535) == doctest::Approx(81.98).epsilon(1e-4));
  CHECK(generator_response_original(gen1(), 5.56) == 60.0);
  CHECK(generator_response_original(gen1(), 10.0) == 339.69);
}

TEST_CASE("corrected generator response") {
  CHECK(generator_response_corrected(gen1(), 5.56) == 60.0);

  const auto sol = solve_centralized(table1_scenario());
  const double P = generator_response_corrected(gen2(), sol.lambda);
  CHECK(P > 123.0);
  CHECK(P < 125.0);
  CHECK(std::abs(P - sol.P[1]) <= 1e-6);

  const double ref = testing::golden_min(
      [&](quad x) { return testing::generator_objective(gen2(), sol.lambda, true, x); },
      gen2().p_min, gen2().p_max);
  CHECK(std::abs(P - ref) <= 1e-7);
}

TEST_CASE("corrected response on the concave branch picks the cheaper endpoint") {
  GeneratorParams g{.a = 0.002, .b = 5, .c = 0, .B = 4e-4, .p_min = 20, .p_max = 300};
  // a + lambda B = 0.002 - 0.008 < 0
  const double lambda = -20.0;
  const double lo = testing::generator_objective(g, lambda, true, g.p_min);
  const double hi = testing::generator_objective(g, lambda, true, g.p_max);
  CHECK(generator_response_corrected(g, lambda) == (lo <= hi ? g.p_min : g.p_max));

  // Zero curvature and zero slope: the objective is flat and ties go to p_min.
  GeneratorParams flat{.a = 1e-3, .b = -1, .c = 0, .B = 1e-3, .p_min = 1, .p_max = 2};
  CHECK(generator_response_corrected(flat, -1.0) == 1.0);
}

TEST_CASE("consumer response") {
  CHECK(consumer_response(cons1(), 6.17) == 100.34);
  for (double lambda : {0.01, 1.0, 6.17, 10.0, 13.0})
    CHECK(consumer_response(cons2(), lambda) == 100.0);
  CHECK(consumer_response(cons1(), 18.43) == 50.0);

  // Zero price: smallest minimiser of the flat branch, clipped.
  CHECK(consumer_response(cons1(), 0.0) == 100.34);
  CHECK(consumer_response(cons2(), 0.0) == 100.0);
  ConsumerParams wide{.w = 10, .alpha = 0.1, .p_min = 10, .p_max = 200};
  CHECK(consumer_response(wide, 0.0) == doctest::Approx(50.0));
  CHECK(consumer_response(wide, -0.5) == 200.0);
}

TEST_CASE("initial prices") {
  // Recomputed from the table: (2*0.0024*60 + 5.56) / (1 - 2*0.00021*60).
  CHECK(lambda_init(gen1()) == doctest::Approx(5.99917931883).epsilon(1e-10));
  CHECK(lambda_init(gen1()) == doctest::Approx(5.995).epsilon(1e-3));
  CHECK(lambda_init(cons1()) == doctest::Approx(7.49294).epsilon(1e-9));
  CHECK(lambda_init(cons2()) == 0.0);
}

TEST_CASE("non-finite prices are rejected") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(generator_response_original(gen1(), nan), InvalidArgument);
  CHECK_THROWS_AS(generator_response_corrected(gen1(), inf), InvalidArgument);
  CHECK_THROWS_AS(consumer_response(cons1(), -inf), InvalidArgument);
}

TEST_CASE("variant names") {
  CHECK(parse_variant("original") == Variant::original);
  CHECK(parse_variant(to_string(Variant::corrected)) == Variant::corrected);
  CHECK_THROWS_AS(parse_variant("both"), InvalidArgument);
}

TEST_CASE("closed forms match a quad-precision golden-section minimiser") {
  std::mt19937_64 rng(20240611);
  double worst_orig = 0, worst_corr = 0, worst_cons = 0;
  for (int i = 0; i < 10000; ++i) {
    const GeneratorParams g = testing::random_generator(rng);
    const ConsumerParams c = testing::random_consumer(rng);
    const double lambda = testing::uniform(rng, -20, 40);

    const double ro = testing::golden_min(
        [&](quad x) { return testing::generator_objective(g, lambda, false, x); }, g.p_min, g.p_max);
    const double rc = testing::golden_min(
        [&](quad x) { return testing::generator_objective(g, lambda, true, x); }, g.p_min, g.p_max);
    const double rk = testing::golden_min(
        [&](quad x) { return testing::consumer_objective(c, lambda, x); }, c.p_min, c.p_max);

    worst_orig = std::max(worst_orig, std::abs(generator_response_original(g, lambda) - ro));
    worst_corr = std::max(worst_corr, std::abs(generator_response_corrected(g, lambda) - rc));
    worst_cons = std::max(worst_cons, std::abs(consumer_response(c, lambda) - rk));
  }
  CHECK(worst_orig <= 1e-7);
  CHECK(worst_corr <= 1e-7);
  CHECK(worst_cons <= 1e-7);
}

TEST_CASE("responses are monotone in the price") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const GeneratorParams g = testing::random_generator(rng);
    const ConsumerParams c = testing::random_consumer(rng);
    double prev_o = -1, prev_c = -1, prev_k = 1e300;
    for (double lambda = -20; lambda <= 40; lambda += 0.05) {
      const double o = generator_response_original(g, lambda);
      const double r = generator_response_corrected(g, lambda);
      const double k = consumer_response(c, lambda);
      REQUIRE(o >= prev_o);
      REQUIRE(k <= prev_k);
      // The concave branch only occurs below zero price.
      if (lambda >= 0)
        REQUIRE(r >= prev_c);
      prev_o = o;
      prev_c = r;
      prev_k = k;
    }
  }
}

TEST_CASE("zero losses reduce the corrected response to the original one") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    GeneratorParams g = testing::random_generator(rng);
    g.B = 0.0;
    const double lambda = testing::uniform(rng, -20, 40);
    REQUIRE(generator_response_corrected(g, lambda) == generator_response_original(g, lambda));
  }
}

TEST_CASE("interior responses satisfy the fixed-point identities") {
  std::mt19937_64 rng(3);
  int interior_o = 0, interior_c = 0;
  for (int i = 0; i < 2000; ++i) {
    const GeneratorParams g = testing::random_generator(rng);
    const double lambda = testing::uniform(rng, 0, 40);
    const double o = generator_response_original(g, lambda);
    if (o > g.p_min && o < g.p_max) {
      ++interior_o;
      REQUIRE(g.marginal_cost(o) == doctest::Approx(lambda).epsilon(1e-12));
    }
    const double c = generator_response_corrected(g, lambda);
    if (c > g.p_min && c < g.p_max) {
      ++interior_c;
      REQUIRE(g.marginal_cost(c) / (1 - 2 * g.B * c) == doctest::Approx(lambda).epsilon(1e-12));
    }
  }
  CHECK(interior_o > 100);
  CHECK(interior_c > 100);
}
