#pragma once

#include "cema/scenario.hpp"

namespace cema {

/// Which generator update the engine runs: `original` minimises C(P) - lambda P,
/// `corrected` minimises C(P) - lambda (P - B P^2).
enum class Variant { original, corrected };

const char *to_string(Variant v);
Variant parse_variant(const std::string &name);

/// Box-constrained argmin of C(P) - lambda P.
double generator_response_original(const GeneratorParams &p, double lambda);

/// Box-constrained argmin of C(P) - lambda (P - B P^2). When a + lambda B <= 0
/// the objective is concave and the cheaper endpoint wins, ties to p_min.
double generator_response_corrected(const GeneratorParams &p, double lambda);

double generator_response(const GeneratorParams &p, double lambda, Variant v);

/// Box-constrained argmin of lambda P - U(P). At lambda = 0 the smallest
/// minimiser is returned; for lambda < 0 the objective decreases and p_max wins.
double consumer_response(const ConsumerParams &p, double lambda);

/// Initial price: C'(p_min) / (1 - 2 B p_min).
double lambda_init(const GeneratorParams &p);
/// Initial price: U'(p_max), zero on the saturated branch.
double lambda_init(const ConsumerParams &p);

} // namespace cema
