#include "cema/best_response.hpp"

#include <algorithm>
#include <cmath>

namespace cema {

const char *to_string(Variant v) { return v == Variant::original ? "original" : "corrected"; }

Variant parse_variant(const std::string &name) {
  if (name == "original")
    return Variant::original;
  if (name == "corrected")
    return Variant::corrected;
  throw InvalidArgument("unknown variant '" + name + "' (expected original or corrected)");
}

namespace {

void require_finite(double lambda) {
  if (!std::isfinite(lambda))
    throw InvalidArgument("price signal must be finite");
}

} // namespace

double generator_response_original(const GeneratorParams &p, double lambda) {
  require_finite(lambda);
  return std::clamp((lambda - p.b) / (2.0 * p.a), p.p_min, p.p_max);
}

double generator_response_corrected(const GeneratorParams &p, double lambda) {
  require_finite(lambda);
  const double curvature = p.a + lambda * p.B;
  if (curvature > 0.0)
    return std::clamp((lambda - p.b) / (2.0 * curvature), p.p_min, p.p_max);

  // Concave: the minimum sits on an endpoint. The constant c cancels.
  const auto objective = [&](double P) { return (curvature * P + (p.b - lambda)) * P; };
  return objective(p.p_min) <= objective(p.p_max) ? p.p_min : p.p_max;
}

double generator_response(const GeneratorParams &p, double lambda, Variant v) {
  return v == Variant::original ? generator_response_original(p, lambda)
                                : generator_response_corrected(p, lambda);
}

double consumer_response(const ConsumerParams &p, double lambda) {
  require_finite(lambda);
  if (lambda > 0.0)
    return std::clamp((p.w - lambda) / (2.0 * p.alpha), p.p_min, p.p_max);
  if (lambda == 0.0)
    return std::clamp(p.saturation(), p.p_min, p.p_max);
  return p.p_max;
}

double lambda_init(const GeneratorParams &p) {
  return p.marginal_cost(p.p_min) / (1.0 - 2.0 * p.B * p.p_min);
}

double lambda_init(const ConsumerParams &p) { return p.marginal_utility(p.p_max); }

} // namespace cema
