#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cema/scenario.hpp"

namespace cema {

/// Parses a scenario document. `graph` may be a preset ({"preset": "ring4"} or
/// {"preset": "ring"}) or explicit {n, kinds, edges}; `weights` may be
/// "uniform" or {"W": [[...]], "Q": [[...]]}. The result is not validated.
Scenario parse_scenario(const std::string &json_text);

/// Reads a file, or returns the built-in case when `path_or_preset` is
/// "table1".
Scenario load_scenario(const std::string &path_or_preset);

/// Pretty-printed JSON. Weights are written as "uniform" when they equal the
/// uniform construction, so a parse gives back an identical scenario.
std::string scenario_to_json(const Scenario &s);

/// Random valid scenario with parameters in the same ranges as the built-in
/// case, on a bidirectional ring. Deterministic per seed; candidates failing
/// validation or either feasibility check are redrawn.
Scenario generate_scenario(std::uint64_t seed, std::size_t generators, std::size_t consumers);

} // namespace cema
