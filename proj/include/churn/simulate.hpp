#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "churn/features.hpp"

namespace churn {

enum class Scenario {
  nonlinear,  // level walls, wall-dependent quitting, spend x engagement interactions
  linear,     // uniform level costs, constant per-level quit hazard (proportional hazards)
};

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario scenario);

/// Generator version; bump whenever the draw sequence changes.
inline constexpr int kSimulatorVersion = 1;

struct SimulationConfig {
  std::size_t players = 5000;
  std::uint64_t seed = 7;
  Scenario scenario = Scenario::nonlinear;
  Day start = Day{std::chrono::year{2015} / 1 / 1};
  int window_days = 300;
};

/// Events of player `index` in time order. Player streams are independent
/// substreams of the seed.
std::vector<ActionEvent> simulate_player(const SimulationConfig& config, std::size_t index);

/// Full log (header plus all events ordered by timestamp, then player).
void simulate_logs(const SimulationConfig& config, std::ostream& out, std::size_t workers = 1);
void simulate_logs(const SimulationConfig& config, const std::filesystem::path& path, std::size_t workers = 1);

}  // namespace churn
