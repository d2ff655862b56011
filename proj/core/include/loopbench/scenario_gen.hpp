#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "loopbench/scene.hpp"

namespace loopbench {

enum class ScenarioTemplate { kLeadBrake, kCutIn, kMerge, kPedestrianCrossing, kUnprotectedCrossing };

std::string_view to_string(ScenarioTemplate t);
/// Throws ParameterError listing the valid names.
ScenarioTemplate scenario_template_from_string(std::string_view name);
std::span<const ScenarioTemplate> all_templates();

/// Unset fields are drawn from the seed. Ranges (defaults in brackets):
///   ego_speed     U[9, 12] m/s for every template
///   gap           lead_brake U[12, 20], cut_in U[5, 12], merge U[1, 6] (bumper gap ahead, m);
///                 crossings U[3, 9] (distance the constant-speed ego is short of the
///                 conflict point when the agent reaches the lane centre, m)
///   agent_speed   lead_brake = ego, cut_in ego - U[1, 2.5], merge ego + U[-1, 1],
///                 pedestrian U[1.2, 1.6], crossing vehicle U[7, 10]
///   trigger_time  lead_brake brake onset U[2, 4], cut_in / merge lane change onset
///                 U[1.5, 3], pedestrian walk onset U[0, 1]; crossing vehicle unused
///   decel         lead_brake U[3, 5] m/s^2
/// A large gap (e.g. 200 m) gives the non-interactive variant of each template.
struct TemplateParams {
  std::optional<double> gap;
  std::optional<double> ego_speed;
  std::optional<double> agent_speed;
  std::optional<double> trigger_time;
  std::optional<double> decel;
};

inline constexpr double kLaneWidth = 3.5;
inline constexpr double kRoadSpeedLimit = 13.9;

/// 15 s at 0.1 s on a straight two-lane corridor (ego lane centred on the
/// reference, second lane to its left). Agent speeds are the forward finite
/// differences of their positions. The ego log is an IDM-style expert.
Scenario generate_scenario(ScenarioTemplate t, const TemplateParams& params, std::uint64_t seed);

/// Scenario name used by generate_scenario: "<template>_s<seed>".
std::string scenario_name(ScenarioTemplate t, std::uint64_t seed);

/// Straight corridor with no agents.
Scenario empty_road_scenario(double ego_speed = 10.0);

/// Subset of `scenarios` with is_interactive(threshold), order preserved.
std::vector<Scenario> filter_interactive(const std::vector<Scenario>& scenarios, double threshold = 3.0);

}  // namespace loopbench
