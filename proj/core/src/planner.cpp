#include "loopbench/planner.hpp"

#include <array>

#include "loopbench/errors.hpp"

namespace loopbench {

namespace {
constexpr std::array<std::string_view, 2> kPlannerNames = {"mpcc", "rbmpcc"};
}

std::string_view to_string(PlannerKind kind) { return kPlannerNames[static_cast<std::size_t>(kind)]; }

std::span<const std::string_view> planner_kind_names() { return kPlannerNames; }

PlannerKind planner_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kPlannerNames.size(); ++i) {
    if (kPlannerNames[i] == name) return static_cast<PlannerKind>(i);
  }
  std::string valid;
  for (auto n : kPlannerNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown planner '" + std::string(name) + "' (valid: " + valid + ")");
}

Planner::Planner(PlannerSpec spec, EgoModelParams params) : spec_(std::move(spec)), params_(params) {
  spec_.config.weights.validate();
  spec_.config.contingency.validate();
  params_.validate();
}

PlanResult Planner::plan(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                         double t0) {
  const PlanResult* prev = previous_ ? &*previous_ : nullptr;
  const auto& cfg = spec_.config;
  PlanResult result = spec_.kind == PlannerKind::kMpcc
                          ? plan_mpcc(ego, map, predictions, cfg.weights, params_, prev, t0, cfg.solver)
                          : plan_rbmpcc(ego, map, predictions, cfg.weights, params_, cfg.contingency, prev, t0,
                                        cfg.solver);
  previous_ = result;
  return result;
}

}  // namespace loopbench
