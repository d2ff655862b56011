#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loopbench/contingency.hpp"
#include "loopbench/mpcc.hpp"

namespace loopbench {

enum class PlannerKind { kMpcc, kRbmpcc };

std::string_view to_string(PlannerKind kind);
/// Throws ConfigError listing the valid names.
PlannerKind planner_kind_from_string(std::string_view name);
std::span<const std::string_view> planner_kind_names();

struct PlannerConfig {
  OcpWeights weights;
  SolverOptions solver;
  ContingencyConfig contingency;
};

struct PlannerSpec {
  std::string name;
  PlannerKind kind{PlannerKind::kMpcc};
  PlannerConfig config;
};

/// Holds the configuration and the previous plan used as warm start.
class Planner {
 public:
  Planner(PlannerSpec spec, EgoModelParams params);

  PlanResult plan(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions, double t0);
  void reset() { previous_.reset(); }
  const std::optional<PlanResult>& previous() const { return previous_; }
  const PlannerSpec& spec() const { return spec_; }

 private:
  PlannerSpec spec_;
  EgoModelParams params_;
  std::optional<PlanResult> previous_;
};

}  // namespace loopbench
