#pragma once

#include <optional>
#include <string>
#include <vector>

#include "loopbench/ocp.hpp"
#include "loopbench/solver.hpp"

namespace loopbench {

struct ContingencyConfig {
  int trunk_len{5};
  double inflation_c{2.0};
  int max_branches{4};

  void validate() const;
};

struct FootprintStep {
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  double half_length{0.0};
  double half_width{0.0};
};

/// Mode mean boxes inflated by c * sigma on the plan grid (entry k is step k + 1).
struct ModeOccupancy {
  std::string agent_id;
  std::size_t mode_index{0};
  std::vector<FootprintStep> steps;
};

ModeOccupancy mode_occupancy(const AgentPrediction& agent, std::size_t mode, double t0, const OcpWeights& weights,
                             double inflation_c);

enum class InteractionClass { kClear, kLead, kCrossingYield, kCrossingPass };
std::string_view to_string(InteractionClass c);

/// Class of one occupancy against the ego's warm-start plan.
InteractionClass classify_mode(const ModeOccupancy& occ, const std::vector<EgoState>& ego_plan, const MapModel& map,
                               const EgoModelParams& params);

struct TreeBranch {
  double prob{0.0};
  std::vector<InteractionClass> classes;
  std::vector<std::size_t> modes;  // modes of the branching agent
};

struct ScenarioTree {
  int trunk_len{5};
  std::optional<std::size_t> branching_agent;  // index into the prediction list
  std::vector<TreeBranch> branches;

  /// Throws InvariantError unless probabilities sum to 1 and the branching
  /// agent's modes are partitioned.
  void validate(std::size_t mode_count) const;
};

/// Peak potential-field value of any mode of `agent` along the ego plan.
double interaction_relevance(const AgentPrediction& agent, const std::vector<EgoState>& ego_plan, double t0,
                             const OcpWeights& weights, const EgoModelParams& params);

ScenarioTree build_scenario_tree(const std::vector<AgentPrediction>& predictions, const std::vector<EgoState>& ego_plan,
                                 const MapModel& map, const OcpWeights& weights, const EgoModelParams& params,
                                 const ContingencyConfig& cfg, double t0);

/// Stacked OCP for a tree: the branching agent's member modes per branch,
/// every other agent's most probable mode in all branches.
OcpProblem assemble_tree_ocp(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                             const ScenarioTree& tree, const OcpWeights& weights, const EgoModelParams& params,
                             double t0);

/// Branch MPCC. The returned states/controls are the trunk followed by the
/// most probable branch; all branches are kept in `branches`.
PlanResult plan_rbmpcc(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                       const OcpWeights& weights, const EgoModelParams& params, const ContingencyConfig& cfg,
                       const PlanResult* previous, double t0, const SolverOptions& options = {},
                       ScenarioTree* tree_out = nullptr);

}  // namespace loopbench
