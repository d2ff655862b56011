#pragma once

#include <vector>

#include "loopbench/ocp.hpp"
#include "loopbench/solver.hpp"

namespace loopbench {

/// Previous plan's controls re-sampled onto the grid starting at t0 (linear
/// in time, last control held past the end).
std::vector<EgoControl> shift_controls(const PlanResult& previous, double t0, int horizon, double dt);

/// Single-trajectory MPCC: each agent contributes only its most probable mode.
PlanResult plan_mpcc(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                     const OcpWeights& weights, const EgoModelParams& params, const PlanResult* previous, double t0,
                     const SolverOptions& options = {});

}  // namespace loopbench
