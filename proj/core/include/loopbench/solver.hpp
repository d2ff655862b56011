#pragma once

#include <optional>
#include <vector>

#include "loopbench/ocp.hpp"
#include "loopbench/vehicle.hpp"

namespace loopbench {

struct BranchPlan {
  double prob{1.0};
  std::vector<EgoState> states;
  std::vector<EgoControl> controls;
};

struct PlanResult {
  double t0{0.0};
  double dt{0.2};
  std::vector<EgoState> states;      // N + 1
  std::vector<EgoControl> controls;  // N
  bool converged{false};
  int iterations{0};  // summed over all descents
  double cost{0.0};
  double solve_time{0.0};  // wall clock, s
  std::vector<double> cost_history;
  int trunk_len{0};
  std::vector<BranchPlan> branches;  // one entry per scenario-tree branch
};

/// Controls per branch, each of length N. Entries [0, trunk_len) are shared.
using ControlTree = std::vector<std::vector<EgoControl>>;
using StateTree = std::vector<std::vector<EgoState>>;

/// Rolls every branch out from problem.z0. Trunk states are computed once and
/// copied, so they are identical across branches.
StateTree rollout(const OcpProblem& problem, const ControlTree& controls);

/// Probability-weighted objective of the stacked problem.
double evaluate_cost(const OcpProblem& problem, const ControlTree& controls);

/// Gradient of evaluate_cost with respect to every control (adjoint method).
/// Trunk entries are identical across branches and hold the full derivative.
std::vector<std::vector<ControlVec>> cost_gradient(const OcpProblem& problem, const ControlTree& controls);

/// Broadcasts a single sequence to all branches and forces a shared trunk.
ControlTree make_tree(const OcpProblem& problem, const std::vector<EgoControl>& controls);

/// Box-constrained iLQR over the scenario tree. One descent starts from the
/// cheapest of the zero-control and braking rollouts, a second from the warm
/// start if given; the lower final cost wins (ties go to the warm start).
/// Each descent only accepts strict decreases; cost_history belongs to the
/// winner and `iterations` counts both. Throws NumericalError on a non-finite cost.
PlanResult solve_ocp(const OcpProblem& problem, const std::optional<ControlTree>& warm_start,
                     const SolverOptions& options = {});

}  // namespace loopbench
