#include "loopbench/mpcc.hpp"

#include <algorithm>
#include <cmath>

namespace loopbench {

std::vector<EgoControl> shift_controls(const PlanResult& previous, double t0, int horizon, double dt) {
  std::vector<EgoControl> out(static_cast<std::size_t>(horizon));
  const auto& u = previous.controls;
  if (u.empty()) return out;
  const double last = static_cast<double>(u.size() - 1);
  for (int k = 0; k < horizon; ++k) {
    double pos = (t0 + k * dt - previous.t0) / previous.dt;
    const double r = std::round(pos);
    if (std::abs(pos - r) < 1e-9) pos = r;
    pos = std::clamp(pos, 0.0, last);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(i);
    if (f == 0.0 || i + 1 >= u.size()) {
      out[static_cast<std::size_t>(k)] = u[std::min(i, u.size() - 1)];
    } else {
      out[static_cast<std::size_t>(k)] = {u[i].jerk + f * (u[i + 1].jerk - u[i].jerk),
                                          u[i].steer_rate + f * (u[i + 1].steer_rate - u[i].steer_rate)};
    }
  }
  return out;
}

PlanResult plan_mpcc(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                     const OcpWeights& weights, const EgoModelParams& params, const PlanResult* previous, double t0,
                     const SolverOptions& options) {
  const OcpProblem problem = assemble_ocp(ego, map, predictions, weights, params, ModeSelector::kMostProbable, t0);
  std::optional<ControlTree> warm;
  if (previous != nullptr) warm = make_tree(problem, shift_controls(*previous, t0, weights.horizon, weights.dt));
  PlanResult result = solve_ocp(problem, warm, options);
  result.t0 = t0;
  return result;
}

}  // namespace loopbench
