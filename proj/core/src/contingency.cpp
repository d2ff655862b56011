#include "loopbench/contingency.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "loopbench/errors.hpp"
#include "loopbench/mpcc.hpp"

namespace loopbench {

namespace {

constexpr double kSameDirection = kPi / 4.0;

struct FrenetBox {
  double s{0.0};
  double d{0.0};
  double half_s{0.0};
  double half_d{0.0};
  double rel_heading{0.0};
};

bool overlaps(double lo_a, double hi_a, double lo_b, double hi_b) { return lo_a <= hi_b && lo_b <= hi_a; }

std::vector<EgoState> rollout_single(const EgoState& z0, const std::vector<EgoControl>& u, double dt,
                                     const EgoModelParams& params) {
  std::vector<EgoState> out{z0};
  out.reserve(u.size() + 1);
  for (const auto& c : u) out.push_back(bicycle_step(out.back(), c, dt, params));
  return out;
}

}  // namespace

void ContingencyConfig::validate() const {
  if (trunk_len < 1) throw ConfigError("trunk_len must be >= 1");
  if (!(inflation_c >= 0.0)) throw ConfigError("inflation_c must be non-negative");
  if (max_branches < 1) throw ConfigError("max_branches must be >= 1");
}

std::string_view to_string(InteractionClass c) {
  switch (c) {
    case InteractionClass::kClear:
      return "clear";
    case InteractionClass::kLead:
      return "lead";
    case InteractionClass::kCrossingYield:
      return "crossing_yield";
    case InteractionClass::kCrossingPass:
      return "crossing_pass";
  }
  return "unknown";
}

ModeOccupancy mode_occupancy(const AgentPrediction& agent, std::size_t mode, double t0, const OcpWeights& weights,
                             double inflation_c) {
  const Obstacle ob = make_obstacle(agent, mode, t0, weights);
  ModeOccupancy occ;
  occ.agent_id = agent.prediction.agent_id();
  occ.mode_index = mode;
  occ.steps.resize(ob.x.size());
  for (std::size_t k = 0; k < ob.x.size(); ++k) {
    occ.steps[k] = {ob.x[k], ob.y[k], ob.heading[k], 0.5 * ob.length + inflation_c * ob.sigma_long[k],
                    0.5 * ob.width + inflation_c * ob.sigma_lat[k]};
  }
  return occ;
}

InteractionClass classify_mode(const ModeOccupancy& occ, const std::vector<EgoState>& ego_plan, const MapModel& map,
                               const EgoModelParams& params) {
  const double half_l = 0.5 * params.length;
  const double half_w = 0.5 * params.width;
  std::vector<double> ego_s(ego_plan.size());
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = -std::numeric_limits<double>::infinity();
  std::size_t hint = map.project(ego_plan.front().x, ego_plan.front().y).segment;
  for (std::size_t k = 0; k < ego_plan.size(); ++k) {
    const PathProjection p = map.project(ego_plan[k].x, ego_plan[k].y, hint);
    hint = p.segment;
    ego_s[k] = p.s;
    d_min = std::min(d_min, p.d);
    d_max = std::max(d_max, p.d);
  }
  const double strip_d_lo = d_min - half_w;
  const double strip_d_hi = d_max + half_w;
  const double strip_s_lo = ego_s.front() - half_l;
  const double strip_s_hi = ego_s.back() + half_l;

  for (std::size_t i = 0; i < occ.steps.size(); ++i) {
    const FootprintStep& f = occ.steps[i];
    const PathProjection p = map.project(f.x, f.y);
    if (p.distance() > kMaxProjectionDistance) continue;
    const double rel = angle_diff(f.heading, std::atan2(p.ty, p.tx));
    const double c = std::abs(std::cos(rel));
    const double s = std::abs(std::sin(rel));
    const double half_s = c * f.half_length + s * f.half_width;
    const double half_d = s * f.half_length + c * f.half_width;
    if (!overlaps(p.s - half_s, p.s + half_s, strip_s_lo, strip_s_hi) ||
        !overlaps(p.d - half_d, p.d + half_d, strip_d_lo, strip_d_hi)) {
      continue;
    }
    const std::size_t k = std::min(i + 1, ego_s.size() - 1);  // occupancy entry i is plan step i + 1
    if (std::abs(rel) <= kSameDirection) {
      // Followers entering the strip behind the ego never constrain it.
      return p.s >= ego_s[k] ? InteractionClass::kLead : InteractionClass::kClear;
    }
    const double conflict_lo = p.s - half_s;
    std::size_t ego_arrival = ego_s.size();
    for (std::size_t j = 0; j < ego_s.size(); ++j) {
      if (ego_s[j] + half_l >= conflict_lo) {
        ego_arrival = j;
        break;
      }
    }
    return k <= ego_arrival ? InteractionClass::kCrossingYield : InteractionClass::kCrossingPass;
  }
  return InteractionClass::kClear;
}

void ScenarioTree::validate(std::size_t mode_count) const {
  if (branches.empty()) throw InvariantError("scenario tree has no branches");
  double total = 0.0;
  for (const auto& b : branches) total += b.prob;
  if (std::abs(total - 1.0) > 1e-9) throw InvariantError("scenario tree branch probabilities do not sum to 1");
  if (!branching_agent) return;
  std::vector<int> seen(mode_count, 0);
  for (const auto& b : branches) {
    for (std::size_t m : b.modes) {
      if (m >= mode_count) throw InvariantError("scenario tree references an unknown mode");
      ++seen[m];
    }
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
    throw InvariantError("scenario tree does not partition the branching agent's modes");
  }
  if (branches.size() > mode_count) throw InvariantError("scenario tree has more branches than modes");
}

double interaction_relevance(const AgentPrediction& agent, const std::vector<EgoState>& ego_plan, double t0,
                             const OcpWeights& weights, const EgoModelParams& params) {
  const PotentialShape shape{weights.sigma_long, weights.sigma_lat};
  double peak = 0.0;
  for (std::size_t m = 0; m < agent.prediction.mode_count(); ++m) {
    const Obstacle ob = make_obstacle(agent, m, t0, weights);
    for (std::size_t k = 0; k < ob.x.size() && k + 1 < ego_plan.size(); ++k) {
      const EgoState& z = ego_plan[k + 1];
      const double v = potential_field(z.x, z.y, z.heading, params.length, params.width, ob.x[k], ob.y[k],
                                       ob.heading[k], ob.length, ob.width, ob.sigma_long[k], ob.sigma_lat[k], shape,
                                       1.0)
                           .value;
      peak = std::max(peak, v);
    }
  }
  return peak;
}

ScenarioTree build_scenario_tree(const std::vector<AgentPrediction>& predictions, const std::vector<EgoState>& ego_plan,
                                 const MapModel& map, const OcpWeights& weights, const EgoModelParams& params,
                                 const ContingencyConfig& cfg, double t0) {
  cfg.validate();
  ScenarioTree tree;
  tree.trunk_len = std::min(cfg.trunk_len, weights.horizon);
  if (predictions.empty()) {
    tree.branches.push_back({1.0, {InteractionClass::kClear}, {}});
    return tree;
  }
  std::size_t best = 0;
  double best_value = -1.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = interaction_relevance(predictions[i], ego_plan, t0, weights, params);
    if (r > best_value) {
      best_value = r;
      best = i;
    }
  }
  tree.branching_agent = best;
  const AgentPrediction& agent = predictions[best];

  constexpr std::array<InteractionClass, 4> kOrder = {InteractionClass::kClear, InteractionClass::kLead,
                                                      InteractionClass::kCrossingYield,
                                                      InteractionClass::kCrossingPass};
  std::array<TreeBranch, 4> by_class;
  for (std::size_t m = 0; m < agent.prediction.mode_count(); ++m) {
    const InteractionClass c =
        classify_mode(mode_occupancy(agent, m, t0, weights, cfg.inflation_c), ego_plan, map, params);
    auto& br = by_class[static_cast<std::size_t>(c)];
    br.modes.push_back(m);
    br.prob += agent.prediction.mode(m).prob;
  }
  for (std::size_t i = 0; i < kOrder.size(); ++i) {
    TreeBranch& br = by_class[i];
    if (br.modes.empty()) continue;
    br.classes.push_back(kOrder[i]);
    if (static_cast<int>(tree.branches.size()) == cfg.max_branches) {
      TreeBranch& tail = tree.branches.back();
      tail.prob += br.prob;
      tail.classes.push_back(kOrder[i]);
      tail.modes.insert(tail.modes.end(), br.modes.begin(), br.modes.end());
      std::sort(tail.modes.begin(), tail.modes.end());
    } else {
      tree.branches.push_back(std::move(br));
    }
  }
  // Renormalise against rounding in the per-class sums.
  double total = 0.0;
  for (const auto& b : tree.branches) total += b.prob;
  for (auto& b : tree.branches) b.prob /= total;
  tree.validate(agent.prediction.mode_count());
  return tree;
}

OcpProblem assemble_tree_ocp(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                             const ScenarioTree& tree, const OcpWeights& weights, const EgoModelParams& params,
                             double t0) {
  if (map.empty()) throw ConfigError("cannot assemble an OCP on an empty reference path");
  weights.validate();
  OcpProblem problem;
  problem.z0 = clamp_state(ego, params);
  problem.map = &map;
  problem.params = params;
  problem.weights = weights;
  problem.trunk_len = tree.trunk_len;
  problem.path_hint = map.project(ego.x, ego.y).segment;

  std::vector<Obstacle> most_probable(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (tree.branching_agent && *tree.branching_agent == i) continue;
    most_probable[i] = make_obstacle(predictions[i], predictions[i].prediction.most_probable(), t0, weights);
  }
  for (const auto& tb : tree.branches) {
    OcpBranch br;
    br.prob = tb.prob;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (tree.branching_agent && *tree.branching_agent == i) {
        for (std::size_t m : tb.modes) {
          br.obstacles.push_back(make_obstacle(predictions[i], m, t0, weights));
          br.obstacles.back().group = static_cast<int>(i);
        }
      } else {
        br.obstacles.push_back(most_probable[i]);
      }
    }
    problem.branches.push_back(std::move(br));
  }
  return problem;
}

PlanResult plan_rbmpcc(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                       const OcpWeights& weights, const EgoModelParams& params, const ContingencyConfig& cfg,
                       const PlanResult* previous, double t0, const SolverOptions& options, ScenarioTree* tree_out) {
  const std::vector<EgoControl> warm =
      previous != nullptr ? shift_controls(*previous, t0, weights.horizon, weights.dt)
                          : std::vector<EgoControl>(static_cast<std::size_t>(weights.horizon));
  const std::vector<EgoState> ego_plan = rollout_single(clamp_state(ego, params), warm, weights.dt, params);
  const ScenarioTree tree = build_scenario_tree(predictions, ego_plan, map, weights, params, cfg, t0);
  const OcpProblem problem = assemble_tree_ocp(ego, map, predictions, tree, weights, params, t0);
  std::optional<ControlTree> warm_tree;
  if (previous != nullptr) warm_tree = make_tree(problem, warm);
  PlanResult result = solve_ocp(problem, warm_tree, options);
  result.t0 = t0;
  if (tree_out != nullptr) *tree_out = tree;
  return result;
}

}  // namespace loopbench
