#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "loopbench/contingency.hpp"
#include "loopbench/experiment.hpp"
#include "loopbench/mpcc.hpp"
#include "loopbench/predictors.hpp"
#include "loopbench/scenario_gen.hpp"
#include "loopbench/solver.hpp"

using namespace loopbench;

namespace {

struct World {
  Scenario scenario;
  EgoState ego;
  std::vector<AgentPrediction> agents;
};

// Cut-in fixture at t = 2 s with five-mode kinematic predictions.
const World& world() {
  static const World w = [] {
    World out;
    out.scenario = generate_scenario(ScenarioTemplate::kCutIn, {}, 0);
    const double t = 2.0;
    const AgentState e = interpolate_state(ego_reference_log(out.scenario), t);
    out.ego = {e.x, e.y, e.heading, e.speed, 0.0, 0.0};
    for (const auto& track : out.scenario.agents) {
      const TrajectorySample hist = agent_history(track, t, 10, out.scenario.sim_dt);
      out.agents.push_back({track.info, interpolate_state(track.log, t),
                            predict_kinematic_multimodal(track.info.id, hist, PredictorConfig{})});
    }
    return out;
  }();
  return w;
}

EgoModelParams ego_params(const Scenario& sc) {
  EgoModelParams p;
  p.length = sc.ego.length;
  p.width = sc.ego.width;
  p.wheelbase = sc.ego.wheelbase;
  return p;
}

void BM_KinematicPredictor(benchmark::State& state) {
  const World& w = world();
  const TrajectorySample hist = agent_history(w.scenario.agents.front(), 2.0, 10, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_kinematic_multimodal("a", hist, PredictorConfig{}));
  }
}
BENCHMARK(BM_KinematicPredictor);

void BM_CostAndGradient(benchmark::State& state) {
  const World& w = world();
  const OcpProblem p = assemble_ocp(w.ego, w.scenario.map, w.agents, OcpWeights{}, ego_params(w.scenario),
                                    ModeSelector::kMostProbable, 2.0);
  const ControlTree controls = make_tree(p, std::vector<EgoControl>(static_cast<std::size_t>(p.weights.horizon)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_cost(p, controls));
    benchmark::DoNotOptimize(cost_gradient(p, controls));
  }
}
BENCHMARK(BM_CostAndGradient);

void BM_PlanMpcc(benchmark::State& state) {
  const World& w = world();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        plan_mpcc(w.ego, w.scenario.map, w.agents, OcpWeights{}, ego_params(w.scenario), nullptr, 2.0));
  }
}
BENCHMARK(BM_PlanMpcc)->Unit(benchmark::kMillisecond);

void BM_PlanRbmpcc(benchmark::State& state) {
  const World& w = world();
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan_rbmpcc(w.ego, w.scenario.map, w.agents, OcpWeights{}, ego_params(w.scenario),
                                         ContingencyConfig{}, nullptr, 2.0));
  }
}
BENCHMARK(BM_PlanRbmpcc)->Unit(benchmark::kMillisecond);

void BM_ClosedLoopRun(benchmark::State& state) {
  const World& w = world();
  PredictorSpec pred;
  pred.name = "kinematic";
  pred.kind = PredictorKind::kKinematic;
  const PlannerKind kind = state.range(0) == 0 ? PlannerKind::kMpcc : PlannerKind::kRbmpcc;
  const PlannerSpec planner{std::string(to_string(kind)), kind, {}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_run(w.scenario, pred, planner, SimConfig{}, ScoreConfig{}));
  }
}
BENCHMARK(BM_ClosedLoopRun)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
