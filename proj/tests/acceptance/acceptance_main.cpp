// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "loopbench/contingency.hpp"
#include "loopbench/experiment.hpp"
#include "loopbench/metrics.hpp"
#include "loopbench/mpcc.hpp"
#include "loopbench/scenario_io.hpp"
#include "loopbench/sim.hpp"
#include "loopbench/solver.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace loopbench;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<Scenario>& fixtures() {
  static const std::vector<Scenario> all = [] {
    std::vector<Scenario> out;
    for (const auto& p : scenario_files(LOOPBENCH_FIXTURES "/scenarios")) out.push_back(load_scenario(p));
    return out;
  }();
  return all;
}

PredictorSpec predictor_of(PredictorKind kind, std::string name) {
  PredictorSpec s;
  s.name = std::move(name);
  s.kind = kind;
  return s;
}

PredictorSpec degraded(double offset, double shuffle, std::string name) {
  PredictorSpec s = predictor_of(PredictorKind::kDegraded, std::move(name));
  s.config.degraded.offset_amp = offset;
  s.config.degraded.mode_shuffle_prob = shuffle;
  return s;
}

PlannerSpec planner_of(PlannerKind kind) { return {std::string(to_string(kind)), kind, {}}; }

std::vector<EvaluationRecord> sweep(const std::vector<PredictorSpec>& predictors,
                                    const std::vector<PlannerSpec>& planners, int jobs) {
  SweepOptions opts;
  opts.jobs = jobs;
  return run_sweep(fixtures(), predictors, planners, SimConfig{}, ScoreConfig{}, TcMode::kMostProbable, opts);
}

struct Group {
  std::vector<double> score, jerk, ttc, tc;
  int at_fault{0};
  int failed{0};
};

std::map<std::pair<std::string, std::string>, Group> group(const std::vector<EvaluationRecord>& recs) {
  std::map<std::pair<std::string, std::string>, Group> out;
  for (const auto& r : recs) {
    Group& g = out[{r.predictor, r.planner}];
    g.score.push_back(r.cl.score);
    g.jerk.push_back(r.cl.comfort.mean_abs_jerk);
    g.ttc.push_back(r.cl.ttc_min);
    g.tc.push_back(r.ol.tc);
    g.at_fault += r.cl.at_fault_collision ? 1 : 0;
    g.failed += r.failed ? 1 : 0;
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Linear-interpolated sample quantile (type 7).
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string csv_without_wall_clock(const std::vector<EvaluationRecord>& recs) {
  std::vector<EvaluationRecord> copy = recs;
  for (auto& r : copy) r.solve_time_mean_ms = 0.0;
  return records_csv(copy);
}

// Shared between C8 and C11.
std::vector<EvaluationRecord>& kinematic_suite() {
  static std::vector<EvaluationRecord> recs;
  return recs;
}

Outcome c1_oracle_zero_row() {
  const auto start = std::chrono::steady_clock::now();
  double ade = 0.0, fde = 0.0, tc = 0.0;
  std::size_t samples = 0, tc_samples = 0;
  const PredictorSpec oracle = predictor_of(PredictorKind::kOracle, "oracle");
  for (const auto& sc : fixtures()) {
    const auto r = evaluate_run(sc, oracle, planner_of(PlannerKind::kMpcc), SimConfig{}, ScoreConfig{});
    ade = std::max(ade, std::abs(r.ol.min_ade_6));
    fde = std::max(fde, std::abs(r.ol.min_fde_6));
    tc = std::max(tc, std::abs(r.ol.tc));
    samples += r.ol.samples;
    tc_samples += r.ol.tc_samples;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = fixtures().size() == 50 && ade <= 1e-9 && fde <= 1e-9 && tc <= 1e-9 && samples > 0 &&
                    tc_samples > 0 && secs < 60.0;
  return {pass, fmt("%zu scenarios, %zu OL samples: max minADE6 %.1e, minFDE6 %.1e, TC %.1e in %.1f s",
                    fixtures().size(), samples, ade, fde, tc, secs)};
}

Outcome c2_metric_oracle() {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0, non_monotone = 0;
  double nll_dev = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t modes = 1 + static_cast<std::size_t>(trial % 8);
    const auto p = build::random_prediction(rng, modes, 5 + static_cast<std::size_t>(trial % 30));
    const auto gt = build::random_gt(rng, p.horizon());
    const auto pos = build::positions(gt);
    double prev[3] = {INFINITY, INFINITY, INFINITY};
    for (std::size_t k = 1; k <= modes; ++k) {
      const double a = min_ade(p, gt, k), f = min_fde(p, gt, k), n = min_nll(p, gt, k);
      if (a != oracle::brute_min(p, pos, k, oracle::Metric::kAde)) ++mismatches;
      if (f != oracle::brute_min(p, pos, k, oracle::Metric::kFde)) ++mismatches;
      const double bn = oracle::brute_min(p, pos, k, oracle::Metric::kNll);
      nll_dev = std::max(nll_dev, std::abs(n - bn) / std::max(1.0, std::abs(bn)));
      if (a > prev[0] || f > prev[1] || n > prev[2]) ++non_monotone;
      prev[0] = a;
      prev[1] = f;
      prev[2] = n;
    }
  }
  // The NLL oracle goes through an explicit covariance inverse, so it agrees
  // to rounding rather than bit for bit.
  const bool pass = mismatches == 0 && non_monotone == 0 && nll_dev < 1e-12;
  return {pass, fmt("1000 sets: %zu ADE/FDE mismatches, max NLL rel. deviation %.1e, %zu monotonicity violations",
                    mismatches, nll_dev, non_monotone)};
}

Outcome c3_ttcp_construction() {
  // Ego from the origin along +x at 10 m/s; agent 24 m short of the crossing at x = 20.
  const Scenario cross = build::scenario(
      "cross", {build::track("c", build::line_log(20.0, -24.0, kPi / 2.0, 10.0, 15.0))}, 10.0);
  const Scenario parallel =
      build::scenario("parallel", {build::track("p", build::line_log(0.0, 6.0, 0.0, 10.0, 15.0))}, 10.0);
  const auto d = scenario_delta_ttcp(cross);
  const bool accepted = is_interactive(cross, 3.0);
  const bool rejected = !is_interactive(parallel, 3.0);
  const bool pass = d && std::abs(*d - 0.4) < 1e-9 && accepted && rejected;
  return {pass, fmt("crossing dTTCP_min %.12f s, accepted %s; parallel control rejected %s", d ? *d : -1.0,
                    accepted ? "yes" : "no", rejected ? "yes" : "no")};
}

Outcome c4_temporal_consistency() {
  // Constant-velocity agents under the CV predictor.
  double cv_tc = 0.0;
  std::size_t cv_samples = 0;
  for (int i = 0; i < 5; ++i) {
    const Scenario sc = build::scenario(
        "cv" + std::to_string(i),
        {build::track("a", build::line_log(30.0 + 5 * i, 3.5, 0.0, 6.0 + i, 15.0)),
         build::track("b", build::line_log(150.0, -10.0 + i, kPi, 4.0 + i, 15.0))},
        10.0);
    const auto r = evaluate_run(sc, predictor_of(PredictorKind::kConstantVelocity, "cv"),
                                planner_of(PlannerKind::kMpcc), SimConfig{}, ScoreConfig{});
    cv_tc = std::max(cv_tc, std::abs(r.ol.tc));
    cv_samples += r.ol.tc_samples;
  }

  const auto recs = sweep({degraded(1.0, 0.0, "shuffle_0"), degraded(1.0, 1.0, "shuffle_1")},
                          {planner_of(PlannerKind::kMpcc)}, 4);
  std::map<std::string, std::pair<double, double>> paired;
  for (const auto& r : recs) {
    (r.predictor == "shuffle_0" ? paired[r.scenario].first : paired[r.scenario].second) = r.ol.tc;
  }
  std::size_t larger = 0;
  double min_gap = INFINITY;
  for (const auto& [name, tcs] : paired) {
    larger += tcs.second > tcs.first ? 1 : 0;
    min_gap = std::min(min_gap, tcs.second - tcs.first);
  }
  const bool pass = cv_tc < 1e-9 && cv_samples > 0 && larger == paired.size() && paired.size() == 50;
  return {pass, fmt("CV max TC %.1e over %zu samples; shuffle 1.0 > 0.0 on %zu/%zu scenarios (min gap %.4f)", cv_tc,
                    cv_samples, larger, paired.size(), min_gap)};
}

Outcome c5_hard_gate() {
  const Scenario sc = empty_road_scenario(10.0);
  const TrajectorySample expert = ego_reference_log(sc);
  SimTrace perfect;
  perfect.scenario = sc.name;
  perfect.dt = sc.sim_dt;
  for (const auto& s : expert.states()) {
    StepRecord rec;
    rec.t = s.t;
    rec.ego = {s.x, s.y, s.heading, s.speed, 0.0, 0.0};
    perfect.steps.push_back(rec);
  }
  const double perfect_score = closed_loop_metrics(perfect, sc).score;

  // Inject an at-fault contact into the perfect trace and into real runs.
  int nonzero = 0, injected = 0;
  SimTrace hit = perfect;
  hit.steps[40].collisions.push_back({"ghost", hit.steps[40].t, true});
  nonzero += closed_loop_metrics(hit, sc).score != 0.0 ? 1 : 0;
  ++injected;
  for (std::size_t i = 0; i < fixtures().size(); i += 5) {
    SimTrace t;
    evaluate_run(fixtures()[i], predictor_of(PredictorKind::kOracle, "oracle"), planner_of(PlannerKind::kMpcc),
                 SimConfig{}, ScoreConfig{}, TcMode::kMostProbable, &t);
    t.steps[t.steps.size() / 2].collisions.push_back({"ghost", 0.0, true});
    nonzero += closed_loop_metrics(t, fixtures()[i]).score != 0.0 ? 1 : 0;
    ++injected;
  }
  const bool pass = perfect_score == 1.0 && nonzero == 0;
  return {pass, fmt("perfect trace scores %.17g; %d/%d traces with an injected at-fault collision score non-zero",
                    perfect_score, nonzero, injected)};
}

Outcome c6_dynamics_and_solver() {
  const EgoModelParams params;
  double heading_err = 0.0;
  for (double delta : {-0.4, -0.1, 0.05, 0.3}) {
    for (double v : {1.0, 7.0, 14.0}) {
      EgoState z{0.0, 0.0, -0.3, v, 0.0, delta};
      for (int k = 1; k <= 100; ++k) {
        z = bicycle_step(z, {}, 0.1, params);
        heading_err =
            std::max(heading_err, std::abs(z.heading - oracle::bicycle_heading(-0.3, v, delta, params.wheelbase, k * 0.1)));
      }
    }
  }

  static const MapModel road = build::straight_map();
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int non_monotone = 0;
  double consistency = 0.0, grad_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const EgoState z0{20.0 * u(rng), 2.0 * u(rng) - 1.0, 0.2 * u(rng) - 0.1, 14.0 * u(rng), 2.0 * u(rng) - 1.0,
                      0.1 * u(rng) - 0.05};
    std::vector<AgentPrediction> agents;
    if (trial % 2 == 0) {
      agents.push_back(build::cv_agent("a", z0.x + 15 + 30 * u(rng), 3 * u(rng) - 1, 0.0, 6 * u(rng), {{1.0, 0.0}}));
    }
    const OcpProblem p = assemble_ocp(z0, road, agents, OcpWeights{}, params, ModeSelector::kMostProbable, 0.0);
    const PlanResult r = solve_ocp(p, std::nullopt);
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) non_monotone += r.cost_history[i] > r.cost_history[i - 1];
    const StateTree z = rollout(p, make_tree(p, r.controls));
    for (std::size_t k = 0; k < z[0].size(); ++k) {
      consistency = std::max(consistency, std::hypot(r.states[k].x - z[0][k].x, r.states[k].y - z[0][k].y));
    }

    if (trial % 10 == 0) {
      // Smooth interior point for the gradient check.
      std::vector<EgoControl> c(static_cast<std::size_t>(p.weights.horizon));
      for (auto& x : c) x = {0.6 * u(rng) - 0.3, 0.04 * u(rng) - 0.02};
      OcpProblem q = p;
      q.z0 = {z0.x, z0.y, z0.heading, 5.0 + z0.v * 0.5, 0.0, 0.0};
      const ControlTree tree = make_tree(q, c);
      const auto g = cost_gradient(q, tree);
      double err = 0.0, scale = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) {
        for (int j = 0; j < 2; ++j) {
          ControlTree tp = tree, tm = tree;
          (j == 0 ? tp[0][k].jerk : tp[0][k].steer_rate) += 1e-6;
          (j == 0 ? tm[0][k].jerk : tm[0][k].steer_rate) -= 1e-6;
          const double fd = (evaluate_cost(q, tp) - evaluate_cost(q, tm)) / 2e-6;
          err = std::max(err, std::abs(fd - g[0][k](j)));
          scale = std::max(scale, std::abs(fd));
        }
      }
      grad_rel = std::max(grad_rel, err / std::max(1.0, scale));
    }
  }
  const bool pass = heading_err <= 1e-9 && non_monotone == 0 && consistency <= 1e-6 && grad_rel <= 1e-4;
  return {pass, fmt("heading closed form %.1e; %d cost increases over 100 solves; consistency %.1e m; "
                    "gradient rel. error %.1e",
                    heading_err, non_monotone, consistency, grad_rel)};
}

Outcome c7_trunk_identity() {
  const PredictorSpec kinematic = predictor_of(PredictorKind::kKinematic, "kinematic");
  const PredictorSpec oracle = predictor_of(PredictorKind::kOracle, "oracle");
  const OcpWeights weights;
  const ContingencyConfig cc;
  int calls = 0, forked = 0, trunk_violations = 0;
  double reduction_gap = 0.0;
  for (const auto& sc : fixtures()) {
    EgoModelParams params;
    params.length = sc.ego.length;
    params.width = sc.ego.width;
    params.wheelbase = sc.ego.wheelbase;
    const TrajectorySample expert = ego_reference_log(sc);
    for (double t : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}) {
      const AgentState e = interpolate_state(expert, t);
      const EgoState ego{e.x, e.y, e.heading, e.speed, 0.0, 0.0};
      std::vector<AgentPrediction> multi, single;
      for (const auto& track : sc.agents) {
        const AgentState now = interpolate_state(track.log, t);
        if (std::hypot(now.x - ego.x, now.y - ego.y) > 50.0) continue;
        const TrajectorySample hist = agent_history(track, t, 10, sc.sim_dt);
        const PredictionContext ctx{sc, track, hist, static_cast<std::uint64_t>(std::lround(t / sc.sim_dt)), t};
        multi.push_back({track.info, now, predict(kinematic, ctx)});
        single.push_back({track.info, now, predict(oracle, ctx)});
      }
      const PlanResult r = plan_rbmpcc(ego, sc.map, multi, weights, params, cc, nullptr, t);
      ++calls;
      forked += r.branches.size() > 1 ? 1 : 0;
      const auto trunk = static_cast<std::size_t>(r.trunk_len);
      for (const auto& b : r.branches) {
        for (std::size_t k = 0; k < trunk; ++k) {
          if (b.controls[k].jerk != r.branches[0].controls[k].jerk ||
              b.controls[k].steer_rate != r.branches[0].controls[k].steer_rate) {
            ++trunk_violations;
          }
        }
      }
      const PlanResult m = plan_mpcc(ego, sc.map, single, weights, params, nullptr, t);
      const PlanResult c = plan_rbmpcc(ego, sc.map, single, weights, params, cc, nullptr, t);
      reduction_gap = std::max(reduction_gap, std::abs(m.cost - c.cost));
    }
  }
  const bool pass = forked > 0 && trunk_violations == 0 && reduction_gap <= 1e-6;
  return {pass, fmt("%d planning calls, %d forked; %d trunk control mismatches; single-mode |cost gap| max %.1e",
                    calls, forked, trunk_violations, reduction_gap)};
}

Outcome c8_rbmpcc_safety() {
  const auto start = std::chrono::steady_clock::now();
  kinematic_suite() = sweep({predictor_of(PredictorKind::kKinematic, "kinematic")},
                            {planner_of(PlannerKind::kMpcc), planner_of(PlannerKind::kRbmpcc)}, 4);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto g = group(kinematic_suite());
  const Group& mp = g[{"kinematic", "mpcc"}];
  const Group& rb = g[{"kinematic", "rbmpcc"}];
  const double cr_mp = mp.at_fault / 50.0, cr_rb = rb.at_fault / 50.0;
  const double ttc_mp = mean(mp.ttc), ttc_rb = mean(rb.ttc);
  const bool pass = mp.score.size() == 50 && rb.score.size() == 50 && mp.failed == 0 && rb.failed == 0 &&
                    cr_rb <= cr_mp && ttc_rb >= ttc_mp && secs < 600.0;
  return {pass, fmt("CR rbmpcc %.0f%% vs mpcc %.0f%%; mean ttc_min %.3f vs %.3f s; score %.3f vs %.3f (%.0f s)",
                    100 * cr_rb, 100 * cr_mp, ttc_rb, ttc_mp, mean(rb.score), mean(mp.score), secs)};
}

Outcome c9_offset_saturation() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> offsets{0.0, 0.5, 1.0, 2.0, 4.0};
  std::vector<PredictorSpec> preds;
  for (double o : offsets) preds.push_back(degraded(o, 0.0, fmt("offset_%.1f", o)));
  auto g = group(sweep(preds, {planner_of(PlannerKind::kRbmpcc)}, 4));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string means;
  for (const auto& p : preds) means += fmt(" %s=%.3f", p.name.c_str(), mean(g[{p.name, "rbmpcc"}].score));
  const auto& s0 = g[{"offset_0.0", "rbmpcc"}].score;
  const auto& s05 = g[{"offset_0.5", "rbmpcc"}].score;
  const auto& s4 = g[{"offset_4.0", "rbmpcc"}].score;
  const double q1a = quantile(s0, 0.25), q3a = quantile(s0, 0.75);
  const double q1b = quantile(s05, 0.25), q3b = quantile(s05, 0.75);
  const bool overlap = q1a <= q3b && q1b <= q3a;
  const bool lower = mean(s4) < mean(s0);
  return {overlap && lower && secs < 900.0,
          fmt("mean score%s; IQR 0 m [%.3f, %.3f], 0.5 m [%.3f, %.3f] overlap %s; 4 m lower %s (%.0f s)",
              means.c_str(), q1a, q3a, q1b, q3b, overlap ? "yes" : "no", lower ? "yes" : "no", secs)};
}

Outcome c10_shuffle_harm() {
  const std::vector<double> shuffles{0.0, 0.5, 1.0};
  std::vector<PredictorSpec> preds;
  for (double s : shuffles) preds.push_back(degraded(1.0, s, fmt("shuffle_%.1f", s)));
  auto g = group(sweep(preds, {planner_of(PlannerKind::kMpcc), planner_of(PlannerKind::kRbmpcc)}, 4));
  bool jerk_ok = true, score_ok = true;
  std::string mp_line, rb_line;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Group& m = g[{preds[i].name, "mpcc"}];
    const Group& r = g[{preds[i].name, "rbmpcc"}];
    mp_line += fmt(" %.1f:%.4f/%.3f", shuffles[i], mean(m.score), mean(m.jerk));
    rb_line += fmt(" %.1f:%.4f", shuffles[i], mean(r.score));
    if (i > 0) {
      const Group& prev = g[{preds[i - 1].name, "mpcc"}];
      jerk_ok = jerk_ok && mean(m.jerk) >= mean(prev.jerk);
      score_ok = score_ok && mean(m.score) <= mean(prev.score);
    }
  }
  const double mp_drop = mean(g[{preds.front().name, "mpcc"}].score) - mean(g[{preds.back().name, "mpcc"}].score);
  const double rb_drop =
      mean(g[{preds.front().name, "rbmpcc"}].score) - mean(g[{preds.back().name, "rbmpcc"}].score);
  const bool smaller = rb_drop < mp_drop;
  return {jerk_ok && score_ok && smaller,
          fmt("mpcc score/|jerk|%s; rbmpcc score%s; jerk non-decreasing %s, score non-increasing %s, "
              "drop rbmpcc %.4f < mpcc %.4f %s",
              mp_line.c_str(), rb_line.c_str(), jerk_ok ? "yes" : "no", score_ok ? "yes" : "no", rb_drop, mp_drop,
              smaller ? "yes" : "no")};
}

Outcome c11_determinism() {
  if (kinematic_suite().empty()) return {false, "C8 sweep missing"};
  const auto serial = sweep({predictor_of(PredictorKind::kKinematic, "kinematic")},
                            {planner_of(PlannerKind::kMpcc), planner_of(PlannerKind::kRbmpcc)}, 1);
  const std::string a = csv_without_wall_clock(kinematic_suite());
  const std::string b = csv_without_wall_clock(serial);
  return {a == b, fmt("jobs 4 vs jobs 1: %zu-byte CSVs %s (wall-clock column zeroed)", a.size(),
                      a == b ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"C1  oracle zero-error row", c1_oracle_zero_row},
      {"C2  metric-oracle equivalence", c2_metric_oracle},
      {"C3  conflict-time construction", c3_ttcp_construction},
      {"C4  temporal consistency", c4_temporal_consistency},
      {"C5  hard-gate scoring", c5_hard_gate},
      {"C6  dynamics and solver", c6_dynamics_and_solver},
      {"C7  contingency trunk identity", c7_trunk_identity},
      {"C8  branch planner safety", c8_rbmpcc_safety},
      {"C9  accuracy saturation", c9_offset_saturation},
      {"C10 consistency harms MPCC more", c10_shuffle_harm},
      {"C11 sweep determinism", c11_determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
