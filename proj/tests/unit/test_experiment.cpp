#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "loopbench/errors.hpp"
#include "loopbench/experiment.hpp"
#include "loopbench/report.hpp"
#include "support/oracles.hpp"

using namespace loopbench;

namespace {

const char* kSmallConfig = R"({
  "schema_version": 1,
  "scenarios": {"templates": [
    {"template": "lead_brake", "seeds": [0]},
    {"template": "cut_in", "seeds": [1]},
    {"template": "pedestrian_crossing", "seeds": [2]}
  ]},
  "predictors": [{"name": "oracle", "kind": "oracle"}, {"name": "cv", "kind": "constant_velocity"}],
  "planners": [{"name": "mpcc", "kind": "mpcc"}, {"name": "rb", "kind": "rbmpcc"}],
  "jobs": 2
})";

std::string config_error(const std::string& text, const LoadOptions& opts = {}) {
  try {
    parse_experiment_config(text, ".", opts);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

// CSV with the wall-clock column blanked.
std::string strip_wall_clock(const std::string& csv) {
  const auto cols = record_columns();
  std::size_t wall = 0;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (is_wall_clock_column(cols[i])) wall = i;
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t end = csv.find('\n', pos);
    const std::string line = csv.substr(pos, end - pos);
    std::size_t field = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (field != wall) out += line.substr(start, i - start);
        out += ',';
        ++field;
        start = i + 1;
      }
    }
    out += '\n';
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

RecordRow synthetic_row(std::string predictor, std::string planner, double ade6, double score, double at_fault,
                        double ttc) {
  RecordRow r{"s", std::move(predictor), std::move(planner), std::vector<double>(record_columns().size() - 3, 0.0)};
  r.values[numeric_column_index("min_ade_6")] = ade6;
  r.values[numeric_column_index("score")] = score;
  r.values[numeric_column_index("at_fault")] = at_fault;
  r.values[numeric_column_index("ttc_min_mean")] = ttc;
  return r;
}

}  // namespace

TEST(ExperimentConfig, ParsesAndResolves) {
  const ExperimentConfig cfg = parse_experiment_config(kSmallConfig, ".");
  EXPECT_EQ(cfg.predictors.size(), 2u);
  EXPECT_EQ(cfg.planners[1].kind, PlannerKind::kRbmpcc);
  EXPECT_EQ(cfg.jobs, 2);
  const auto scenarios = resolve_scenarios(cfg);
  ASSERT_EQ(scenarios.size(), 3u);
  EXPECT_EQ(scenarios[1].name, "cut_in_s1");
}

TEST(ExperimentConfig, Errors) {
  EXPECT_NE(config_error(R"({"schema_version": 1, "scenarios": {"templates": [{"template": "cut_in", "seeds": [0]}]},
    "predictors": [], "planners": [{"name": "m", "kind": "mpcc"}]})")
                .find("predictor"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "scenarios": {"templates": [{"template": "cut_in", "seeds": [0]}]},
    "predictors": [{"name": "p", "kind": "telepathy"}], "planners": [{"name": "m", "kind": "mpcc"}]})")
                .find("kinematic"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"schema_version": 1, "scenarios": {"templates": [{"template": "cut_in", "seeds": [0]}]},
    "predictors": [{"name": "p", "kind": "oracle"}, {"name": "p", "kind": "kinematic"}],
    "planners": [{"name": "m", "kind": "mpcc"}]})")
                .find("duplicate"),
            std::string::npos);
  const std::string typo = R"({"schema_version": 1, "scenarios": {"templates": [{"template": "cut_in", "seeds": [0]}]},
    "predictors": [{"name": "p", "kind": "oracle"}], "planners": [{"name": "m", "kind": "mpcc"}], "jbos": 3})";
  EXPECT_NE(config_error(typo).find("jbos"), std::string::npos);
  EXPECT_EQ(config_error(typo, LoadOptions{false}), "");
  EXPECT_NE(config_error("{\"schema_version\": 1,\n ]").find("line 2"), std::string::npos);
}

TEST(ExperimentConfig, DuplicateScenarioNames) {
  ExperimentConfig cfg = parse_experiment_config(kSmallConfig, ".");
  cfg.templates.push_back(cfg.templates[0]);
  EXPECT_THROW(resolve_scenarios(cfg), ConfigError);
}

TEST(Sweep, ProductOrderingAndDeterminism) {
  const ExperimentConfig cfg = parse_experiment_config(kSmallConfig, ".");
  const auto scenarios = resolve_scenarios(cfg);
  SweepOptions one;
  one.jobs = 1;
  SweepOptions three;
  three.jobs = 3;
  const auto a = run_sweep(scenarios, cfg.predictors, cfg.planners, cfg.sim, cfg.score, cfg.tc_mode, one);
  const auto b = run_sweep(scenarios, cfg.predictors, cfg.planners, cfg.sim, cfg.score, cfg.tc_mode, three);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 1; i < a.size(); ++i) {
    const auto key = [](const EvaluationRecord& r) { return std::tie(r.scenario, r.predictor, r.planner); };
    EXPECT_LT(key(a[i - 1]), key(a[i]));
  }
  for (const auto& r : a) EXPECT_FALSE(r.failed) << r.failure_message;
  EXPECT_EQ(strip_wall_clock(records_csv(a)), strip_wall_clock(records_csv(b)));

  // Oracle rows carry zero open-loop error.
  for (const auto& r : a) {
    if (r.predictor == "oracle") {
      EXPECT_NEAR(r.ol.min_ade_6, 0.0, 1e-9);
      EXPECT_NEAR(r.ol.tc, 0.0, 1e-9);
    }
  }
}

TEST(Records, CsvAndJsonDecodeToSameRows) {
  const ExperimentConfig cfg = parse_experiment_config(kSmallConfig, ".");
  const auto scenarios = resolve_scenarios(cfg);
  auto recs = run_sweep({scenarios[0]}, cfg.predictors, {cfg.planners[0]}, cfg.sim, cfg.score, cfg.tc_mode, {});
  recs.push_back(recs[0]);
  recs.back().scenario = "zz_failed";
  recs.back().failed = true;
  recs.back().failure_message = "solver blew up";
  recs.back().cl.ttc_min = std::numeric_limits<double>::quiet_NaN();

  const auto from_csv = parse_records_csv(records_csv(recs));
  const auto from_json = parse_records_json(records_json(recs));
  ASSERT_EQ(from_csv.size(), recs.size());
  ASSERT_EQ(from_json.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const RecordRow direct = to_row(recs[i]);
    EXPECT_EQ(from_csv[i].scenario, direct.scenario);
    EXPECT_EQ(from_json[i].planner, direct.planner);
    for (std::size_t c = 0; c < direct.values.size(); ++c) {
      if (std::isnan(direct.values[c])) {
        EXPECT_TRUE(std::isnan(from_csv[i].values[c]));
        EXPECT_TRUE(std::isnan(from_json[i].values[c]));
      } else {
        EXPECT_EQ(from_csv[i].values[c], direct.values[c]) << record_columns()[c + 3];
        EXPECT_EQ(from_json[i].values[c], direct.values[c]) << record_columns()[c + 3];
      }
    }
  }
  EXPECT_EQ(row_value(from_csv.back(), "failed"), 1.0);
  EXPECT_THROW(row_value(from_csv[0], "happiness"), ConfigError);
}

TEST(Summary, CollisionRateAndTtcSpread) {
  std::vector<RecordRow> rows;
  rows.push_back(synthetic_row("k", "m", 1.0, 0.0, 1.0, 0.5));
  rows.push_back(synthetic_row("k", "m", 2.0, 0.9, 0.0, 1.5));
  rows.push_back(synthetic_row("k", "m", 3.0, 0.6, 0.0, 2.5));
  rows.push_back(synthetic_row("k", "m", 4.0, 0.5, 0.0, 3.5));
  rows.push_back(synthetic_row("a", "m", 1.0, 1.0, 0.0, 5.0));
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].predictor, "a");
  EXPECT_EQ(s[1].scenarios, 4u);
  EXPECT_DOUBLE_EQ(s[1].collision_rate, 0.25);
  EXPECT_DOUBLE_EQ(s[1].min_ade_6, 2.5);
  EXPECT_DOUBLE_EQ(s[1].score_mean, 0.5);
  EXPECT_DOUBLE_EQ(s[1].ttc_min_mean, 2.0);
  EXPECT_NEAR(s[1].ttc_min_std, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_EQ(s[0].ttc_min_std, 0.0);
}

TEST(Regression, MatchesHandComputation) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x, y;
    const int n = 3 + trial % 12;
    for (int i = 0; i < n; ++i) {
      x.push_back(0.3 * i + 0.1 * trial);
      y.push_back(1.0 - 0.5 * x.back() + noise(rng));
    }
    const OlsFit f = ols_fit(x, y);
    const auto h = oracle::hand_ols(x, y);
    ASSERT_TRUE(f.valid);
    EXPECT_NEAR(f.slope, h.slope, 1e-9);
    EXPECT_NEAR(f.intercept, h.intercept, 1e-9);
    EXPECT_NEAR(f.t_stat, h.t, 1e-6 * std::max(1.0, std::abs(h.t)));
  }
}

TEST(Regression, PValueClosedFormsForSmallSamples) {
  // n = 3: one degree of freedom, Student t is Cauchy.
  const std::vector<double> x3{0.0, 1.0, 2.0}, y3{0.0, 1.3, 1.9};
  const OlsFit f3 = ols_fit(x3, y3);
  const double t3 = oracle::hand_ols(x3, y3).t;
  EXPECT_NEAR(f3.p_value, 1.0 - 2.0 * std::atan(std::abs(t3)) / kPi, 1e-10);
  const double q1 = std::tan(0.475 * kPi);  // 97.5 % quantile, 1 dof
  EXPECT_NEAR(f3.ci_high - f3.slope, q1 * f3.slope_se, 1e-8);

  // n = 4: two degrees of freedom, F(t) = 1/2 + t / (2 sqrt(2 + t^2)).
  const std::vector<double> x4{0.0, 1.0, 2.0, 3.0}, y4{0.1, 0.8, 2.3, 2.9};
  const OlsFit f4 = ols_fit(x4, y4);
  const double t4 = std::abs(oracle::hand_ols(x4, y4).t);
  EXPECT_NEAR(f4.p_value, 1.0 - t4 / std::sqrt(2.0 + t4 * t4), 1e-10);
}

TEST(Regression, DegenerateInputsSuppressFit) {
  EXPECT_FALSE(ols_fit(std::vector<double>{1.0}, std::vector<double>{2.0}).valid);
  EXPECT_FALSE(ols_fit(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0, 3.0}).valid);
  EXPECT_FALSE(ols_fit(std::vector<double>{1.0, 1.0, 1.0}, std::vector<double>{2.0, 3.0, 4.0}).valid);
  const OlsFit exact = ols_fit(std::vector<double>{0.0, 1.0, 2.0}, std::vector<double>{1.0, 3.0, 5.0});
  EXPECT_TRUE(exact.valid);
  EXPECT_EQ(exact.p_value, 0.0);
}

TEST(Report, ScatterSeriesAndSvg) {
  std::vector<RecordRow> rows;
  rows.push_back(synthetic_row("p1", "mpcc", 1.0, 0.8, 0.0, 5.0));
  rows.push_back(synthetic_row("p1", "mpcc", 3.0, 0.6, 0.0, 5.0));
  rows.push_back(synthetic_row("p2", "mpcc", 4.0, 0.5, 0.0, 5.0));
  rows.push_back(synthetic_row("p3", "mpcc", 6.0, 0.2, 0.0, 5.0));
  rows.push_back(synthetic_row("p1", "rb", 2.0, 0.9, 0.0, 5.0));
  const auto series = scatter_series(rows, "min_ade_6");
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].planner, "mpcc");
  ASSERT_EQ(series[0].points.size(), 3u);
  EXPECT_DOUBLE_EQ(series[0].points[0].x, 2.0);
  EXPECT_DOUBLE_EQ(series[0].points[0].y, 0.7);
  EXPECT_TRUE(series[0].fit.valid);
  EXPECT_FALSE(series[1].fit.valid);

  const std::string svg = render_scatter_svg(series, "min_ade_6");
  EXPECT_EQ(svg, render_scatter_svg(scatter_series(rows, "min_ade_6"), "min_ade_6"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_THROW(check_report_metric("score"), ConfigError);
  EXPECT_NO_THROW(check_report_metric("tc"));
}
