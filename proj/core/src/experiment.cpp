#include "loopbench/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "loopbench/errors.hpp"
#include "json_format.hpp"
#include "json_node.hpp"

namespace loopbench {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using detail::Node;

constexpr std::array<std::string_view, 19> kColumns = {
    "scenario",  "predictor",     "planner",      "min_ade_1",   "min_ade_6",  "min_fde_1",         "min_fde_6",
    "min_nll_6", "tc",            "mean_speed",   "mean_abs_jerk", "ttc_min_mean", "ttc_min_std",   "at_fault",
    "offroad",   "progress_ratio", "score",       "solve_time_mean_ms", "failed"};
constexpr std::size_t kKeyColumns = 3;
constexpr std::size_t kNumericColumns = kColumns.size() - kKeyColumns;

std::string join_names(std::span<const std::string_view> names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += ", ";
    out += names[i];
  }
  return out;
}

// Overwrites `target` when the key is present.
void read_number(const Node& n, std::string_view key, double& target) {
  if (n.has(key)) target = n.at(key).number();
}
void read_int(const Node& n, std::string_view key, int& target) {
  if (n.has(key)) target = n.at(key).integer();
}

void read_weights(const Node& n, OcpWeights& w) {
  n.expect_object({"w_contour", "w_lag", "w_progress", "w_jerk", "w_steer_rate", "w_potential", "w_speed_limit",
                   "w_corridor", "sigma_long", "sigma_lat", "horizon", "dt"});
  read_number(n, "w_contour", w.w_contour);
  read_number(n, "w_lag", w.w_lag);
  read_number(n, "w_progress", w.w_progress);
  read_number(n, "w_jerk", w.w_jerk);
  read_number(n, "w_steer_rate", w.w_steer_rate);
  read_number(n, "w_potential", w.w_potential);
  read_number(n, "w_speed_limit", w.w_speed_limit);
  read_number(n, "w_corridor", w.w_corridor);
  read_number(n, "sigma_long", w.sigma_long);
  read_number(n, "sigma_lat", w.sigma_lat);
  read_int(n, "horizon", w.horizon);
  read_number(n, "dt", w.dt);
}

void read_solver(const Node& n, SolverOptions& s) {
  n.expect_object({"max_iterations", "tolerance", "mu_init", "mu_max", "line_search_steps", "braking_seeds"});
  read_int(n, "max_iterations", s.max_iterations);
  read_number(n, "tolerance", s.tolerance);
  read_number(n, "mu_init", s.mu_init);
  read_number(n, "mu_max", s.mu_max);
  read_int(n, "line_search_steps", s.line_search_steps);
  if (n.has("braking_seeds")) {
    const Node seeds = n.at("braking_seeds");
    s.braking_seeds.clear();
    for (std::size_t i = 0; i < seeds.array_size(); ++i) s.braking_seeds.push_back(seeds.at(i).number());
  }
  if (s.max_iterations < 1 || !(s.tolerance > 0.0) || !(s.mu_init > 0.0) || !(s.mu_max > s.mu_init) ||
      s.line_search_steps < 1) {
    n.fail("invalid solver options");
  }
}

void read_contingency(const Node& n, ContingencyConfig& c) {
  n.expect_object({"trunk_len", "inflation_c", "max_branches"});
  read_int(n, "trunk_len", c.trunk_len);
  read_number(n, "inflation_c", c.inflation_c);
  read_int(n, "max_branches", c.max_branches);
}

void read_ego_params(const Node& n, EgoModelParams& p) {
  n.expect_object({"wheelbase", "a_min", "a_max", "delta_max", "steer_rate_max", "jerk_max", "length", "width"});
  read_number(n, "wheelbase", p.wheelbase);
  read_number(n, "a_min", p.a_min);
  read_number(n, "a_max", p.a_max);
  read_number(n, "delta_max", p.delta_max);
  read_number(n, "steer_rate_max", p.steer_rate_max);
  read_number(n, "jerk_max", p.jerk_max);
  read_number(n, "length", p.length);
  read_number(n, "width", p.width);
}

template <typename F>
void checked(const Node& n, F&& validate) {
  try {
    validate();
  } catch (const ConfigError& e) {
    n.fail(e.what());
  } catch (const InvariantError& e) {
    n.fail(e.what());
  }
}

PredictorSpec read_predictor(const Node& n) {
  n.expect_object({"name", "kind", "config"});
  const Node kind_node = n.at("kind");
  PredictorSpec spec;
  checked(kind_node, [&] { spec.kind = predictor_kind_from_string(kind_node.string()); });
  spec.name = n.has("name") ? n.at("name").string() : std::string(to_string(spec.kind));
  if (n.has("config")) {
    const Node c = n.at("config");
    c.expect_object({"horizon_n", "dt", "kinematic", "degraded"});
    read_int(c, "horizon_n", spec.config.horizon_n);
    read_number(c, "dt", spec.config.dt);
    if (c.has("kinematic")) {
      const Node k = c.at("kinematic");
      k.expect_object({"yaw_rate_small", "accel_moderate", "brake_moderate", "brake_strong"});
      read_number(k, "yaw_rate_small", spec.config.kinematic.yaw_rate_small);
      read_number(k, "accel_moderate", spec.config.kinematic.accel_moderate);
      read_number(k, "brake_moderate", spec.config.kinematic.brake_moderate);
      read_number(k, "brake_strong", spec.config.kinematic.brake_strong);
    }
    if (c.has("degraded")) {
      const Node d = c.at("degraded");
      d.expect_object({"offset_amp", "offset_wavelength", "mode_shuffle_prob", "sigma_base", "seed"});
      read_number(d, "offset_amp", spec.config.degraded.offset_amp);
      read_number(d, "offset_wavelength", spec.config.degraded.offset_wavelength);
      read_number(d, "mode_shuffle_prob", spec.config.degraded.mode_shuffle_prob);
      read_number(d, "sigma_base", spec.config.degraded.sigma_base);
      if (d.has("seed")) spec.config.degraded.seed = d.at("seed").unsigned_integer();
    }
    checked(c, [&] { spec.config.validate(); });
  }
  return spec;
}

PlannerSpec read_planner(const Node& n) {
  n.expect_object({"name", "kind", "config"});
  const Node kind_node = n.at("kind");
  PlannerSpec spec;
  checked(kind_node, [&] { spec.kind = planner_kind_from_string(kind_node.string()); });
  spec.name = n.has("name") ? n.at("name").string() : std::string(to_string(spec.kind));
  if (n.has("config")) {
    const Node c = n.at("config");
    c.expect_object({"weights", "solver", "contingency"});
    if (c.has("weights")) {
      read_weights(c.at("weights"), spec.config.weights);
      checked(c.at("weights"), [&] { spec.config.weights.validate(); });
    }
    if (c.has("solver")) read_solver(c.at("solver"), spec.config.solver);
    if (c.has("contingency")) {
      read_contingency(c.at("contingency"), spec.config.contingency);
      checked(c.at("contingency"), [&] { spec.config.contingency.validate(); });
    }
  }
  return spec;
}

void read_sim(const Node& n, SimConfig& s) {
  n.expect_object({"sim_dt", "replan_period", "history_len", "lqr", "prediction_radius", "offroad_tolerance", "ego"});
  read_number(n, "sim_dt", s.sim_dt);
  read_int(n, "replan_period", s.replan_period);
  read_int(n, "history_len", s.history_len);
  read_number(n, "prediction_radius", s.prediction_radius);
  read_number(n, "offroad_tolerance", s.offroad_tolerance);
  if (n.has("lqr")) {
    const Node l = n.at("lqr");
    l.expect_object({"q_lateral", "q_heading", "q_speed", "r_accel", "r_steer", "horizon"});
    read_number(l, "q_lateral", s.lqr.q_lateral);
    read_number(l, "q_heading", s.lqr.q_heading);
    read_number(l, "q_speed", s.lqr.q_speed);
    read_number(l, "r_accel", s.lqr.r_accel);
    read_number(l, "r_steer", s.lqr.r_steer);
    read_int(l, "horizon", s.lqr.horizon);
  }
  if (n.has("ego")) read_ego_params(n.at("ego"), s.ego);
  checked(n, [&] { s.validate(); });
}

void read_score(const Node& n, ScoreConfig& s) {
  n.expect_object({"w_ttc", "w_progress", "w_comfort", "ttc_threshold", "ttc_cap", "ttc_step", "comfort"});
  read_number(n, "w_ttc", s.w_ttc);
  read_number(n, "w_progress", s.w_progress);
  read_number(n, "w_comfort", s.w_comfort);
  read_number(n, "ttc_threshold", s.ttc_threshold);
  read_number(n, "ttc_cap", s.ttc_cap);
  read_number(n, "ttc_step", s.ttc_step);
  if (n.has("comfort")) {
    const Node c = n.at("comfort");
    c.expect_object({"jerk", "accel", "yaw_rate", "yaw_accel"});
    read_number(c, "jerk", s.comfort.jerk);
    read_number(c, "accel", s.comfort.accel);
    read_number(c, "yaw_rate", s.comfort.yaw_rate);
    read_number(c, "yaw_accel", s.comfort.yaw_accel);
  }
  if (!(s.w_ttc >= 0.0 && s.w_progress >= 0.0 && s.w_comfort >= 0.0) ||
      !(s.w_ttc + s.w_progress + s.w_comfort > 0.0) || !(s.ttc_step > 0.0) || !(s.ttc_cap > 0.0)) {
    n.fail("invalid score weights");
  }
}

TemplateSet read_template_set(const Node& n) {
  n.expect_object({"template", "seeds", "params"});
  TemplateSet set;
  const Node t = n.at("template");
  try {
    set.kind = scenario_template_from_string(t.string());
  } catch (const ParameterError& e) {
    t.fail(e.what());
  }
  const Node seeds = n.at("seeds");
  for (std::size_t i = 0; i < seeds.array_size(); ++i) set.seeds.push_back(seeds.at(i).unsigned_integer());
  if (set.seeds.empty()) seeds.fail("needs at least one seed");
  if (n.has("params")) {
    const Node p = n.at("params");
    p.expect_object({"gap", "ego_speed", "agent_speed", "trigger_time", "decel"});
    const auto opt = [&](std::string_view key, std::optional<double>& target) {
      if (p.has(key)) target = p.at(key).number();
    };
    opt("gap", set.params.gap);
    opt("ego_speed", set.params.ego_speed);
    opt("agent_speed", set.params.agent_speed);
    opt("trigger_time", set.params.trigger_time);
    opt("decel", set.params.decel);
  }
  return set;
}

ExperimentConfig build_config(const json& doc, const std::filesystem::path& base_dir, const LoadOptions& options,
                              LoadReport* report) {
  const Node root(doc, "$", options, report);
  root.expect_object({"schema_version", "scenarios", "predictors", "planners", "sim", "score", "tc_mode", "out_dir",
                      "jobs", "seed", "write_traces", "trace_predictions"});
  if (root.at("schema_version").integer() != kExperimentSchemaVersion) {
    root.at("schema_version").fail("unsupported version");
  }
  ExperimentConfig cfg;
  const Node sc = root.at("scenarios");
  sc.expect_object({"paths", "templates"});
  if (sc.has("paths")) {
    const Node paths = sc.at("paths");
    for (std::size_t i = 0; i < paths.array_size(); ++i) {
      std::filesystem::path p = paths.at(i).string();
      cfg.scenario_paths.push_back(p.is_absolute() ? p : base_dir / p);
    }
  }
  if (sc.has("templates")) {
    const Node ts = sc.at("templates");
    for (std::size_t i = 0; i < ts.array_size(); ++i) cfg.templates.push_back(read_template_set(ts.at(i)));
  }
  const Node preds = root.at("predictors");
  for (std::size_t i = 0; i < preds.array_size(); ++i) cfg.predictors.push_back(read_predictor(preds.at(i)));
  const Node plans = root.at("planners");
  for (std::size_t i = 0; i < plans.array_size(); ++i) cfg.planners.push_back(read_planner(plans.at(i)));
  if (root.has("sim")) read_sim(root.at("sim"), cfg.sim);
  if (root.has("score")) read_score(root.at("score"), cfg.score);
  if (root.has("tc_mode")) {
    const Node m = root.at("tc_mode");
    const std::string v = m.string();
    if (v == "most_probable") cfg.tc_mode = TcMode::kMostProbable;
    else if (v == "best_matching") cfg.tc_mode = TcMode::kBestMatching;
    else m.fail("expected one of: most_probable, best_matching");
  }
  if (root.has("out_dir")) {
    std::filesystem::path p = root.at("out_dir").string();
    cfg.out_dir = p.is_absolute() ? p : base_dir / p;
  }
  read_int(root, "jobs", cfg.jobs);
  if (root.has("seed")) cfg.seed = root.at("seed").unsigned_integer();
  if (root.has("write_traces")) cfg.write_traces = root.at("write_traces").boolean();
  if (root.has("trace_predictions")) cfg.trace_predictions = root.at("trace_predictions").boolean();
  checked(root, [&] { cfg.validate(); });
  return cfg;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

// Scenario and agent names are plain identifiers, but quote defensively.
std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string safe_file_part(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (scenario_paths.empty() && templates.empty()) throw ConfigError("experiment needs at least one scenario source");
  if (predictors.empty()) throw ConfigError("experiment needs at least one predictor");
  if (planners.empty()) throw ConfigError("experiment needs at least one planner");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  std::set<std::string> seen;
  for (const auto& p : predictors) {
    if (p.name.empty()) throw ConfigError("predictor name must not be empty");
    if (!seen.insert(p.name).second) throw ConfigError("duplicate predictor name '" + p.name + "'");
  }
  seen.clear();
  for (const auto& p : planners) {
    if (p.name.empty()) throw ConfigError("planner name must not be empty");
    if (!seen.insert(p.name).second) throw ConfigError("duplicate planner name '" + p.name + "'");
  }
  sim.validate();
}

ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir,
                                         const LoadOptions& options, LoadReport* report) {
  const json doc = detail::parse_json(text);
  return build_config(doc, base_dir, options, report);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const LoadOptions& options,
                                        LoadReport* report) {
  try {
    return parse_experiment_config(read_text_file(path), path.parent_path(), options, report);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

PredictorSpec default_predictor_spec(std::string_view kind) {
  PredictorSpec spec;
  spec.kind = predictor_kind_from_string(kind);
  spec.name = std::string(kind);
  return spec;
}

PlannerSpec default_planner_spec(std::string_view kind) {
  PlannerSpec spec;
  spec.kind = planner_kind_from_string(kind);
  spec.name = std::string(kind);
  return spec;
}

std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw ParseError(dir.string() + ": cannot read directory: " + ec.message());
  for (const auto& entry : it) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Scenario> resolve_scenarios(const ExperimentConfig& cfg, const LoadOptions& options) {
  std::vector<Scenario> out;
  for (const auto& p : cfg.scenario_paths) {
    if (std::filesystem::is_directory(p)) {
      for (const auto& f : scenario_files(p)) out.push_back(load_scenario(f, options));
    } else {
      out.push_back(load_scenario(p, options));
    }
  }
  for (const auto& set : cfg.templates) {
    for (auto seed : set.seeds) out.push_back(generate_scenario(set.kind, set.params, seed));
  }
  std::set<std::string> names;
  for (const auto& s : out) {
    if (!names.insert(s.name).second) throw ConfigError("duplicate scenario name '" + s.name + "'");
  }
  return out;
}

EvaluationRecord evaluate_run(const Scenario& scenario, const PredictorSpec& predictor, const PlannerSpec& planner,
                              const SimConfig& sim, const ScoreConfig& score, TcMode tc_mode, SimTrace* trace_out) {
  EvaluationRecord rec;
  rec.scenario = scenario.name;
  rec.predictor = predictor.name;
  rec.planner = planner.name;
  SimTrace trace = run_closed_loop(scenario, predictor, planner, sim);
  rec.failed = trace.failed;
  rec.failure_message = trace.failure_message;
  rec.ol = open_loop_metrics(trace, scenario, tc_mode);
  rec.cl = closed_loop_metrics(trace, scenario, score);
  double total = 0.0;
  int solves = 0;
  for (const auto& s : trace.steps) {
    if (!s.replanned) continue;
    total += s.solve_time;
    ++solves;
  }
  rec.solve_time_mean_ms = solves > 0 ? 1000.0 * total / solves : 0.0;
  if (trace_out) *trace_out = std::move(trace);
  return rec;
}

std::vector<EvaluationRecord> run_sweep(const std::vector<Scenario>& scenarios,
                                        const std::vector<PredictorSpec>& predictors,
                                        const std::vector<PlannerSpec>& planners, const SimConfig& sim,
                                        const ScoreConfig& score, TcMode tc_mode, const SweepOptions& options) {
  struct Task {
    std::size_t scenario, predictor, planner;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < scenarios.size(); ++s)
    for (std::size_t p = 0; p < predictors.size(); ++p)
      for (std::size_t q = 0; q < planners.size(); ++q) tasks.push_back({s, p, q});

  std::vector<EvaluationRecord> records(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      SimTrace trace;
      try {
        records[i] = evaluate_run(scenarios[t.scenario], predictors[t.predictor], planners[t.planner], sim, score,
                                  tc_mode, &trace);
      } catch (const std::exception& e) {
        EvaluationRecord& r = records[i];
        r = EvaluationRecord{};
        r.scenario = scenarios[t.scenario].name;
        r.predictor = predictors[t.predictor].name;
        r.planner = planners[t.planner].name;
        r.failed = true;
        r.failure_message = e.what();
        trace.scenario = r.scenario;
        trace.failed = true;
        trace.failure_message = r.failure_message;
      }
      if (options.on_run) options.on_run(records[i], trace);
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.jobs, 1)), 1,
                                                    std::max<std::size_t>(tasks.size(), 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::sort(records.begin(), records.end(), [](const EvaluationRecord& a, const EvaluationRecord& b) {
    return std::tie(a.scenario, a.predictor, a.planner) < std::tie(b.scenario, b.predictor, b.planner);
  });
  return records;
}

std::span<const std::string_view> record_columns() { return kColumns; }

bool is_wall_clock_column(std::string_view column) { return column == "solve_time_mean_ms"; }

std::size_t numeric_column_index(std::string_view column) {
  for (std::size_t i = kKeyColumns; i < kColumns.size(); ++i) {
    if (kColumns[i] == column) return i - kKeyColumns;
  }
  throw ConfigError("unknown column '" + std::string(column) + "'; valid columns: " +
                    join_names(std::span(kColumns).subspan(kKeyColumns)));
}

double row_value(const RecordRow& row, std::string_view column) { return row.values.at(numeric_column_index(column)); }

RecordRow to_row(const EvaluationRecord& r) {
  RecordRow row{r.scenario, r.predictor, r.planner, {}};
  // A single run has one ttc_min sample; its spread is zero.
  row.values = {r.ol.min_ade_1,
                r.ol.min_ade_6,
                r.ol.min_fde_1,
                r.ol.min_fde_6,
                r.ol.min_nll_6,
                r.ol.tc,
                r.cl.mean_speed,
                r.cl.comfort.mean_abs_jerk,
                r.cl.ttc_min,
                0.0,
                r.cl.at_fault_collision ? 1.0 : 0.0,
                r.cl.offroad ? 1.0 : 0.0,
                r.cl.progress_ratio,
                r.cl.score,
                r.solve_time_mean_ms,
                r.failed ? 1.0 : 0.0};
  return row;
}

std::string records_csv(const std::vector<EvaluationRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i > 0) out += ',';
    out += kColumns[i];
  }
  out += '\n';
  for (const auto& r : records) {
    const RecordRow row = to_row(r);
    out += csv_field(row.scenario) + ',' + csv_field(row.predictor) + ',' + csv_field(row.planner);
    for (double v : row.values) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

std::string records_json(const std::vector<EvaluationRecord>& records) {
  ordered_json doc;
  doc["schema_version"] = kExperimentSchemaVersion;
  ordered_json cols = ordered_json::array();
  for (auto c : kColumns) cols.push_back(std::string(c));
  doc["columns"] = cols;
  ordered_json rows = ordered_json::array();
  for (const auto& r : records) {
    const RecordRow row = to_row(r);
    ordered_json j;
    j["scenario"] = row.scenario;
    j["predictor"] = row.predictor;
    j["planner"] = row.planner;
    for (std::size_t i = 0; i < kNumericColumns; ++i) {
      j[std::string(kColumns[kKeyColumns + i])] = number_or_null(row.values[i]);
    }
    if (r.failed) j["failure_message"] = r.failure_message;
    rows.push_back(std::move(j));
  }
  doc["records"] = rows;
  return compact_json_dump(doc);
}

std::vector<RecordRow> parse_records_csv(std::string_view text) {
  std::vector<RecordRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line, line_no);
    if (fields.size() != kColumns.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(kColumns.size()) +
                       " fields, got " + std::to_string(fields.size()));
    }
    if (header) {
      for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (fields[i] != kColumns[i]) {
          throw ParseError("line 1: column " + std::to_string(i + 1) + " is '" + fields[i] + "', expected '" +
                           std::string(kColumns[i]) + "'");
        }
      }
      header = false;
      continue;
    }
    RecordRow row{fields[0], fields[1], fields[2], {}};
    for (std::size_t i = kKeyColumns; i < fields.size(); ++i) row.values.push_back(parse_double(fields[i], line_no));
    rows.push_back(std::move(row));
  }
  if (header) throw ParseError("missing CSV header");
  return rows;
}

std::vector<RecordRow> parse_records_json(std::string_view text) {
  const json doc = detail::parse_json(text);
  const LoadOptions lenient{false};
  const Node root(doc, "$", lenient, nullptr);
  const Node recs = root.at("records");
  std::vector<RecordRow> rows;
  for (std::size_t i = 0; i < recs.array_size(); ++i) {
    const Node r = recs.at(i);
    RecordRow row{r.at("scenario").string(), r.at("predictor").string(), r.at("planner").string(), {}};
    for (std::size_t c = kKeyColumns; c < kColumns.size(); ++c) {
      const Node v = r.at(kColumns[c]);
      row.values.push_back(v.raw().is_null() ? std::numeric_limits<double>::quiet_NaN() : v.number());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<RecordRow> load_records(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    if (path.extension() == ".csv") return parse_records_csv(text);
    if (path.extension() == ".json") return parse_records_json(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  throw ConfigError(path.string() + ": records must be .csv or .json");
}

std::vector<SummaryRow> summarize(const std::vector<RecordRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::vector<const RecordRow*>> groups;
  for (const auto& r : rows) groups[{r.predictor, r.planner}].push_back(&r);
  const auto column = [](const std::vector<const RecordRow*>& g, std::string_view name) {
    const std::size_t idx = numeric_column_index(name);
    std::vector<double> v;
    v.reserve(g.size());
    for (const RecordRow* r : g) v.push_back(r->values[idx]);
    return v;
  };
  std::vector<SummaryRow> out;
  for (const auto& [key, g] : groups) {
    SummaryRow s;
    s.predictor = key.first;
    s.planner = key.second;
    s.scenarios = g.size();
    s.min_ade_6 = mean_of(column(g, "min_ade_6"));
    s.min_fde_6 = mean_of(column(g, "min_fde_6"));
    s.min_nll_6 = mean_of(column(g, "min_nll_6"));
    s.tc = mean_of(column(g, "tc"));
    s.mean_speed = mean_of(column(g, "mean_speed"));
    s.mean_abs_jerk = mean_of(column(g, "mean_abs_jerk"));
    const auto ttc = column(g, "ttc_min_mean");
    s.ttc_min_mean = mean_of(ttc);
    s.ttc_min_std = sample_std(ttc);
    s.collision_rate = mean_of(column(g, "at_fault"));
    s.score_mean = mean_of(column(g, "score"));
    for (double f : column(g, "failed")) s.failed += f != 0.0 ? 1 : 0;
    out.push_back(std::move(s));
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "predictor,planner,scenarios,min_ade_6,min_fde_6,min_nll_6,tc,mean_speed,mean_abs_jerk,ttc_min_mean,"
      "ttc_min_std,collision_rate,score_mean,failed\n";
  for (const auto& r : rows) {
    out += csv_field(r.predictor) + ',' + csv_field(r.planner) + ',' + std::to_string(r.scenarios);
    for (double v : {r.min_ade_6, r.min_fde_6, r.min_nll_6, r.tc, r.mean_speed, r.mean_abs_jerk, r.ttc_min_mean,
                     r.ttc_min_std, r.collision_rate, r.score_mean}) {
      out += ',' + format_double(v);
    }
    out += ',' + std::to_string(r.failed) + '\n';
  }
  return out;
}

std::string summary_text(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-10s %4s %8s %8s %8s %7s %7s %13s %6s %7s %4s\n", "predictor", "planner",
                "n", "minADE6", "minFDE6", "TC", "v_mean", "|jerk|", "TTC_min", "CR", "score", "fail");
  os << line;
  for (const auto& r : rows) {
    char ttc[32];
    std::snprintf(ttc, sizeof ttc, "%.2f+-%.2f", r.ttc_min_mean, r.ttc_min_std);
    std::snprintf(line, sizeof line, "%-16s %-10s %4zu %8.3f %8.3f %8.3f %7.2f %7.2f %13s %5.1f%% %7.3f %4zu\n",
                  r.predictor.c_str(), r.planner.c_str(), r.scenarios, r.min_ade_6, r.min_fde_6, r.tc, r.mean_speed,
                  r.mean_abs_jerk, ttc, 100.0 * r.collision_rate, r.score_mean, r.failed);
    os << line;
  }
  return os.str();
}

std::string trace_file_name(std::string_view scenario, std::string_view predictor, std::string_view planner) {
  return safe_file_part(scenario) + "__" + safe_file_part(predictor) + "__" + safe_file_part(planner) + ".json";
}

std::string format_trace(const SimTrace& trace, bool with_predictions) {
  ordered_json doc;
  doc["schema_version"] = kExperimentSchemaVersion;
  doc["scenario"] = trace.scenario;
  doc["dt"] = trace.dt;
  doc["failed"] = trace.failed;
  doc["failure_step"] = trace.failure_step;
  doc["failure_message"] = trace.failure_message;
  doc["columns"] = ordered_json::array({"t", "x", "y", "heading", "v", "a", "delta", "jerk", "steer_rate",
                                        "accel_cmd", "steer_cmd", "plan_id", "replanned", "offroad", "solve_time",
                                        "solver_iterations", "branch_count"});
  ordered_json steps = ordered_json::array();
  ordered_json collisions = ordered_json::array();
  ordered_json agents = ordered_json::array();
  ordered_json predictions = ordered_json::array();
  for (const StepRecord& s : trace.steps) {
    steps.push_back(ordered_json::array({s.t, s.ego.x, s.ego.y, s.ego.heading, s.ego.v, s.ego.a, s.ego.delta,
                                         s.applied.jerk, s.applied.steer_rate, s.accel_cmd, s.steer_cmd, s.plan_id,
                                         s.replanned ? 1 : 0, s.offroad ? 1 : 0, s.solve_time, s.solver_iterations,
                                         s.branch_count}));
    for (const auto& c : s.collisions) {
      ordered_json j;
      j["agent"] = c.agent_id;
      j["t"] = c.t;
      j["at_fault"] = c.at_fault;
      collisions.push_back(std::move(j));
    }
    if (agents.empty() && !s.agents.empty()) agents = ordered_json::array();
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
      if (agents.size() <= i) agents.push_back(ordered_json::array());
      const AgentState& a = s.agents[i];
      agents[i].push_back(ordered_json::array({a.t, a.x, a.y, a.heading, a.speed}));
    }
    if (!with_predictions) continue;
    for (const PredictionSet& p : s.predictions) {
      ordered_json j;
      j["agent"] = p.agent_id();
      j["t0"] = p.t0();
      j["dt"] = p.dt();
      ordered_json modes = ordered_json::array();
      for (const auto& m : p.modes()) {
        ordered_json mj;
        mj["prob"] = m.prob;
        ordered_json ms = ordered_json::array();
        for (const auto& g : m.steps) {
          ms.push_back(ordered_json::array({g.mean_x, g.mean_y, g.sigma_x, g.sigma_y, g.rho}));
        }
        mj["steps"] = std::move(ms);
        modes.push_back(std::move(mj));
      }
      j["modes"] = std::move(modes);
      predictions.push_back(std::move(j));
    }
  }
  doc["steps"] = std::move(steps);
  doc["collisions"] = std::move(collisions);
  doc["agent_states"] = std::move(agents);
  if (with_predictions) doc["predictions"] = std::move(predictions);
  return compact_json_dump(doc);
}

}  // namespace loopbench
