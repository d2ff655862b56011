// loopbench command line: run, sweep, filter, report, generate.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loopbench/errors.hpp"
#include "loopbench/experiment.hpp"
#include "loopbench/metrics.hpp"
#include "loopbench/report.hpp"
#include "loopbench/scenario_gen.hpp"
#include "loopbench/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace loopbench;

namespace {

constexpr int kExitRunFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitError = 3;

// Raised for bad names and arguments; reported as a usage error.
struct UsageError : Error {
  using Error::Error;
};

fs::path output_dir(const std::string& flag, const std::optional<fs::path>& from_config) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("LOOPBENCH_OUT"); env && *env) return env;
  if (from_config) return *from_config;
  return "out";
}

void print_warnings(const LoadReport& report) {
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
}

template <typename Spec>
const Spec& find_named(const std::vector<Spec>& specs, const std::string& name, const char* what) {
  for (const auto& s : specs) {
    if (s.name == name) return s;
  }
  std::string valid;
  for (const auto& s : specs) valid += (valid.empty() ? "" : ", ") + s.name;
  throw UsageError(std::string("unknown ") + what + " '" + name + "'; valid names: " + valid);
}

void write_records(const fs::path& dir, const std::vector<EvaluationRecord>& records) {
  write_text_file(dir / "records.csv", records_csv(records));
  write_text_file(dir / "records.json", records_json(records));
}

struct RunArgs {
  std::string scenario;
  std::string predictor{"kinematic"};
  std::string planner{"mpcc"};
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool strict{false};
  bool trace_predictions{false};
};

int cmd_run(const RunArgs& a) {
  const LoadOptions load{a.strict};
  LoadReport report;
  std::optional<ExperimentConfig> cfg;
  if (!a.config.empty()) {
    cfg = load_experiment_config(a.config, load, &report);
  }
  const Scenario scenario = load_scenario(a.scenario, load, &report);
  print_warnings(report);

  PredictorSpec predictor;
  PlannerSpec planner;
  SimConfig sim;
  ScoreConfig score;
  TcMode tc_mode = TcMode::kMostProbable;
  if (cfg) {
    predictor = find_named(cfg->predictors, a.predictor, "predictor");
    planner = find_named(cfg->planners, a.planner, "planner");
    sim = cfg->sim;
    sim.seed = cfg->seed;
    score = cfg->score;
    tc_mode = cfg->tc_mode;
  } else {
    try {
      predictor = default_predictor_spec(a.predictor);
      planner = default_planner_spec(a.planner);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  if (a.seed) sim.seed = *a.seed;

  const fs::path out = output_dir(a.out, cfg ? std::optional(cfg->out_dir) : std::nullopt);
  fs::create_directories(out / "traces");
  SimTrace trace;
  const EvaluationRecord rec = evaluate_run(scenario, predictor, planner, sim, score, tc_mode, &trace);
  write_records(out, {rec});
  write_text_file(out / "traces" / trace_file_name(rec.scenario, rec.predictor, rec.planner),
                  format_trace(trace, a.trace_predictions));

  std::printf("%s %s %s score=%.4f at_fault=%d collisions=%d progress=%.3f ttc_min=%.3f minADE6=%.3f tc=%.4f\n",
              rec.scenario.c_str(), rec.predictor.c_str(), rec.planner.c_str(), rec.cl.score,
              rec.cl.at_fault_collision ? 1 : 0, rec.cl.collision_count, rec.cl.progress_ratio, rec.cl.ttc_min,
              rec.ol.min_ade_6, rec.ol.tc);
  if (rec.failed) {
    std::fprintf(stderr, "planner failure: %s\n", rec.failure_message.c_str());
    return kExitRunFailed;
  }
  return 0;
}

struct SweepArgs {
  std::string config;
  std::string out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  bool strict{false};
  bool trace_predictions{false};
  bool no_traces{false};
};

int cmd_sweep(const SweepArgs& a) {
  const LoadOptions load{a.strict};
  LoadReport report;
  ExperimentConfig cfg = load_experiment_config(a.config, load, &report);
  if (a.jobs) {
    if (*a.jobs < 1) throw UsageError("--jobs must be at least 1");
    cfg.jobs = *a.jobs;
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.trace_predictions) cfg.trace_predictions = true;
  if (a.no_traces) cfg.write_traces = false;
  const std::vector<Scenario> scenarios = resolve_scenarios(cfg, load);
  print_warnings(report);

  const fs::path out = output_dir(a.out, cfg.out_dir);
  fs::create_directories(out);
  if (cfg.write_traces) fs::create_directories(out / "traces");
  SimConfig sim = cfg.sim;
  sim.seed = cfg.seed;

  const std::size_t total = scenarios.size() * cfg.predictors.size() * cfg.planners.size();
  std::size_t done = 0;
  std::mutex mu;
  SweepOptions opts;
  opts.jobs = cfg.jobs;
  opts.on_run = [&](const EvaluationRecord& rec, const SimTrace& trace) {
    if (cfg.write_traces) {
      write_text_file(out / "traces" / trace_file_name(rec.scenario, rec.predictor, rec.planner),
                      format_trace(trace, cfg.trace_predictions));
    }
    const std::lock_guard lock(mu);
    ++done;
    std::fprintf(stderr, "[%zu/%zu] %s %s %s score=%.3f%s\n", done, total, rec.scenario.c_str(),
                 rec.predictor.c_str(), rec.planner.c_str(), rec.cl.score, rec.failed ? " FAILED" : "");
  };
  const auto records = run_sweep(scenarios, cfg.predictors, cfg.planners, sim, cfg.score, cfg.tc_mode, opts);
  write_records(out, records);
  std::vector<RecordRow> rows;
  for (const auto& r : records) rows.push_back(to_row(r));
  const auto summary = summarize(rows);
  write_text_file(out / "summary.csv", summary_csv(summary));
  const std::string table = summary_text(summary);
  write_text_file(out / "summary.txt", table);
  std::fputs(table.c_str(), stdout);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.failed ? 1 : 0;
  if (failed > 0) std::fprintf(stderr, "%zu of %zu runs failed\n", failed, records.size());
  std::printf("wrote %zu records to %s\n", records.size(), out.string().c_str());
  return 0;
}

int cmd_filter(const std::string& dir, double threshold, bool all, bool strict) {
  const LoadOptions load{strict};
  if (!fs::is_directory(dir)) throw Error(dir + ": not a readable directory");
  std::size_t kept = 0;
  for (const auto& f : scenario_files(dir)) {
    LoadReport report;
    const Scenario sc = load_scenario(f, load, &report);
    print_warnings(report);
    const auto d = scenario_delta_ttcp(sc);
    const bool interactive = d.has_value() && *d <= threshold;
    if (!interactive && !all) continue;
    kept += interactive ? 1 : 0;
    if (d) {
      std::printf("%s\t%.4f%s\n", sc.name.c_str(), *d, all && !interactive ? "\t(not interactive)" : "");
    } else {
      std::printf("%s\t-\t(no conflict point)\n", sc.name.c_str());
    }
  }
  std::fprintf(stderr, "%zu interactive at threshold %g s\n", kept, threshold);
  return 0;
}

int cmd_report(const std::string& records_path, const std::vector<std::string>& metrics, const std::string& out_flag) {
  for (const auto& m : metrics) {
    try {
      check_report_metric(m);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  const auto rows = load_records(records_path);
  if (rows.empty()) throw UsageError(records_path + ": no records");
  const fs::path out = output_dir(out_flag, fs::path(records_path).parent_path() / "report");
  fs::create_directories(out);
  std::string text = summary_text(summarize(rows));
  for (const auto& m : metrics) {
    const auto series = scatter_series(rows, m);
    write_text_file(out / ("scatter_" + m + ".svg"), render_scatter_svg(series, m));
    text += "\n" + regression_text(series, m);
  }
  write_text_file(out / "report.txt", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_generate(const std::string& out, int seeds, const std::string& empty_road) {
  if (seeds < 1) throw UsageError("--seeds must be at least 1");
  const fs::path dir = output_dir(out, std::nullopt);
  fs::create_directories(dir);
  std::size_t n = 0;
  for (auto t : all_templates()) {
    for (int s = 0; s < seeds; ++s) {
      const Scenario sc = generate_scenario(t, {}, static_cast<std::uint64_t>(s));
      save_scenario(sc, dir / (sc.name + ".json"));
      ++n;
    }
  }
  if (!empty_road.empty()) {
    save_scenario(empty_road_scenario(), empty_road);
    ++n;
  }
  std::printf("wrote %zu scenarios\n", n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop prediction and planning benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "loopbench 0.1.0");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Simulate one scenario with one predictor and planner");
  run_cmd->add_option("scenario", run.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--predictor", run.predictor, "Predictor name (a kind, or a name from --config)")
      ->capture_default_str();
  run_cmd->add_option("--planner", run.planner, "Planner name (a kind, or a name from --config)")
      ->capture_default_str();
  run_cmd->add_option("--config", run.config, "Experiment config supplying named specs")->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--seed", run.seed, "Top-level seed");
  run_cmd->add_flag("--strict", run.strict, "Reject unknown fields instead of warning");
  run_cmd->add_flag("--trace-predictions", run.trace_predictions, "Store every prediction in the trace");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every scenario x predictor x planner combination");
  sweep_cmd->add_option("--config", sweep.config, "Experiment config")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep.out, "Output directory");
  sweep_cmd->add_option("--jobs", sweep.jobs, "Concurrent simulations");
  sweep_cmd->add_option("--seed", sweep.seed, "Top-level seed");
  sweep_cmd->add_flag("--strict", sweep.strict, "Reject unknown fields instead of warning");
  sweep_cmd->add_flag("--trace-predictions", sweep.trace_predictions, "Store every prediction in the traces");
  sweep_cmd->add_flag("--no-traces", sweep.no_traces, "Skip per-run trace files");

  std::string filter_dir;
  double threshold = 3.0;
  bool filter_all = false;
  bool filter_strict = false;
  auto* filter_cmd = app.add_subcommand("filter", "List interactive scenarios by minimum time-to-conflict-point gap");
  filter_cmd->add_option("scenario_dir", filter_dir, "Directory of scenario files")->required();
  filter_cmd->add_option("--threshold", threshold, "Interactive if the minimum gap is at most this (s)")
      ->capture_default_str();
  filter_cmd->add_flag("--all", filter_all, "Also list non-interactive scenarios");
  filter_cmd->add_flag("--strict", filter_strict, "Reject unknown fields instead of warning");

  std::string records_path;
  std::vector<std::string> metrics{"min_ade_6"};
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Scatter plots of open-loop metrics against closed-loop score");
  report_cmd->add_option("records", records_path, "records.csv or records.json")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--metric", metrics, "Open-loop metric (repeatable)")->capture_default_str();
  report_cmd->add_option("--out", report_out, "Output directory (default: <records dir>/report)");

  std::string gen_out;
  int gen_seeds = 10;
  std::string gen_empty;
  auto* gen_cmd = app.add_subcommand("generate", "Write the templated scenario suite");
  gen_cmd->add_option("--out", gen_out, "Output directory");
  gen_cmd->add_option("--seeds", gen_seeds, "Seeds per template (0..n-1)")->capture_default_str();
  gen_cmd->add_option("--empty-road", gen_empty, "Also write the empty-road scenario to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*sweep_cmd) return cmd_sweep(sweep);
    if (*filter_cmd) return cmd_filter(filter_dir, threshold, filter_all, filter_strict);
    if (*report_cmd) return cmd_report(records_path, metrics, report_out);
    if (*gen_cmd) return cmd_generate(gen_out, gen_seeds, gen_empty);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
