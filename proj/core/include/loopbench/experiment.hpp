#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loopbench/metrics.hpp"
#include "loopbench/planner.hpp"
#include "loopbench/predictors.hpp"
#include "loopbench/scenario_gen.hpp"
#include "loopbench/scenario_io.hpp"
#include "loopbench/sim.hpp"

namespace loopbench {

inline constexpr int kExperimentSchemaVersion = 1;

struct TemplateSet {
  ScenarioTemplate kind{ScenarioTemplate::kLeadBrake};
  std::vector<std::uint64_t> seeds;
  TemplateParams params;
};

struct ExperimentConfig {
  /// Scenario files, or directories whose *.json files are taken in name order.
  std::vector<std::filesystem::path> scenario_paths;
  std::vector<TemplateSet> templates;
  std::vector<PredictorSpec> predictors;
  std::vector<PlannerSpec> planners;
  SimConfig sim;
  ScoreConfig score;
  TcMode tc_mode{TcMode::kMostProbable};
  std::filesystem::path out_dir{"out"};
  int jobs{1};
  std::uint64_t seed{0};
  bool write_traces{true};
  bool trace_predictions{false};

  /// At least one scenario source, predictor and planner; unique names; jobs >= 1.
  void validate() const;
};

/// Relative scenario paths are resolved against `base_dir`.
ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir,
                                         const LoadOptions& options = {}, LoadReport* report = nullptr);
ExperimentConfig load_experiment_config(const std::filesystem::path& path, const LoadOptions& options = {},
                                        LoadReport* report = nullptr);

/// Default spec for a kind name ("kinematic", "mpcc", ...); the name doubles as the spec name.
PredictorSpec default_predictor_spec(std::string_view kind);
PlannerSpec default_planner_spec(std::string_view kind);

/// Loads every path and generates every template set, in config order.
/// Throws ConfigError on duplicate scenario names.
std::vector<Scenario> resolve_scenarios(const ExperimentConfig& cfg, const LoadOptions& options = {});

/// *.json files of a directory in name order.
std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir);

struct EvaluationRecord {
  std::string scenario;
  std::string predictor;
  std::string planner;
  OpenLoopMetrics ol;
  ClosedLoopMetrics cl;
  double solve_time_mean_ms{0.0};  // wall clock
  bool failed{false};
  std::string failure_message;
};

/// Runs one closed-loop simulation and scores it.
EvaluationRecord evaluate_run(const Scenario& scenario, const PredictorSpec& predictor, const PlannerSpec& planner,
                              const SimConfig& sim, const ScoreConfig& score, TcMode tc_mode = TcMode::kMostProbable,
                              SimTrace* trace_out = nullptr);

struct SweepOptions {
  int jobs{1};
  /// Called from worker threads after each run; may be empty.
  std::function<void(const EvaluationRecord&, const SimTrace&)> on_run;
};

/// Full scenario x predictor x planner product. Results are sorted by
/// (scenario, predictor, planner) regardless of completion order. A run that
/// throws is recorded as failed and the sweep continues.
std::vector<EvaluationRecord> run_sweep(const std::vector<Scenario>& scenarios,
                                        const std::vector<PredictorSpec>& predictors,
                                        const std::vector<PlannerSpec>& planners, const SimConfig& sim,
                                        const ScoreConfig& score, TcMode tc_mode, const SweepOptions& options);

/// Frozen CSV column order.
std::span<const std::string_view> record_columns();
/// Columns that depend on wall-clock time.
bool is_wall_clock_column(std::string_view column);

/// Flat column -> value view of a record, in record_columns() order.
/// Strings are the three key columns; everything else is numeric.
struct RecordRow {
  std::string scenario;
  std::string predictor;
  std::string planner;
  std::vector<double> values;  // one per numeric column
};

RecordRow to_row(const EvaluationRecord& record);
std::string records_csv(const std::vector<EvaluationRecord>& records);
std::string records_json(const std::vector<EvaluationRecord>& records);
std::vector<RecordRow> parse_records_csv(std::string_view text);
std::vector<RecordRow> parse_records_json(std::string_view text);
/// Dispatches on the file extension (.csv or .json).
std::vector<RecordRow> load_records(const std::filesystem::path& path);
/// Value of a named numeric column; throws ConfigError listing valid names.
double row_value(const RecordRow& row, std::string_view column);
std::size_t numeric_column_index(std::string_view column);

/// Per (predictor, planner) aggregate over scenarios.
struct SummaryRow {
  std::string predictor;
  std::string planner;
  std::size_t scenarios{0};
  double min_ade_6{0.0};
  double min_fde_6{0.0};
  double min_nll_6{0.0};
  double tc{0.0};
  double mean_speed{0.0};
  double mean_abs_jerk{0.0};
  double ttc_min_mean{0.0};
  double ttc_min_std{0.0};  // sample standard deviation
  double collision_rate{0.0};  // at-fault runs / scenarios
  double score_mean{0.0};
  std::size_t failed{0};
};

/// Sorted by (predictor, planner).
std::vector<SummaryRow> summarize(const std::vector<RecordRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
/// Fixed-width table.
std::string summary_text(const std::vector<SummaryRow>& rows);

/// Trace document in the scenario file style. Predictions are included only
/// when requested.
std::string format_trace(const SimTrace& trace, bool with_predictions);
std::string trace_file_name(std::string_view scenario, std::string_view predictor, std::string_view planner);

}  // namespace loopbench
