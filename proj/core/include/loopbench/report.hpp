#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loopbench/experiment.hpp"

namespace loopbench {

/// Ordinary least squares y = intercept + slope * x with a two-sided t-test
/// on the slope (n - 2 degrees of freedom).
struct OlsFit {
  std::size_t n{0};
  double slope{0.0};
  double intercept{0.0};
  double slope_se{0.0};
  double t_stat{0.0};
  double p_value{1.0};
  double ci_low{0.0};   // 95 % interval of the slope
  double ci_high{0.0};
  /// False when fewer than three points or x has no spread; then only the
  /// points are meaningful.
  bool valid{false};
};

OlsFit ols_fit(std::span<const double> x, std::span<const double> y, double confidence = 0.95);

/// Open-loop metrics that can go on the x axis.
std::span<const std::string_view> report_metric_names();
/// Throws ConfigError listing the valid names.
void check_report_metric(std::string_view metric);

/// One point per (predictor, planner): mean OL metric against mean CL score.
struct ScatterPoint {
  std::string predictor;
  std::string planner;
  double x{0.0};
  double y{0.0};
};

struct ScatterSeries {
  std::string planner;
  std::vector<ScatterPoint> points;  // ordered by predictor
  OlsFit fit;
};

/// Series ordered by planner name.
std::vector<ScatterSeries> scatter_series(const std::vector<RecordRow>& rows, std::string_view metric);

/// Deterministic SVG: fixed layout, fixed number formatting, no timestamps.
std::string render_scatter_svg(const std::vector<ScatterSeries>& series, std::string_view metric);

/// Slope, interval and p-value per series.
std::string regression_text(const std::vector<ScatterSeries>& series, std::string_view metric);

}  // namespace loopbench
