#include "loopbench/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include <boost/math/distributions/students_t.hpp>

#include "loopbench/errors.hpp"

namespace loopbench {

namespace {

constexpr std::array<std::string_view, 6> kMetrics = {"min_ade_1", "min_ade_6", "min_fde_1",
                                                      "min_fde_6", "min_nll_6", "tc"};

constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

constexpr double kWidth = 640.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 180.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 60.0;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  std::string s = buf;
  return s == "-0.000" || s == "-0.00" || s == "-0" ? s.substr(1) : s;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Padded data range; a zero-width range is widened symmetrically.
std::pair<double, double> axis_range(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::max(std::abs(lo) * 0.1, 0.5);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.08 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

OlsFit ols_fit(std::span<const double> x, std::span<const double> y, double confidence) {
  if (x.size() != y.size()) throw ConfigError("ols_fit: x and y differ in length");
  OlsFit fit;
  fit.n = x.size();
  if (fit.n == 0) return fit;
  const double n = static_cast<double>(fit.n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  fit.intercept = my;
  if (fit.n < 3 || !(sxx > 0.0)) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  const double dof = n - 2.0;
  fit.slope_se = std::sqrt(sse / dof / sxx);
  const boost::math::students_t dist(dof);
  const double q = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
  fit.ci_low = fit.slope - q * fit.slope_se;
  fit.ci_high = fit.slope + q * fit.slope_se;
  if (fit.slope_se > 0.0) {
    fit.t_stat = fit.slope / fit.slope_se;
    fit.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.t_stat)));
  } else if (fit.slope != 0.0) {
    // Exact fit: the slope is known without error.
    fit.t_stat = std::copysign(std::numeric_limits<double>::infinity(), fit.slope);
    fit.p_value = 0.0;
  } else {
    fit.p_value = 1.0;
  }
  fit.valid = true;
  return fit;
}

std::span<const std::string_view> report_metric_names() { return kMetrics; }

void check_report_metric(std::string_view metric) {
  if (std::find(kMetrics.begin(), kMetrics.end(), metric) != kMetrics.end()) return;
  std::string names;
  for (auto m : kMetrics) names += (names.empty() ? "" : ", ") + std::string(m);
  throw ConfigError("unknown metric '" + std::string(metric) + "'; valid metrics: " + names);
}

std::vector<ScatterSeries> scatter_series(const std::vector<RecordRow>& rows, std::string_view metric) {
  check_report_metric(metric);
  if (rows.empty()) throw ConfigError("no records to report");
  const std::size_t xi = numeric_column_index(metric);
  const std::size_t yi = numeric_column_index("score");
  struct Acc {
    double x{0.0}, y{0.0};
    std::size_t n{0};
  };
  std::map<std::string, std::map<std::string, Acc>> by_planner;
  for (const auto& r : rows) {
    Acc& a = by_planner[r.planner][r.predictor];
    a.x += r.values[xi];
    a.y += r.values[yi];
    ++a.n;
  }
  std::vector<ScatterSeries> out;
  for (const auto& [planner, preds] : by_planner) {
    ScatterSeries s;
    s.planner = planner;
    std::vector<double> xs, ys;
    for (const auto& [pred, a] : preds) {
      const double n = static_cast<double>(a.n);
      s.points.push_back({pred, planner, a.x / n, a.y / n});
      xs.push_back(a.x / n);
      ys.push_back(a.y / n);
    }
    s.fit = ols_fit(xs, ys);
    out.push_back(std::move(s));
  }
  return out;
}

std::string render_scatter_svg(const std::vector<ScatterSeries>& series, std::string_view metric) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = ymin = 0.0;
    xmax = ymax = 1.0;
  }
  const auto [x0, x1] = axis_range(xmin, xmax);
  const auto [y0, y1] = axis_range(ymin, ymax);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) + "\" height=\"" +
         fmt("%.0f", kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + fmt("%.1f", kLeft) + "\" y=\"" + fmt("%.1f", kTop) + "\" width=\"" + fmt("%.1f", pw) +
         "\" height=\"" + fmt("%.1f", ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    svg += "<text x=\"" + fmt("%.1f", px(xv)) + "\" y=\"" + fmt("%.1f", kTop + ph + 16.0) +
           "\" text-anchor=\"middle\">" + fmt("%.3f", xv) + "</text>\n";
    svg += "<text x=\"" + fmt("%.1f", kLeft - 6.0) + "\" y=\"" + fmt("%.1f", py(yv) + 4.0) +
           "\" text-anchor=\"end\">" + fmt("%.3f", yv) + "</text>\n";
  }
  svg += "<text x=\"" + fmt("%.1f", kLeft + pw / 2.0) + "\" y=\"" + fmt("%.1f", kHeight - 20.0) +
         "\" text-anchor=\"middle\">" + escape_xml(metric) + "</text>\n";
  svg += "<text transform=\"translate(16," + fmt("%.1f", kTop + ph / 2.0) +
         ") rotate(-90)\" text-anchor=\"middle\">mean CL score</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string color = kPalette[si % kPalette.size()];
    for (const auto& p : s.points) {
      svg += "<circle cx=\"" + fmt("%.2f", px(p.x)) + "\" cy=\"" + fmt("%.2f", py(p.y)) + "\" r=\"4\" fill=\"" +
             color + "\"><title>" + escape_xml(p.predictor + " / " + p.planner) + "</title></circle>\n";
    }
    if (s.fit.valid) {
      const double ya = s.fit.intercept + s.fit.slope * x0;
      const double yb = s.fit.intercept + s.fit.slope * x1;
      svg += "<clipPath id=\"c" + std::to_string(si) + "\"><rect x=\"" + fmt("%.1f", kLeft) + "\" y=\"" +
             fmt("%.1f", kTop) + "\" width=\"" + fmt("%.1f", pw) + "\" height=\"" + fmt("%.1f", ph) +
             "\"/></clipPath>\n";
      svg += "<line x1=\"" + fmt("%.2f", px(x0)) + "\" y1=\"" + fmt("%.2f", py(ya)) + "\" x2=\"" + fmt("%.2f", px(x1)) +
             "\" y2=\"" + fmt("%.2f", py(yb)) + "\" stroke=\"" + color + "\" clip-path=\"url(#c" +
             std::to_string(si) + ")\"/>\n";
    }
    const double ly = kTop + 14.0 + 48.0 * static_cast<double>(si);
    const double lx = kLeft + pw + 14.0;
    svg += "<circle cx=\"" + fmt("%.1f", lx) + "\" cy=\"" + fmt("%.1f", ly - 4.0) + "\" r=\"4\" fill=\"" + color +
           "\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", lx + 10.0) + "\" y=\"" + fmt("%.1f", ly) + "\">" + escape_xml(s.planner) +
           "</text>\n";
    if (s.fit.valid) {
      svg += "<text x=\"" + fmt("%.1f", lx + 10.0) + "\" y=\"" + fmt("%.1f", ly + 14.0) + "\">slope " +
             fmt("%.4f", s.fit.slope) + " [" + fmt("%.4f", s.fit.ci_low) + ", " + fmt("%.4f", s.fit.ci_high) +
             "]</text>\n";
      svg += "<text x=\"" + fmt("%.1f", lx + 10.0) + "\" y=\"" + fmt("%.1f", ly + 28.0) + "\">p = " +
             fmt("%.4f", s.fit.p_value) + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string regression_text(const std::vector<ScatterSeries>& series, std::string_view metric) {
  std::string out = "score vs " + std::string(metric) + "\n";
  for (const auto& s : series) {
    out += "  " + s.planner + ": n=" + std::to_string(s.points.size());
    if (s.fit.valid) {
      out += " slope=" + fmt("%.6f", s.fit.slope) + " ci95=[" + fmt("%.6f", s.fit.ci_low) + ", " +
             fmt("%.6f", s.fit.ci_high) + "] t=" + fmt("%.4f", s.fit.t_stat) + " p=" + fmt("%.6f", s.fit.p_value);
    } else {
      out += " (regression needs three points with distinct x)";
    }
    out += "\n";
  }
  return out;
}

}  // namespace loopbench
