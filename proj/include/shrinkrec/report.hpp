#pragma once

// CSV tables, the JSON report and SVG line charts. Column layouts are listed
// in docs/csv.md; the report schema in docs/report-schema.json.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkrec/harness.hpp"

namespace shrinkrec {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kCsvSchemaVersion = 1;

// A header plus rows of already formatted cells.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << cells[i];
      }
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
  }

  // Array of objects; cells stay strings so exact values keep their form.
  nlohmann::json json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json o = nlohmann::json::object();
      for (std::size_t i = 0; i < header.size(); ++i) o[header[i]] = r[i];
      arr.push_back(std::move(o));
    }
    return arr;
  }
};

inline std::string cell(std::uint64_t v) { return std::to_string(v); }
inline std::string cell(double v) { return format_double(v); }
inline std::string cell(const Rational& q) { return to_string(q); }
inline std::string cell(const std::optional<Rational>& q) { return q ? to_string(*q) : std::string{}; }

// One row per (seed, checkpoint).
inline Table count_table(const std::vector<CountRecord>& records) {
  const bool target = !records.empty() && records.front().kind == CountKind::Target;
  Table t;
  t.name = "counts";
  t.header = target ? std::vector<std::string>{"seed", "N", "W", "Phi_exact", "Phi_float", "unresolved"}
                    : std::vector<std::string>{"seed", "N", "R", "Psi_exact", "Psi_float", "unresolved"};
  for (const auto& r : records) {
    for (std::size_t j = 0; j < r.checkpoints.size(); ++j) {
      t.rows.push_back({cell(r.seed), cell(r.checkpoints[j]), cell(r.counts[j]), cell(r.main_term_exact[j]),
                        cell(r.main_term[j]), cell(r.unresolved[j])});
    }
  }
  return t;
}

inline Table checkpoint_table(const ExperimentResult& e) {
  Table t;
  t.name = "checkpoints";
  t.header = {"N",
              "samples",
              "main_exact",
              "main_float",
              "mean",
              "variance",
              "mean_abs_error",
              "median_abs_error",
              "q90_abs_error",
              "max_abs_error",
              "median_relative_error",
              "envelope",
              "envelope_fraction",
              "unresolved"};
  for (const auto& s : e.stats) {
    t.rows.push_back({cell(s.n), cell(static_cast<std::uint64_t>(s.samples)), cell(s.main_term_exact),
                      cell(s.main_term), cell(s.mean), cell(s.variance), cell(s.mean_abs_error),
                      cell(s.median_abs_error), cell(s.q90_abs_error), cell(s.max_abs_error),
                      cell(s.median_relative_error), cell(s.envelope), cell(s.envelope_fraction),
                      cell(s.unresolved)});
  }
  return t;
}

inline Table measure_table(const std::string& kind, unsigned n, const Rational& v) {
  return Table{"measure", {"kind", "n", "measure_exact", "measure_float"},
               {{kind, cell(static_cast<std::uint64_t>(n)), cell(v), cell(to_double(v))}}};
}

inline Table intersect_table(const std::string& kind, unsigned m, unsigned n, const Rational& v) {
  return Table{"intersect",
               {"kind", "m", "n", "measure_exact", "measure_float"},
               {{kind, cell(static_cast<std::uint64_t>(m)), cell(static_cast<std::uint64_t>(n)), cell(v),
                 cell(to_double(v))}}};
}

inline Table mixing_table(unsigned n, const Rational& deficit, const Rational& bound) {
  return Table{"mixing",
               {"kind", "n", "deficit_exact", "deficit_float", "bound_exact", "bound_float"},
               {{"mixing", cell(static_cast<std::uint64_t>(n)), cell(deficit), cell(to_double(deficit)),
                 cell(bound), cell(to_double(bound))}}};
}

inline Table fit_table(const FitResult& f) {
  return Table{"fit",
               {"slope", "intercept", "band_lo", "band_hi", "points", "zero_residual"},
               {{cell(f.slope), cell(f.intercept), cell(f.band_lo), cell(f.band_hi),
                 cell(static_cast<std::uint64_t>(f.points)), f.zero_residual ? "true" : "false"}}};
}

inline Table variance_table(const VarianceResult& v, std::uint64_t proxy_from) {
  return Table{"variance",
               {"a", "b", "samples", "statistic", "standard_error", "phi_sum", "ratio", "proxy_from"},
               {{cell(v.a), cell(v.b), cell(static_cast<std::uint64_t>(v.samples)), cell(v.statistic),
                 cell(v.standard_error), cell(v.phi_sum), cell(v.ratio), cell(proxy_from)}}};
}

inline Table dichotomy_table(const std::vector<CountRecord>& records) {
  Table t;
  t.name = "dichotomy";
  t.header = {"seed", "final", "last_hit"};
  for (const auto& r : records) t.rows.push_back({cell(r.seed), cell(r.counts.back()), cell(r.last_hit)});
  return t;
}

// ---------------------------------------------------------------------------
// SVG line charts

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  double width = 720;
  double height = 440;
};

namespace svg_detail {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace svg_detail

// Points with non-finite coordinates, or non-positive ones on a log axis,
// are skipped.
inline std::string svg_line_chart(const ChartSpec& spec, const std::vector<Series>& series) {
  using svg_detail::num;
  const double left = 70, right = 170, top = 40, bottom = 50;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;
  auto tx = [&](double x) { return spec.log_x ? std::log10(x) : x; };
  auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0) && (!spec.log_y || y > 0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if (!usable(x, y)) continue;
      x0 = std::min(x0, tx(x));
      x1 = std::max(x1, tx(x));
      y0 = std::min(y0, ty(y));
      y1 = std::max(y1, ty(y));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return left + (tx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - ty(y)) / (y1 - y0) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(spec.width) << "\" height=\""
    << num(spec.height) << "\" viewBox=\"0 0 " << num(spec.width) << ' ' << num(spec.height) << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"15\">" << svg_detail::escape(spec.title) << "</text>\n";
  s << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  const int ticks = 5;
  for (int k = 0; k <= ticks; ++k) {
    const double fx = x0 + (x1 - x0) * k / ticks, fy = y0 + (y1 - y0) * k / ticks;
    const double gx = left + pw * k / ticks, gy = top + ph - ph * k / ticks;
    const double vx = spec.log_x ? std::pow(10.0, fx) : fx, vy = spec.log_y ? std::pow(10.0, fy) : fy;
    s << "<line x1=\"" << num(gx) << "\" y1=\"" << num(top) << "\" x2=\"" << num(gx) << "\" y2=\""
      << num(top + ph) << "\" stroke=\"#dddddd\"/>\n";
    s << "<line x1=\"" << num(left) << "\" y1=\"" << num(gy) << "\" x2=\"" << num(left + pw) << "\" y2=\""
      << num(gy) << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << num(gx) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"11\">" << svg_detail::tick(vx) << "</text>\n";
    s << "<text x=\"" << num(left - 6) << "\" y=\"" << num(gy + 4) << "\" text-anchor=\"end\" "
      << "font-family=\"sans-serif\" font-size=\"11\">" << svg_detail::tick(vy) << "</text>\n";
  }
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(spec.height - 10)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << svg_detail::escape(spec.x_label)
    << "</text>\n";
  s << "<text transform=\"translate(16," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\" "
    << "font-family=\"sans-serif\" font-size=\"12\">" << svg_detail::escape(spec.y_label) << "</text>\n";

  double legend_y = top + 10;
  for (const auto& ser : series) {
    std::string pts;
    for (auto [x, y] : ser.points) {
      if (!usable(x, y)) continue;
      pts += num(px(x)) + "," + num(py(y)) + " ";
    }
    if (!pts.empty()) pts.pop_back();
    s << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"1.5\""
      << (ser.dashed ? " stroke-dasharray=\"5,4\"" : "") << " points=\"" << pts << "\"/>\n";
    s << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(legend_y) << "\" x2=\"" << num(left + pw + 36)
      << "\" y2=\"" << num(legend_y) << "\" stroke=\"" << ser.color << "\" stroke-width=\"1.5\""
      << (ser.dashed ? " stroke-dasharray=\"5,4\"" : "") << "/>\n";
    s << "<text x=\"" << num(left + pw + 42) << "\" y=\"" << num(legend_y + 4)
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << svg_detail::escape(ser.label) << "</text>\n";
    legend_y += 18;
  }
  s << "</svg>\n";
  return s.str();
}

// R - Psi against N (log x): mean, median and the envelope.
inline std::string residual_chart(const ExperimentResult& e, const Envelope& env) {
  Series mean{"mean R - main", {}, "#1f77b4", false};
  Series med{"median R - main", {}, "#ff7f0e", false};
  Series up{"+envelope", {}, "#7f7f7f", true};
  Series down{"-envelope", {}, "#7f7f7f", true};
  for (std::size_t j = 0; j < e.stats.size(); ++j) {
    const auto& s = e.stats[j];
    std::vector<double> diffs;
    for (const auto& r : e.records) diffs.push_back(static_cast<double>(r.counts[j]) - r.main_term[j]);
    const double x = static_cast<double>(s.n);
    mean.points.push_back({x, s.mean - s.main_term});
    med.points.push_back({x, stats::median(diffs)});
    up.points.push_back({x, env(s.main_term)});
    down.points.push_back({x, -env(s.main_term)});
  }
  return svg_line_chart({"R - main term", "N", "R - main term", true, false}, {mean, med, up, down});
}

// Median |R - Psi| against Psi, overlaid with Psi^{1/2} (log Psi)^{3/2}.
inline std::string envelope_chart(const ExperimentResult& e) {
  Series med{"median |R - main|", {}, "#ff7f0e", false};
  Series ref{"main^(1/2) log^(3/2) main", {}, "#2ca02c", true};
  for (const auto& s : e.stats) {
    if (s.main_term <= 1) continue;
    med.points.push_back({s.main_term, s.median_abs_error});
    ref.points.push_back({s.main_term, std::sqrt(s.main_term) * std::pow(std::log(s.main_term), 1.5)});
  }
  return svg_line_chart({"error against main term", "main term", "|R - main term|", true, true}, {med, ref});
}

}  // namespace shrinkrec
