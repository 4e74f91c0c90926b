#pragma once

// Executes a validated RunConfig and persists its artifacts. The tables,
// summary and threshold checks of a run are deterministic; only the manifest
// carries timestamps.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "shrinkrec/config.hpp"
#include "shrinkrec/exact_measure.hpp"
#include "shrinkrec/report.hpp"
#include "shrinkrec/version.hpp"

namespace shrinkrec {

// Exit codes of the command-line contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitThreshold = 2;

struct Check {
  std::string name;
  double value = 0;
  double threshold = 0;
  std::string relation;  // "<=" or ">="
  bool passed = false;
};

struct RunOutput {
  Mode mode = Mode::Count;
  std::vector<Table> tables;  // the first one is the primary table
  Json summary = Json::object();
  std::vector<Check> checks;
  std::vector<std::pair<std::string, std::string>> charts;  // file name, SVG text
  int exit_code = kExitOk;
};

inline Check check_at_most(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, "<=", value <= threshold};
}

inline Check check_at_least(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, ">=", value >= threshold};
}

inline std::size_t run_budget(const RunConfig& c) {
  return c.budget ? c.budget : precision_budget(*c.map, c.rate, c.n_max);
}

inline PredicateOptions predicate_options(const RunConfig& c) { return {c.metric, c.refine_cap, false}; }

inline ExperimentConfig experiment_config(const RunConfig& c) {
  ExperimentConfig e(*c.map, c.rate);
  e.kind = c.counts_targets() ? CountKind::Target : CountKind::Recurrence;
  if (c.target) e.target = *c.target;
  e.target_mode = c.target_sampled ? TargetMode::Sampled : TargetMode::Fixed;
  e.checkpoints = c.checkpoints();
  e.samples = c.samples;
  e.master_seed = c.seed;
  e.predicate = predicate_options(c);
  e.budget = run_budget(c);
  e.threads = c.threads;
  e.envelope = c.thresholds.envelope;
  return e;
}

namespace run_detail {

inline const char* event_name(EventChoice e) { return to_string(e); }

inline Json record_summary(const std::vector<CountRecord>& records) {
  Json finals = Json::array();
  std::uint64_t unresolved = 0;
  for (const auto& r : records) {
    finals.push_back(r.counts.back());
    unresolved += r.unresolved.back();
  }
  Json s;
  s["points"] = records.size();
  s["final_counts"] = finals;
  s["main_term_float"] = records.empty() ? 0.0 : records.front().main_term.back();
  s["main_term_exact"] = records.empty() ? "" : cell(records.front().main_term_exact.back());
  s["unresolved"] = unresolved;
  return s;
}

inline RunOutput run_count(const RunConfig& c) {
  RunOutput out;
  const auto checkpoints = c.checkpoints();
  const OrbitProbe probe(*c.map, predicate_options(c));
  const RateSchedule schedule(probe, c.rate, checkpoints.back(), c.counts_targets() ? &*c.target : nullptr);
  const std::size_t budget = run_budget(c);
  std::vector<CountRecord> records;
  if (c.point) {
    GenericPoint p = GenericPoint::forced(*c.map, c.point->prefix, c.point->cycle, budget);
    records.push_back(count_with_schedule(probe, schedule, p, checkpoints));
  } else {
    records.resize(c.samples);
    parallel_for(c.samples, c.threads ? c.threads : default_threads(), [&](std::size_t i) {
      GenericPoint p = GenericPoint::sample(*c.map, point_seed(c.seed, i), budget);
      records[i] = count_with_schedule(probe, schedule, p, checkpoints);
    });
  }
  out.tables.push_back(count_table(records));
  out.summary = record_summary(records);
  return out;
}

inline RunOutput run_measure(const RunConfig& c) {
  Rational v;
  switch (c.event) {
    case EventChoice::Recurrence:
      v = recurrence_measure(*c.map, c.rate, c.n, c.oracle_cap);
      break;
    case EventChoice::Target:
      v = measure(event_target(*c.map, c.rate, *c.target, c.n, c.oracle_cap));
      break;
    case EventChoice::Phi:
      v = phi_sum(*c.map, c.rate, c.n, c.oracle_cap);
      break;
  }
  RunOutput out;
  out.tables.push_back(measure_table(event_name(c.event), c.n, v));
  out.summary = {{"measure_exact", to_string(v)}, {"measure_float", to_double(v)}};
  return out;
}

inline RunOutput run_intersect(const RunConfig& c) {
  auto event = [&](unsigned n) {
    return c.event == EventChoice::Target ? event_target(*c.map, c.rate, *c.target, n, c.oracle_cap)
                                          : event_recurrence(*c.map, c.rate, n, c.oracle_cap);
  };
  const EventSet a = event(c.m), b = event(c.n);
  const Rational v = measure_intersection(a, b);
  RunOutput out;
  out.tables.push_back(intersect_table(event_name(c.event), c.m, c.n, v));
  out.summary = {{"measure_exact", to_string(v)},
                 {"measure_float", to_double(v)},
                 {"measure_m_exact", to_string(measure(a))},
                 {"measure_n_exact", to_string(measure(b))}};
  return out;
}

inline RunOutput run_mixing(const RunConfig& c) {
  const Rational deficit = mixing_deficit(*c.map, *c.e_rect, c.f_rects, c.n, c.oracle_cap);
  const Rational bound = mixing_bound(*c.map, c.f_rects, c.n);
  RunOutput out;
  out.tables.push_back(mixing_table(c.n, deficit, bound));
  out.summary = {{"deficit_exact", to_string(deficit)},
                 {"bound_exact", to_string(bound)},
                 {"within_bound", abs(deficit) <= bound}};
  return out;
}

inline Json stats_summary(const ExperimentResult& e) {
  const auto& last = e.stats.back();
  return {{"samples", last.samples},
          {"n_max", last.n},
          {"main_term_float", last.main_term},
          {"main_term_exact", cell(last.main_term_exact)},
          {"mean_count", last.mean},
          {"median_relative_error", last.median_relative_error},
          {"envelope_fraction", e.envelope_fraction},
          {"unresolved", e.unresolved}};
}

inline void add_charts(RunOutput& out, const RunConfig& c, const ExperimentResult& e) {
  if (!c.output.svg) return;
  out.charts.emplace_back("residual.svg", residual_chart(e, c.thresholds.envelope));
  out.charts.emplace_back("error_vs_main.svg", envelope_chart(e));
}

inline RunOutput run_experiment_mode(const RunConfig& c) {
  ExperimentConfig ec = experiment_config(c);
  ec.keep_indicators = c.variance_range.has_value();
  const ExperimentResult e = run_experiment(ec);
  RunOutput out;
  out.tables.push_back(checkpoint_table(e));
  out.tables.push_back(count_table(e.records));
  out.summary = stats_summary(e);
  out.checks.push_back(
      check_at_most("median_relative_error", e.stats.back().median_relative_error, c.thresholds.relative_error));
  out.checks.push_back(check_at_least("envelope_fraction", e.envelope_fraction, c.thresholds.envelope_fraction));
  try {
    const FitResult f = fit_error_exponent(e, c.seed);
    out.tables.push_back(fit_table(f));
    out.summary["fit_slope"] = f.slope;
    out.summary["fit_band_hi"] = f.band_hi;
    if (!f.zero_residual) out.checks.push_back(check_at_most("fit_band_hi", f.band_hi, c.thresholds.slope_band));
  } catch (const InsufficientData& err) {
    out.summary["fit_skipped"] = err.what();
  }
  if (c.variance_range) {
    const auto [a, b] = *c.variance_range;
    const CSequence seq = c_sequence(*c.map, c.rate, b, c.oracle_depth, c.oracle_cap);
    const VarianceResult v = variance_statistic(indicators_of(e), a, b, seq.values, seq.values);
    out.tables.push_back(variance_table(v, seq.proxy_from));
    out.summary["variance_statistic"] = v.statistic;
    out.summary["variance_phi_sum"] = v.phi_sum;
    out.checks.push_back(
        check_at_most("variance_statistic", v.statistic, c.thresholds.variance_factor * v.phi_sum));
  }
  add_charts(out, c, e);
  return out;
}

inline RunOutput run_fit_mode(const RunConfig& c) {
  const ExperimentResult e = run_experiment(experiment_config(c));
  const FitResult f = fit_error_exponent(e, c.seed);
  RunOutput out;
  out.tables.push_back(fit_table(f));
  out.tables.push_back(checkpoint_table(e));
  out.summary = stats_summary(e);
  out.summary["fit_slope"] = f.slope;
  out.summary["fit_band_lo"] = f.band_lo;
  out.summary["fit_band_hi"] = f.band_hi;
  out.summary["zero_residual"] = f.zero_residual;
  if (!f.zero_residual) out.checks.push_back(check_at_most("fit_band_hi", f.band_hi, c.thresholds.slope_band));
  add_charts(out, c, e);
  return out;
}

inline RunOutput run_dichotomy_mode(const RunConfig& c) {
  const DichotomyResult d =
      dichotomy_check(experiment_config(c), c.thresholds.dichotomy_bound, c.thresholds.dichotomy_max);
  RunOutput out;
  out.tables.push_back(dichotomy_table(d.records));
  out.summary = {{"main_term_float", d.main_term},
                 {"max_final", d.max_final},
                 {"max_last_hit", d.max_last_hit},
                 {"points", d.finals.size()}};
  out.checks.push_back(check_at_most("max_final", static_cast<double>(d.max_final),
                                     static_cast<double>(d.threshold)));
  return out;
}

}  // namespace run_detail

// Errors propagate as exceptions; a failed threshold check sets exit code 2.
inline RunOutput run(const RunConfig& c) {
  RunOutput out;
  switch (c.mode) {
    case Mode::Count:
    case Mode::Target:
      out = run_detail::run_count(c);
      break;
    case Mode::Measure:
      out = run_detail::run_measure(c);
      break;
    case Mode::Intersect:
      out = run_detail::run_intersect(c);
      break;
    case Mode::Mixing:
      out = run_detail::run_mixing(c);
      break;
    case Mode::Experiment:
      out = run_detail::run_experiment_mode(c);
      break;
    case Mode::Fit:
      out = run_detail::run_fit_mode(c);
      break;
    case Mode::Dichotomy:
      out = run_detail::run_dichotomy_mode(c);
      break;
  }
  out.mode = c.mode;
  for (const auto& k : out.checks) {
    if (!k.passed) out.exit_code = kExitThreshold;
  }
  return out;
}

inline Json checks_json(const std::vector<Check>& checks) {
  Json arr = Json::array();
  for (const auto& k : checks) {
    arr.push_back({{"name", k.name},
                   {"value", k.value},
                   {"relation", k.relation},
                   {"threshold", k.threshold},
                   {"passed", k.passed}});
  }
  return arr;
}

// Deterministic report: same config, same bytes.
inline Json report_json(const RunConfig& c, const RunOutput& out) {
  Json tables = Json::object();
  for (const auto& t : out.tables) tables[t.name] = t.json();
  return {{"schema_version", kReportSchemaVersion},
          {"contract_version", kContractVersion},
          {"mode", to_string(out.mode)},
          {"config_hash", config_hash(c)},
          {"summary", out.summary},
          {"checks", checks_json(out.checks)},
          {"exit_code", out.exit_code},
          {"tables", tables}};
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t raw = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&raw, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Timing {
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

// Writes report.json, the CSV tables (csv format), the charts and finally
// manifest.json listing them. Returns the artifact names.
inline std::vector<std::string> write_artifacts(const RunConfig& c, const RunOutput& out, const Timing& timing) {
  const std::filesystem::path dir(c.output.dir);
  std::filesystem::create_directories(dir);
  std::vector<std::string> artifacts;
  write_text(dir / "report.json", report_json(c, out).dump(2) + "\n");
  artifacts.push_back("report.json");
  if (c.output.format == "csv") {
    for (const auto& t : out.tables) {
      write_text(dir / (t.name + ".csv"), t.csv());
      artifacts.push_back(t.name + ".csv");
    }
  }
  for (const auto& [name, svg] : out.charts) {
    write_text(dir / name, svg);
    artifacts.push_back(name);
  }
  const double seconds = std::chrono::duration<double>(timing.finished - timing.started).count();
  Json manifest = {{"schema_version", kReportSchemaVersion},
                   {"contract_version", kContractVersion},
                   {"tool", "shrinkrec"},
                   {"tool_version", kVersion},
                   {"mode", to_string(out.mode)},
                   {"config_hash", config_hash(c)},
                   {"config", emit_config(c)},
                   {"started_at", utc_timestamp(timing.started)},
                   {"finished_at", utc_timestamp(timing.finished)},
                   {"elapsed_seconds", seconds},
                   {"exit_code", out.exit_code},
                   {"summary", out.summary},
                   {"checks", checks_json(out.checks)},
                   {"artifacts", artifacts}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  artifacts.push_back("manifest.json");
  return artifacts;
}

}  // namespace shrinkrec
