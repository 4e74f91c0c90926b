// Command-line front end: one subcommand per run mode, all driven by a JSON
// config whose keys are documented in docs/config.md.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "shrinkrec/shrinkrec.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::string> format;
  bool no_svg = false;
  bool quiet = false;
};

shrinkrec::Json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw shrinkrec::Error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return shrinkrec::Json::parse(buf.str());
  } catch (const shrinkrec::Json::parse_error& e) {
    throw shrinkrec::ParseError(std::string("config is not valid JSON: ") + e.what());
  }
}

// Command-line flags override the document before validation, so they are
// checked and hashed like any other field.
void apply_overrides(shrinkrec::Json& doc, const Flags& f) {
  if (!doc.is_object()) return;
  if (f.seed) doc["seed"] = *f.seed;
  if (f.threads) doc["threads"] = *f.threads;
  if (f.out || f.format || f.no_svg) {
    if (!doc.contains("output") || !doc["output"].is_object()) doc["output"] = shrinkrec::Json::object();
    if (f.out) doc["output"]["dir"] = *f.out;
    if (f.format) doc["output"]["format"] = *f.format;
    if (f.no_svg) doc["output"]["svg"] = false;
  }
}

int execute(shrinkrec::Mode mode, const Flags& flags) {
  using namespace shrinkrec;
  try {
    Json doc = read_document(flags.config);
    apply_overrides(doc, flags);
    const RunConfig config = parse_config(doc, mode);
    Timing timing;
    timing.started = std::chrono::system_clock::now();
    const RunOutput out = run(config);
    timing.finished = std::chrono::system_clock::now();
    write_artifacts(config, out, timing);
    if (!flags.quiet) {
      if (config.output.format == "json") {
        std::cout << report_json(config, out).dump(2) << '\n';
      } else {
        std::cout << out.tables.front().csv();
      }
    }
    for (const auto& k : out.checks) {
      std::cerr << (k.passed ? "PASS " : "FAIL ") << k.name << ' ' << format_double(k.value) << ' ' << k.relation
                << ' ' << format_double(k.threshold) << '\n';
    }
    return out.exit_code;
  } catch (const ValidationError& e) {
    std::cerr << "invalid config:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrence and shrinking-target counting for piecewise-linear full-branch maps"};
  app.set_version_flag("--version", std::string(shrinkrec::kVersion));
  app.require_subcommand(1);
  Flags flags;
  std::uint64_t seed = 0;
  std::string out, format;
  unsigned threads = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"count", "R(x,N) for sampled or forced points"},
      {"target", "W(x,N) for sampled or forced points"},
      {"measure", "exact measure of A_n, B_n pullbacks, or Phi(N)"},
      {"intersect", "exact measure of the intersection of the events at m and n"},
      {"mixing", "exact mixing deficit of rectangles"},
      {"experiment", "Monte Carlo check of the counting asymptotic"},
      {"fit", "error exponent fit with bootstrap band"},
      {"dichotomy", "convergence-case check on final counts"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", flags.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out,-o", out, "output directory (overrides the config)");
    sub->add_option("--threads,-j", threads, "worker threads; default from SHRINKREC_THREADS or the CPU count");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--no-svg", flags.no_svg, "skip SVG charts");
    sub->add_flag("--quiet,-q", flags.quiet, "do not print the primary table");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : shrinkrec::kExitError;
  }
  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) flags.seed = seed;
  if (chosen->count("--out")) flags.out = out;
  if (chosen->count("--threads")) flags.threads = threads;
  if (chosen->count("--format")) flags.format = format;
  return execute(*shrinkrec::parse_mode(chosen->get_name()), flags);
}
