#pragma once

// Run configuration: JSON ingestion, validation, canonical form and hash.
// The accepted document is described in docs/config.md.

#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkrec/builtins.hpp"
#include "shrinkrec/harness.hpp"

namespace shrinkrec {

using Json = nlohmann::json;

enum class Mode { Count, Target, Measure, Intersect, Mixing, Experiment, Fit, Dichotomy };
enum class EventChoice { Recurrence, Target, Phi };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Count:
      return "count";
    case Mode::Target:
      return "target";
    case Mode::Measure:
      return "measure";
    case Mode::Intersect:
      return "intersect";
    case Mode::Mixing:
      return "mixing";
    case Mode::Experiment:
      return "experiment";
    case Mode::Fit:
      return "fit";
    case Mode::Dichotomy:
      return "dichotomy";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::Count, Mode::Target, Mode::Measure, Mode::Intersect, Mode::Mixing, Mode::Experiment,
                 Mode::Fit, Mode::Dichotomy}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

inline const char* to_string(EventChoice e) {
  switch (e) {
    case EventChoice::Recurrence:
      return "recurrence";
    case EventChoice::Target:
      return "target";
    case EventChoice::Phi:
      return "phi";
  }
  return "?";
}

inline const char* to_string(Metric m) { return m == Metric::Torus ? "torus" : "interval"; }

struct Thresholds {
  double relative_error = 0.05;
  Envelope envelope;
  double envelope_fraction = 0.95;
  double slope_band = 0.75;
  double dichotomy_bound = kDichotomyBound;
  std::uint64_t dichotomy_max = kDichotomyThreshold;
  double variance_factor = 10;
};

struct OutputSpec {
  std::string dir = "out";
  std::string format = "csv";  // csv | json
  bool svg = true;
};

struct ForcedStreams {
  std::vector<std::vector<std::uint8_t>> prefix;
  std::vector<std::vector<std::uint8_t>> cycle;
};

struct RunConfig {
  Mode mode = Mode::Count;
  Json map_doc;  // canonical map entry: built-in name or {"axes": ...}
  std::optional<MapSpec> map;
  RateFunction rate;
  bool has_rate = false;
  EventChoice event = EventChoice::Recurrence;
  std::uint64_t n_max = 0;
  bool geometric = true;
  std::uint64_t checkpoint_from = 1;
  std::vector<std::uint64_t> explicit_checkpoints;
  std::size_t samples = 1;
  std::uint64_t seed = 0;
  Metric metric = Metric::Interval;
  std::size_t refine_cap = kDefaultRefineCap;
  std::size_t budget = 0;  // 0: derived
  std::optional<TargetSpec> target;
  bool target_sampled = false;
  std::optional<ForcedStreams> point;
  unsigned n = 0;
  unsigned m = 0;
  std::optional<Rectangle> e_rect;
  std::vector<Rectangle> f_rects;
  std::uint64_t oracle_cap = kDefaultCylinderCap;
  unsigned oracle_depth = 16;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> variance_range;
  Thresholds thresholds;
  OutputSpec output;
  unsigned threads = 0;

  std::vector<std::uint64_t> checkpoints() const {
    return geometric ? geometric_checkpoints(n_max, checkpoint_from) : explicit_checkpoints;
  }
  bool counts_targets() const { return mode == Mode::Target || event == EventChoice::Target; }
};

// ---------------------------------------------------------------------------
// Field readers. Each records a problem under the key path instead of
// throwing, so that one pass reports everything.

namespace config_detail {

class Reader {
 public:
  std::vector<std::string> problems;

  void fail(const std::string& key, const std::string& msg) { problems.push_back(key + ": " + msg); }

  std::optional<Rational> rational(const Json& v, const std::string& key) {
    try {
      if (v.is_string()) return parse_rational(v.get<std::string>());
      if (v.is_number_integer()) return parse_rational(v.dump());
    } catch (const Error& e) {
      fail(key, e.what());
      return std::nullopt;
    }
    fail(key, "expected a rational string \"p/q\" or an integer");
    return std::nullopt;
  }

  std::optional<std::uint64_t> u64(const Json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      std::uint64_t out = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec == std::errc{} && ptr == s.data() + s.size() && !s.empty()) return out;
    }
    fail(key, "expected a non-negative integer");
    return std::nullopt;
  }

  std::optional<double> number(const Json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    fail(key, "expected a number");
    return std::nullopt;
  }

  std::optional<std::string> string(const Json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    fail(key, "expected a string");
    return std::nullopt;
  }

  std::optional<bool> boolean(const Json& v, const std::string& key) {
    if (v.is_boolean()) return v.get<bool>();
    fail(key, "expected true or false");
    return std::nullopt;
  }

  std::optional<RationalInterval> interval(const Json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 2) {
      fail(key, "expected [lo, hi]");
      return std::nullopt;
    }
    auto lo = rational(v[0], key + "[0]");
    auto hi = rational(v[1], key + "[1]");
    if (!lo || !hi) return std::nullopt;
    if (*hi < *lo) {
      fail(key, "lo must not exceed hi");
      return std::nullopt;
    }
    return RationalInterval{*lo, *hi};
  }

  std::optional<Rectangle> rectangle(const Json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) {
      fail(key, "expected a list of per-axis [lo, hi] intervals");
      return std::nullopt;
    }
    Rectangle r;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto iv = interval(v[i], key + "[" + std::to_string(i) + "]");
      if (iv) {
        r.push_back(*iv);
      } else {
        ok = false;
      }
    }
    return ok ? std::optional<Rectangle>(r) : std::nullopt;
  }
};

inline Json rational_json(const Rational& q) { return to_string(q); }

inline Json axis_json(const AxisMap& axis) {
  Json branches = Json::array();
  for (const auto& b : axis.branches()) {
    branches.push_back({{"left", rational_json(b.left)},
                        {"right", rational_json(b.right)},
                        {"slope", rational_json(b.slope)},
                        {"offset", rational_json(b.offset)}});
  }
  return branches;
}

inline Json map_axes_json(const MapSpec& map) {
  Json axes = Json::array();
  for (const auto& a : map.axes()) axes.push_back(axis_json(a));
  return Json{{"axes", axes}};
}

inline Json rate_json(const AxisRate& r) {
  Json j;
  switch (r.family()) {
    case RateFamily::Power:
      j = {{"family", "power"}, {"c", rational_json(r.c())}, {"p", rational_json(r.p())}};
      break;
    case RateFamily::PowerLog:
      j = {{"family", "power-log"},
           {"c", rational_json(r.c())},
           {"p", rational_json(r.p())},
           {"q", rational_json(r.q())}};
      break;
    case RateFamily::Constant:
      j = {{"family", "constant"}, {"c", rational_json(r.c())}};
      break;
    case RateFamily::Table: {
      Json values = Json::array();
      for (const auto& v : r.values()) values.push_back(rational_json(v));
      j = {{"family", "table"}, {"values", values}};
      break;
    }
  }
  return j;
}

// "power c=1/2 p=1", "power-log c=.. p=.. q=..", "constant c=..",
// "table v1 v2 ..." or "table values=v1,v2,...".
inline Json rate_string_to_json(const std::string& text, Reader& rd, const std::string& key) {
  std::istringstream in(text);
  std::string family;
  in >> family;
  Json j{{"family", family}};
  std::string token;
  Json values = Json::array();
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      if (family != "table") {
        rd.fail(key, "expected key=value, got '" + token + "'");
        return Json();
      }
      values.push_back(token);
      continue;
    }
    const std::string k = token.substr(0, eq), v = token.substr(eq + 1);
    if (k == "values") {
      std::istringstream parts(v);
      std::string part;
      while (std::getline(parts, part, ',')) values.push_back(part);
    } else {
      j[k] = v;
    }
  }
  if (family == "table") j["values"] = values;
  return j;
}

inline std::optional<AxisRate> rate_from_json(const Json& raw, Reader& rd, const std::string& key) {
  Json j = raw;
  if (raw.is_string()) j = rate_string_to_json(raw.get<std::string>(), rd, key);
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) {
    rd.fail(key, "expected a rate string such as \"power c=1/2 p=1\" or an object with \"family\"");
    return std::nullopt;
  }
  const std::string family = j["family"].get<std::string>();
  const std::size_t before = rd.problems.size();
  auto need = [&](const char* name) -> std::optional<Rational> {
    if (!j.contains(name)) {
      rd.fail(key + "." + name, "missing");
      return std::nullopt;
    }
    return rd.rational(j[name], key + "." + name);
  };
  auto known = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : j.items()) {
      bool ok = k == "family";
      for (const char* allowed : keys) ok = ok || k == allowed;
      if (!ok) rd.fail(key + "." + k, "unknown rate parameter for family '" + family + "'");
    }
  };
  try {
    if (family == "power") {
      known({"c", "p"});
      auto c = need("c"), p = need("p");
      if (c && p && rd.problems.size() == before) return AxisRate::power(*c, *p);
    } else if (family == "power-log") {
      known({"c", "p", "q"});
      auto c = need("c"), p = need("p"), q = need("q");
      if (c && p && q && rd.problems.size() == before) return AxisRate::power_log(*c, *p, *q);
    } else if (family == "constant") {
      known({"c"});
      auto c = need("c");
      if (c && rd.problems.size() == before) return AxisRate::constant(*c);
    } else if (family == "table") {
      known({"values"});
      if (!j.contains("values") || !j["values"].is_array()) {
        rd.fail(key + ".values", "expected a list of rationals");
        return std::nullopt;
      }
      std::vector<Rational> values;
      for (std::size_t i = 0; i < j["values"].size(); ++i) {
        auto v = rd.rational(j["values"][i], key + ".values[" + std::to_string(i) + "]");
        if (v) values.push_back(*v);
      }
      if (rd.problems.size() == before) return AxisRate::table(std::move(values));
    } else {
      rd.fail(key + ".family", "unknown rate family '" + family + "' (power, power-log, constant, table)");
    }
  } catch (const ValidationError& e) {
    for (const auto& p : e.problems()) rd.fail(key, p);
  }
  return std::nullopt;
}

inline std::optional<MapSpec> map_from_json(const Json& j, Reader& rd, Json& canonical) {
  if (j.is_string()) {
    try {
      MapSpec m = builtin_map(j.get<std::string>());
      canonical = m.name();
      return m;
    } catch (const Error& e) {
      rd.fail("map", e.what());
      return std::nullopt;
    }
  }
  if (!j.is_object() || !j.contains("axes") || !j["axes"].is_array() || j["axes"].empty()) {
    rd.fail("map", "expected a built-in name or {\"axes\": [[branch, ...], ...]}");
    return std::nullopt;
  }
  std::vector<AxisMap> axes;
  bool ok = true;
  for (std::size_t i = 0; i < j["axes"].size(); ++i) {
    const std::string key = "map.axes[" + std::to_string(i) + "]";
    const Json& list = j["axes"][i];
    if (!list.is_array()) {
      rd.fail(key, "expected a list of branches");
      ok = false;
      continue;
    }
    std::vector<BranchSpec1D> branches;
    for (std::size_t s = 0; s < list.size(); ++s) {
      const std::string bkey = key + "[" + std::to_string(s) + "]";
      const Json& b = list[s];
      if (!b.is_object()) {
        rd.fail(bkey, "expected {left, right, slope, offset}");
        ok = false;
        continue;
      }
      BranchSpec1D spec;
      bool have = true;
      for (auto [name, field] : {std::pair{"left", &spec.left}, std::pair{"right", &spec.right},
                                 std::pair{"slope", &spec.slope}, std::pair{"offset", &spec.offset}}) {
        if (!b.contains(name)) {
          rd.fail(bkey + "." + name, "missing");
          have = false;
          continue;
        }
        auto v = rd.rational(b[name], bkey + "." + name);
        if (v) {
          *field = *v;
        } else {
          have = false;
        }
      }
      if (have) {
        branches.push_back(spec);
      } else {
        ok = false;
      }
    }
    if (!ok) continue;
    for (const auto& p : validate_branches(branches)) {
      rd.fail(key, p);
      ok = false;
    }
    if (ok) {
      try {
        axes.emplace_back(branches);
      } catch (const ValidationError& e) {
        for (const auto& p : e.problems()) rd.fail(key, p);
        ok = false;
      }
    }
  }
  if (!ok) return std::nullopt;
  MapSpec m(std::move(axes), "custom");
  canonical = map_axes_json(m);
  return m;
}

inline std::optional<std::vector<std::vector<std::uint8_t>>> streams(const Json& j, Reader& rd,
                                                                     const std::string& key, std::size_t d) {
  if (!j.is_array()) {
    rd.fail(key, "expected a list of symbols, or one list per axis");
    return std::nullopt;
  }
  Json nested = j;
  if (d == 1 && (j.empty() || !j[0].is_array())) nested = Json::array({j});
  if (nested.size() != d) {
    rd.fail(key, "expected one symbol list per axis");
    return std::nullopt;
  }
  std::vector<std::vector<std::uint8_t>> out;
  for (std::size_t i = 0; i < d; ++i) {
    if (!nested[i].is_array()) {
      rd.fail(key, "expected one symbol list per axis");
      return std::nullopt;
    }
    std::vector<std::uint8_t> axis;
    for (const auto& s : nested[i]) {
      if (!s.is_number_unsigned() || s.get<std::uint64_t>() >= kMaxBranches) {
        rd.fail(key, "symbols must be branch indices");
        return std::nullopt;
      }
      axis.push_back(static_cast<std::uint8_t>(s.get<std::uint64_t>()));
    }
    out.push_back(std::move(axis));
  }
  return out;
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "mode",        "map",      "rate",       "event",  "n_max",   "checkpoints", "checkpoint_from",
      "samples",     "seed",     "metric",     "inequality", "refine_cap", "budget", "target",
      "point",       "n",        "m",          "E",      "F",       "oracle",      "variance",
      "thresholds",  "output",   "threads"};
  return keys;
}

}  // namespace config_detail

// Validates a config document; throws ValidationError listing every problem,
// each prefixed by its key.
inline RunConfig parse_config(const Json& doc, std::optional<Mode> mode_override = std::nullopt) {
  using config_detail::Reader;
  Reader rd;
  RunConfig c;
  if (!doc.is_object()) throw ValidationError({"<root>: expected a JSON object"});
  for (const auto& [k, v] : doc.items()) {
    const auto& keys = config_detail::known_keys();
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) rd.fail(k, "unknown key");
  }

  if (mode_override) {
    c.mode = *mode_override;
  } else if (doc.contains("mode")) {
    auto s = rd.string(doc["mode"], "mode");
    if (s) {
      auto m = parse_mode(*s);
      if (m) {
        c.mode = *m;
      } else {
        rd.fail("mode", "unknown mode '" + *s + "'");
      }
    }
  } else {
    rd.fail("mode", "missing (or pass a subcommand)");
  }

  if (!doc.contains("map")) {
    rd.fail("map", "missing");
  } else {
    c.map = config_detail::map_from_json(doc["map"], rd, c.map_doc);
  }
  const std::size_t d = c.map ? c.map->dimension() : 0;

  if (doc.contains("rate")) {
    const Json& r = doc["rate"];
    std::vector<AxisRate> axes;
    bool ok = true;
    if (r.is_array()) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        auto a = config_detail::rate_from_json(r[i], rd, "rate[" + std::to_string(i) + "]");
        if (a) {
          axes.push_back(*a);
        } else {
          ok = false;
        }
      }
      if (ok && c.map && axes.size() != d) {
        rd.fail("rate", "has " + std::to_string(axes.size()) + " axes but the map has dimension " +
                            std::to_string(d));
        ok = false;
      }
    } else {
      auto a = config_detail::rate_from_json(r, rd, "rate");
      if (a) {
        axes.assign(std::max<std::size_t>(d, 1), *a);
      } else {
        ok = false;
      }
    }
    if (ok && !axes.empty()) {
      c.rate = RateFunction(std::move(axes));
      c.has_rate = true;
    }
  }

  if (doc.contains("event")) {
    auto s = rd.string(doc["event"], "event");
    if (s) {
      if (*s == "recurrence") {
        c.event = EventChoice::Recurrence;
      } else if (*s == "target") {
        c.event = EventChoice::Target;
      } else if (*s == "phi") {
        c.event = EventChoice::Phi;
      } else {
        rd.fail("event", "expected recurrence, target or phi");
      }
    }
  }
  if (c.mode == Mode::Target) c.event = EventChoice::Target;

  if (doc.contains("n_max")) {
    if (auto v = rd.u64(doc["n_max"], "n_max")) c.n_max = *v;
  }
  if (doc.contains("checkpoints")) {
    const Json& cp = doc["checkpoints"];
    if (cp.is_string() && cp.get<std::string>() == "geometric") {
      c.geometric = true;
    } else if (cp.is_array()) {
      c.geometric = false;
      for (std::size_t i = 0; i < cp.size(); ++i) {
        if (auto v = rd.u64(cp[i], "checkpoints[" + std::to_string(i) + "]")) c.explicit_checkpoints.push_back(*v);
      }
      try {
        validate_checkpoints(c.explicit_checkpoints);
        if (c.n_max == 0) c.n_max = c.explicit_checkpoints.back();
        if (c.n_max != c.explicit_checkpoints.back()) rd.fail("checkpoints", "last checkpoint must equal n_max");
      } catch (const Error& e) {
        rd.fail("checkpoints", e.what());
      }
    } else {
      rd.fail("checkpoints", "expected \"geometric\" or a list of integers");
    }
  }
  if (doc.contains("checkpoint_from")) {
    if (auto v = rd.u64(doc["checkpoint_from"], "checkpoint_from")) {
      c.checkpoint_from = *v;
      if (*v == 0) rd.fail("checkpoint_from", "must be >= 1");
    }
  }
  if (doc.contains("samples")) {
    if (auto v = rd.u64(doc["samples"], "samples")) c.samples = *v;
  }
  if (doc.contains("seed")) {
    if (auto v = rd.u64(doc["seed"], "seed")) c.seed = *v;
  }
  if (doc.contains("metric")) {
    auto s = rd.string(doc["metric"], "metric");
    if (s && *s == "torus") {
      c.metric = Metric::Torus;
    } else if (s && *s != "interval") {
      rd.fail("metric", "expected interval or torus");
    }
  }
  if (doc.contains("inequality")) {
    auto s = rd.string(doc["inequality"], "inequality");
    if (s && *s != "strict") rd.fail("inequality", "only \"strict\" is supported");
  }
  if (doc.contains("refine_cap")) {
    if (auto v = rd.u64(doc["refine_cap"], "refine_cap")) c.refine_cap = *v;
  }
  if (doc.contains("budget")) {
    if (auto v = rd.u64(doc["budget"], "budget")) c.budget = *v;
  }
  if (doc.contains("target")) {
    const Json& t = doc["target"];
    if (!t.is_object() || !t.contains("center")) {
      rd.fail("target", "expected {\"center\": [x0_1, ...]} or {\"center\": \"sampled\"}");
    } else if (t["center"].is_string() && t["center"].get<std::string>() == "sampled") {
      c.target_sampled = true;
    } else if (t["center"].is_array()) {
      TargetSpec spec;
      bool ok = true;
      for (std::size_t i = 0; i < t["center"].size(); ++i) {
        auto v = rd.rational(t["center"][i], "target.center[" + std::to_string(i) + "]");
        if (v) {
          spec.center.push_back(*v);
        } else {
          ok = false;
        }
      }
      if (ok && c.map) {
        try {
          spec.validate(d);
          c.target = spec;
        } catch (const Error& e) {
          rd.fail("target.center", e.what());
        }
      }
    } else {
      rd.fail("target.center", "expected a list of rationals or \"sampled\"");
    }
  }
  if (doc.contains("point") && c.map) {
    const Json& p = doc["point"];
    if (!p.is_object() || !p.contains("cycle")) {
      rd.fail("point", "expected {\"prefix\": [...], \"cycle\": [...]}");
    } else {
      ForcedStreams f;
      auto cyc = config_detail::streams(p["cycle"], rd, "point.cycle", d);
      auto pre = p.contains("prefix") ? config_detail::streams(p["prefix"], rd, "point.prefix", d)
                                      : std::optional(std::vector<std::vector<std::uint8_t>>(d));
      if (cyc && pre) {
        f.prefix = *pre;
        f.cycle = *cyc;
        bool ok = true;
        for (std::size_t i = 0; i < d; ++i) {
          if (f.cycle[i].empty()) {
            rd.fail("point.cycle", "cycles must be non-empty");
            ok = false;
          }
          for (auto s : f.prefix[i]) ok = ok && s < c.map->axis(i).branch_count();
          for (auto s : f.cycle[i]) ok = ok && s < c.map->axis(i).branch_count();
        }
        if (ok) {
          c.point = f;
        } else {
          rd.fail("point", "symbol out of range for the map");
        }
      }
    }
  }
  if (doc.contains("n")) {
    if (auto v = rd.u64(doc["n"], "n")) c.n = static_cast<unsigned>(*v);
  }
  if (doc.contains("m")) {
    if (auto v = rd.u64(doc["m"], "m")) c.m = static_cast<unsigned>(*v);
  }
  if (doc.contains("E")) c.e_rect = rd.rectangle(doc["E"], "E");
  if (doc.contains("F")) {
    const Json& f = doc["F"];
    if (!f.is_array() || f.empty()) {
      rd.fail("F", "expected a list of rectangles");
    } else {
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (auto r = rd.rectangle(f[i], "F[" + std::to_string(i) + "]")) c.f_rects.push_back(*r);
      }
    }
  }
  if (doc.contains("oracle")) {
    const Json& o = doc["oracle"];
    if (!o.is_object()) {
      rd.fail("oracle", "expected {\"cap\": ..., \"depth\": ...}");
    } else {
      for (const auto& [k, v] : o.items()) {
        if (k == "cap") {
          if (auto x = rd.u64(v, "oracle.cap")) c.oracle_cap = *x;
        } else if (k == "depth") {
          if (auto x = rd.u64(v, "oracle.depth")) c.oracle_depth = static_cast<unsigned>(*x);
        } else {
          rd.fail("oracle." + k, "unknown key");
        }
      }
    }
  }
  if (doc.contains("variance")) {
    const Json& v = doc["variance"];
    if (!v.is_object() || !v.contains("a") || !v.contains("b")) {
      rd.fail("variance", "expected {\"a\": ..., \"b\": ...}");
    } else {
      auto a = rd.u64(v["a"], "variance.a"), b = rd.u64(v["b"], "variance.b");
      if (a && b) {
        if (*a == 0 || *a >= *b) {
          rd.fail("variance", "need 1 <= a < b");
        } else {
          c.variance_range = std::make_pair(*a, *b);
        }
      }
    }
  }
  if (doc.contains("thresholds")) {
    const Json& t = doc["thresholds"];
    if (!t.is_object()) {
      rd.fail("thresholds", "expected an object");
    } else {
      for (const auto& [k, v] : t.items()) {
        const std::string key = "thresholds." + k;
        if (k == "dichotomy_max") {
          if (auto x = rd.u64(v, key)) c.thresholds.dichotomy_max = *x;
          continue;
        }
        auto x = rd.number(v, key);
        if (!x) continue;
        if (k == "relative_error") {
          c.thresholds.relative_error = *x;
        } else if (k == "envelope_scale") {
          c.thresholds.envelope.scale = *x;
        } else if (k == "envelope_power") {
          c.thresholds.envelope.power = *x;
        } else if (k == "envelope_offset") {
          c.thresholds.envelope.offset = *x;
        } else if (k == "envelope_fraction") {
          c.thresholds.envelope_fraction = *x;
        } else if (k == "slope_band") {
          c.thresholds.slope_band = *x;
        } else if (k == "dichotomy_bound") {
          c.thresholds.dichotomy_bound = *x;
        } else if (k == "variance_factor") {
          c.thresholds.variance_factor = *x;
        } else {
          rd.fail(key, "unknown threshold");
        }
      }
    }
  }
  if (doc.contains("output")) {
    const Json& o = doc["output"];
    if (!o.is_object()) {
      rd.fail("output", "expected an object");
    } else {
      for (const auto& [k, v] : o.items()) {
        if (k == "dir") {
          if (auto s = rd.string(v, "output.dir")) c.output.dir = *s;
        } else if (k == "format") {
          if (auto s = rd.string(v, "output.format")) {
            if (*s != "csv" && *s != "json") rd.fail("output.format", "expected csv or json");
            c.output.format = *s;
          }
        } else if (k == "svg") {
          if (auto b = rd.boolean(v, "output.svg")) c.output.svg = *b;
        } else {
          rd.fail("output." + k, "unknown key");
        }
      }
    }
  }
  if (doc.contains("threads")) {
    if (auto v = rd.u64(doc["threads"], "threads")) c.threads = static_cast<unsigned>(*v);
  }

  // Mode-specific requirements.
  const bool counting = c.mode == Mode::Count || c.mode == Mode::Target || c.mode == Mode::Experiment ||
                        c.mode == Mode::Fit || c.mode == Mode::Dichotomy;
  const bool statistical = c.mode == Mode::Experiment || c.mode == Mode::Fit || c.mode == Mode::Dichotomy;
  if ((counting || c.mode == Mode::Measure || c.mode == Mode::Intersect) && !doc.contains("rate")) {
    rd.fail("rate", "missing");
  }
  if (c.has_rate && c.map && c.rate.dimension() != d) rd.fail("rate", "dimension does not match map");
  if (counting) {
    if (c.n_max == 0) rd.fail("n_max", "missing or zero");
    if (c.geometric && c.checkpoint_from > c.n_max && c.n_max > 0) {
      rd.fail("checkpoint_from", "exceeds n_max");
    }
    if (c.samples == 0 && !statistical) rd.fail("samples", "must be >= 1");
    if (statistical && c.samples < 2) rd.fail("samples", "S must be >= 2");
    if (c.counts_targets() && !c.target && !c.target_sampled) rd.fail("target", "missing for shrinking targets");
    if (c.point && statistical) rd.fail("point", "forced points are only allowed in count and target modes");
    if (c.event == EventChoice::Phi) rd.fail("event", "phi is only meaningful in measure mode");
    if (c.target_sampled && c.mode != Mode::Experiment && c.mode != Mode::Fit) {
      rd.fail("target.center", "\"sampled\" is only allowed in experiment and fit modes");
    }
  }
  if (c.mode == Mode::Measure || c.mode == Mode::Intersect || c.mode == Mode::Mixing) {
    if (c.n == 0) rd.fail("n", "missing or zero");
    if (c.metric == Metric::Torus) rd.fail("metric", "the exact oracle supports the interval metric only");
  }
  if ((c.mode == Mode::Measure || c.mode == Mode::Intersect) && c.event == EventChoice::Target && !c.target) {
    rd.fail("target", "missing for target events");
  }
  if (c.mode == Mode::Intersect) {
    if (c.m == 0) rd.fail("m", "missing or zero");
    if (c.m >= c.n && c.n > 0) rd.fail("m", "must be smaller than n");
    if (c.event == EventChoice::Phi) rd.fail("event", "intersections take recurrence or target events");
  }
  if (c.mode == Mode::Mixing) {
    if (!c.e_rect) rd.fail("E", "missing");
    if (c.f_rects.empty()) rd.fail("F", "missing");
    if (c.map) {
      if (c.e_rect && c.e_rect->size() != d) rd.fail("E", "dimension does not match map");
      for (std::size_t i = 0; i < c.f_rects.size(); ++i) {
        if (c.f_rects[i].size() != d) rd.fail("F[" + std::to_string(i) + "]", "dimension does not match map");
      }
    }
  }
  if (c.variance_range) {
    if (c.variance_range->second > c.n_max) rd.fail("variance.b", "exceeds n_max");
    if (c.mode != Mode::Experiment) rd.fail("variance", "only used in experiment mode");
    if (c.counts_targets()) rd.fail("variance", "the statistic is defined for recurrence events only");
  }

  // Precision budget, checked before any run starts.
  if (rd.problems.empty() && counting && c.map && c.has_rate) {
    PredicateOptions po{c.metric, c.refine_cap, false};
    const OrbitProbe probe(*c.map, po);
    const std::size_t budget = c.budget ? c.budget : precision_budget(*c.map, c.rate, c.n_max);
    const std::size_t need = c.n_max + lookahead(probe);
    if (need > budget) {
      rd.fail("n_max", "needs " + std::to_string(need) + " symbols per axis but the precision budget is " +
                           std::to_string(budget));
    }
  }
  if (!rd.problems.empty()) throw ValidationError(rd.problems);
  return c;
}

inline RunConfig parse_config_text(const std::string& text, std::optional<Mode> mode_override = std::nullopt) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc, mode_override);
}

inline RunConfig load_config(const std::string& path, std::optional<Mode> mode_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), mode_override);
}

// Canonical document: every default made explicit, rationals canonical.
// parse_config(emit_config(c)) reproduces c.
inline Json emit_config(const RunConfig& c) {
  using config_detail::rational_json;
  Json j;
  j["mode"] = to_string(c.mode);
  j["map"] = c.map_doc;
  if (c.has_rate) {
    Json r = Json::array();
    for (const auto& a : c.rate.axes()) r.push_back(config_detail::rate_json(a));
    j["rate"] = r;
  }
  j["event"] = to_string(c.event);
  j["n_max"] = c.n_max;
  if (c.geometric) {
    j["checkpoints"] = "geometric";
    j["checkpoint_from"] = c.checkpoint_from;
  } else {
    j["checkpoints"] = c.explicit_checkpoints;
  }
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["metric"] = to_string(c.metric);
  j["inequality"] = "strict";
  j["refine_cap"] = c.refine_cap;
  if (c.budget) j["budget"] = c.budget;
  if (c.target_sampled) {
    j["target"] = {{"center", "sampled"}};
  } else if (c.target) {
    Json center = Json::array();
    for (const auto& x : c.target->center) center.push_back(rational_json(x));
    j["target"] = {{"center", center}};
  }
  if (c.point) j["point"] = {{"prefix", c.point->prefix}, {"cycle", c.point->cycle}};
  j["n"] = c.n;
  j["m"] = c.m;
  auto rect = [](const Rectangle& r) {
    Json out = Json::array();
    for (const auto& iv : r) out.push_back({rational_json(iv.lo), rational_json(iv.hi)});
    return out;
  };
  if (c.e_rect) j["E"] = rect(*c.e_rect);
  if (!c.f_rects.empty()) {
    Json f = Json::array();
    for (const auto& r : c.f_rects) f.push_back(rect(r));
    j["F"] = f;
  }
  j["oracle"] = {{"cap", c.oracle_cap}, {"depth", c.oracle_depth}};
  if (c.variance_range) j["variance"] = {{"a", c.variance_range->first}, {"b", c.variance_range->second}};
  j["thresholds"] = {{"relative_error", c.thresholds.relative_error},
                     {"envelope_scale", c.thresholds.envelope.scale},
                     {"envelope_power", c.thresholds.envelope.power},
                     {"envelope_offset", c.thresholds.envelope.offset},
                     {"envelope_fraction", c.thresholds.envelope_fraction},
                     {"slope_band", c.thresholds.slope_band},
                     {"dichotomy_bound", c.thresholds.dichotomy_bound},
                     {"dichotomy_max", c.thresholds.dichotomy_max},
                     {"variance_factor", c.thresholds.variance_factor}};
  j["output"] = {{"dir", c.output.dir}, {"format", c.output.format}, {"svg", c.output.svg}};
  if (c.threads) j["threads"] = c.threads;
  return j;
}

// The part of the canonical document that determines results: maps are
// expanded to branch lists; output location, format and thread count are
// dropped.
inline Json semantic_config(const RunConfig& c) {
  Json j = emit_config(c);
  if (c.map) j["map"] = config_detail::map_axes_json(*c.map);
  j.erase("output");
  j.erase("threads");
  return j;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string config_hash(const RunConfig& c) { return sha256_hex(semantic_config(c).dump()); }

}  // namespace shrinkrec
