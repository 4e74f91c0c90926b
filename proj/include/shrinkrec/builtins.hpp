#pragma once

// Named maps: "doubling", "tent", "base-b", "luroth-trunc-K",
// "toral-diag(a_1,...,a_d)".

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "shrinkrec/maps.hpp"

namespace shrinkrec {

inline AxisMap base_axis(unsigned b) {
  if (b < 2 || b > kMaxBranches) throw InvalidArgument("base must be in [2, 256]");
  std::vector<BranchSpec1D> branches;
  for (unsigned s = 0; s < b; ++s) {
    branches.push_back({ratio(s, b), ratio(s + 1, b), Rational(b), Rational(s)});
  }
  return AxisMap(std::move(branches));
}

inline AxisMap tent_axis() {
  return AxisMap({{Rational(0), ratio(1, 2), Rational(2), Rational(0)},
                  {ratio(1, 2), Rational(1), Rational(-2), Rational(-2)}});
}

// Lüroth branches [1/(n+1), 1/n) for n < K, with the tail [0, 1/K) folded
// into a single branch x -> Kx. An approximation of the Lüroth map that
// keeps finitely many full branches.
inline AxisMap luroth_axis(unsigned k) {
  if (k < 2 || k > kMaxBranches) throw InvalidArgument("luroth truncation must be in [2, 256]");
  std::vector<BranchSpec1D> branches;
  branches.push_back({Rational(0), ratio(1, k), Rational(k), Rational(0)});
  for (unsigned n = k - 1; n >= 1; --n) {
    branches.push_back({ratio(1, n + 1), ratio(1, n), Rational(n * (n + 1)), Rational(n)});
  }
  return AxisMap(std::move(branches));
}

namespace detail {

inline unsigned parse_unsigned(std::string_view s, std::string_view what) {
  unsigned v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline MapSpec builtin_map(std::string_view name) {
  if (name == "doubling") return MapSpec({base_axis(2)}, "doubling");
  if (name == "tent") return MapSpec({tent_axis()}, "tent");
  if (name.starts_with("base-")) {
    const unsigned b = detail::parse_unsigned(name.substr(5), "base");
    return MapSpec({base_axis(b)}, "base-" + std::to_string(b));
  }
  if (name.starts_with("luroth-trunc-")) {
    const unsigned k = detail::parse_unsigned(name.substr(13), "luroth truncation");
    return MapSpec({luroth_axis(k)}, "luroth-trunc-" + std::to_string(k));
  }
  if (name.starts_with("toral-diag(") && name.ends_with(")")) {
    std::string_view args = name.substr(11, name.size() - 12);
    std::vector<AxisMap> axes;
    std::string canonical = "toral-diag(";
    while (true) {
      const auto comma = args.find(',');
      const auto token = args.substr(0, comma);
      const unsigned a = detail::parse_unsigned(token, "toral-diag factor");
      axes.push_back(base_axis(a));
      canonical += std::to_string(a);
      if (comma == std::string_view::npos) break;
      canonical += ",";
      args.remove_prefix(comma + 1);
    }
    canonical += ")";
    return MapSpec(std::move(axes), canonical);
  }
  throw ParseError("unknown built-in map '" + std::string(name) + "'");
}

}  // namespace shrinkrec
