#pragma once

// Expanding full-branch piecewise-linear maps on [0,1]^d (products of 1-d
// maps) and the algebra of their cylinder sets.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shrinkrec/error.hpp"
#include "shrinkrec/rational.hpp"

namespace shrinkrec {

inline constexpr std::uint64_t kDefaultCylinderCap = std::uint64_t{1} << 24;
inline constexpr std::size_t kMaxBranches = 256;

// x -> slope*x - offset on [left, right).
struct BranchSpec1D {
  Rational left;
  Rational right;
  Rational slope;
  Rational offset;

  Rational length() const { return right - left; }
  Rational apply(const Rational& x) const { return slope * x - offset; }
  // Inverse branch [0,1] -> [left,right].
  Rational inverse(const Rational& y) const { return (y + offset) / slope; }

  friend bool operator==(const BranchSpec1D&, const BranchSpec1D&) = default;
};

// Problems with a branch list, one message per defect; empty when valid.
inline std::vector<std::string> validate_branches(const std::vector<BranchSpec1D>& branches) {
  std::vector<std::string> problems;
  if (branches.empty()) {
    problems.emplace_back("axis has no branches");
    return problems;
  }
  if (branches.size() > kMaxBranches) {
    problems.emplace_back("more than " + std::to_string(kMaxBranches) + " branches");
  }
  Rational expected_left = 0;
  for (std::size_t s = 0; s < branches.size(); ++s) {
    const auto& b = branches[s];
    const std::string where = "branch " + std::to_string(s) + ": ";
    if (b.left != expected_left) {
      problems.push_back(where + "domains must tile [0,1) in order (left = " + to_string(b.left) +
                         ", expected " + to_string(expected_left) + ")");
    }
    if (!(b.left < b.right)) {
      problems.push_back(where + "empty domain [" + to_string(b.left) + "," + to_string(b.right) + ")");
    } else if (rational_abs(b.slope) * b.length() != 1) {
      problems.push_back(where + "branch image ≠ [0,1] (|slope|·length = " +
                         to_string(rational_abs(b.slope) * b.length()) + ")");
    } else {
      const Rational start = b.apply(b.left);
      const Rational expected = b.slope > 0 ? Rational(0) : Rational(1);
      if (start != expected) {
        problems.push_back(where + "branch image ≠ [0,1] (image of left endpoint is " + to_string(start) +
                           ")");
      }
    }
    expected_left = b.right;
  }
  if (expected_left != 1) {
    problems.push_back("domains end at " + to_string(expected_left) + " instead of 1");
  }
  return problems;
}

// One coordinate of the map.
class AxisMap {
 public:
  explicit AxisMap(std::vector<BranchSpec1D> branches) : branches_(std::move(branches)) {
    auto problems = validate_branches(branches_);
    if (!problems.empty()) throw ValidationError(std::move(problems));
    lambda_ = rational_abs(branches_.front().slope);
    for (const auto& b : branches_) lambda_ = std::min(lambda_, rational_abs(b.slope));
    if (!(lambda_ > 1)) throw ValidationError({"lambda must be > 1 (map is not expanding)"});

    // The standard base-b map: every slope equals the same integer b.
    const Rational& s0 = branches_.front().slope;
    bool uniform = is_integer(s0) && s0 > 1 && s0 == static_cast<long>(branches_.size());
    for (const auto& b : branches_) uniform = uniform && b.slope == s0;
    if (uniform) digit_base_ = static_cast<unsigned>(branches_.size());
  }

  std::size_t branch_count() const { return branches_.size(); }
  const std::vector<BranchSpec1D>& branches() const { return branches_; }
  const BranchSpec1D& branch(std::size_t s) const { return branches_[s]; }
  const Rational& lambda() const { return lambda_; }

  // Nonzero exactly when this axis is x -> b*x mod 1.
  unsigned digit_base() const { return digit_base_; }

  // Half-open domains; x = 1 belongs to the last branch.
  std::size_t branch_of(const Rational& x) const {
    if (x >= 1) return branches_.size() - 1;
    std::size_t lo = 0, hi = branches_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi + 1) / 2;
      if (branches_[mid].left <= x) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    return lo;
  }

  Rational apply(const Rational& x) const { return branches_[branch_of(x)].apply(x); }

  friend bool operator==(const AxisMap& a, const AxisMap& b) { return a.branches_ == b.branches_; }

 private:
  std::vector<BranchSpec1D> branches_;
  Rational lambda_;
  unsigned digit_base_ = 0;
};

using Point = std::vector<Rational>;

class MapSpec {
 public:
  MapSpec(std::vector<AxisMap> axes, std::string name = {}) : axes_(std::move(axes)), name_(std::move(name)) {
    if (axes_.empty()) throw ValidationError({"map must have dimension >= 1"});
    lambda_ = axes_.front().lambda();
    for (const auto& a : axes_) lambda_ = std::min(lambda_, a.lambda());
  }

  std::size_t dimension() const { return axes_.size(); }
  const AxisMap& axis(std::size_t i) const { return axes_[i]; }
  const std::vector<AxisMap>& axes() const { return axes_; }
  const Rational& lambda() const { return lambda_; }
  const std::string& name() const { return name_; }

  friend bool operator==(const MapSpec& a, const MapSpec& b) { return a.axes_ == b.axes_; }

 private:
  std::vector<AxisMap> axes_;
  Rational lambda_;
  std::string name_;
};

inline Point eval_map(const MapSpec& map, const Point& x) {
  if (x.size() != map.dimension()) throw InvalidArgument("point dimension does not match map");
  Point out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0 || x[i] > 1) throw InvalidArgument("point outside [0,1]^d");
    out[i] = map.axis(i).apply(x[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cylinders

// T^m x = slope*x - offset on the cylinder; [left, right] is its closure.
struct AxisCylinder {
  std::uint64_t index = 0;  // itinerary read as a base-(branch count) number, first symbol most significant
  Rational left;
  Rational right;
  Rational slope;
  Rational offset;

  Rational length() const { return right - left; }
};

struct Cylinder {
  unsigned depth = 0;
  std::vector<AxisCylinder> axes;

  Rational measure() const {
    Rational v = 1;
    for (const auto& a : axes) v *= a.length();
    return v;
  }
};

// (K, z) of T^m on the cylinder with itinerary `word` (orbit order).
struct Affine {
  Rational slope = 1;
  Rational offset = 0;

  // Append one more step through branch b.
  void then(const BranchSpec1D& b) {
    slope *= b.slope;
    offset = b.slope * offset + b.offset;
  }

  // Closure of {x : 0 <= slope*x - offset <= 1}.
  RationalInterval domain() const {
    Rational a = offset / slope;
    Rational b = (offset + 1) / slope;
    if (b < a) std::swap(a, b);
    return {a, b};
  }
};

inline Affine compose_word(const AxisMap& axis, std::span<const std::uint8_t> word) {
  Affine f;
  for (auto s : word) f.then(axis.branch(s));
  return f;
}

// Number of depth-m cylinders of one axis, or 0 if it exceeds `cap`.
inline std::uint64_t axis_cylinder_count(const AxisMap& axis, unsigned m, std::uint64_t cap) {
  std::uint64_t count = 1;
  for (unsigned k = 0; k < m; ++k) {
    if (count > cap / axis.branch_count()) return 0;
    count *= axis.branch_count();
  }
  return count <= cap ? count : 0;
}

inline std::uint64_t checked_cylinder_count(const MapSpec& map, unsigned m, std::uint64_t cap) {
  if (m == 0) throw InvalidArgument("cylinder depth must be >= 1");
  std::uint64_t total = 1;
  for (const auto& a : map.axes()) {
    const std::uint64_t c = axis_cylinder_count(a, m, cap);
    if (c == 0 || total > cap / c) {
      throw DepthCapExceeded("depth " + std::to_string(m) + " needs more than " + std::to_string(cap) +
                             " cylinders");
    }
    total *= c;
  }
  return total;
}

namespace detail {

template <class Visit>
void visit_axis_cylinders(const AxisMap& axis, unsigned m, unsigned level, std::uint64_t index,
                          std::vector<Affine>& stack, Visit& visit) {
  if (level == m) {
    const Affine& f = stack[level];
    auto dom = f.domain();
    visit(AxisCylinder{index, std::move(dom.lo), std::move(dom.hi), f.slope, f.offset});
    return;
  }
  const std::uint64_t base = axis.branch_count();
  for (std::size_t s = 0; s < axis.branch_count(); ++s) {
    stack[level + 1] = stack[level];
    stack[level + 1].then(axis.branch(s));
    visit_axis_cylinders(axis, m, level + 1, index * base + s, stack, visit);
  }
}

}  // namespace detail

// Visits every depth-m cylinder of one axis in index order.
template <class Visit>
void for_each_axis_cylinder(const AxisMap& axis, unsigned m, Visit&& visit,
                            std::uint64_t cap = kDefaultCylinderCap) {
  if (m == 0) throw InvalidArgument("cylinder depth must be >= 1");
  if (axis_cylinder_count(axis, m, cap) == 0) {
    throw DepthCapExceeded("depth " + std::to_string(m) + " needs more than " + std::to_string(cap) +
                           " cylinders");
  }
  std::vector<Affine> stack(m + 1);
  detail::visit_axis_cylinders(axis, m, 0, 0, stack, visit);
}

inline std::vector<AxisCylinder> axis_cylinders(const AxisMap& axis, unsigned m,
                                                std::uint64_t cap = kDefaultCylinderCap) {
  std::vector<AxisCylinder> out;
  for_each_axis_cylinder(axis, m, [&](AxisCylinder c) { out.push_back(std::move(c)); }, cap);
  return out;
}

// Streams every depth-m cylinder of the product map exactly once. Axis 0
// varies slowest.
template <class Visit>
void for_each_cylinder(const MapSpec& map, unsigned m, Visit&& visit, std::uint64_t cap = kDefaultCylinderCap) {
  checked_cylinder_count(map, m, cap);
  std::vector<std::vector<AxisCylinder>> per_axis;
  per_axis.reserve(map.dimension());
  for (const auto& a : map.axes()) per_axis.push_back(axis_cylinders(a, m, cap));

  std::vector<std::size_t> odometer(map.dimension(), 0);
  Cylinder c;
  c.depth = m;
  c.axes.resize(map.dimension());
  for (;;) {
    for (std::size_t i = 0; i < odometer.size(); ++i) c.axes[i] = per_axis[i][odometer[i]];
    visit(static_cast<const Cylinder&>(c));
    std::size_t i = odometer.size();
    while (i > 0) {
      --i;
      if (++odometer[i] < per_axis[i].size()) break;
      odometer[i] = 0;
      if (i == 0) return;
    }
  }
}

inline std::vector<Cylinder> cylinders(const MapSpec& map, unsigned m, std::uint64_t cap = kDefaultCylinderCap) {
  std::vector<Cylinder> out;
  for_each_cylinder(map, m, [&](const Cylinder& c) { out.push_back(c); }, cap);
  return out;
}

// The depth-m cylinder whose itinerary is that of x.
inline Cylinder locate(const MapSpec& map, const Point& x, unsigned m, std::uint64_t cap = kDefaultCylinderCap) {
  checked_cylinder_count(map, m, cap);
  if (x.size() != map.dimension()) throw InvalidArgument("point dimension does not match map");
  Cylinder c;
  c.depth = m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const AxisMap& axis = map.axis(i);
    if (x[i] < 0 || x[i] > 1) throw InvalidArgument("point outside [0,1]^d");
    Rational y = x[i];
    Affine f;
    std::uint64_t index = 0;
    for (unsigned k = 0; k < m; ++k) {
      const std::size_t s = axis.branch_of(y);
      index = index * axis.branch_count() + s;
      f.then(axis.branch(s));
      y = axis.branch(s).apply(y);
    }
    auto dom = f.domain();
    c.axes.push_back(AxisCylinder{index, std::move(dom.lo), std::move(dom.hi), f.slope, f.offset});
  }
  return c;
}

}  // namespace shrinkrec
