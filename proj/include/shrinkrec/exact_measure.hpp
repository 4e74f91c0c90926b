#pragma once

// Exact Lebesgue measures of recurrence, target and pullback events by
// cylinder decomposition.
//
// Every event handled here is a finite union of pairwise disjoint product
// blocks, and each block is a product of one-dimensional events. A
// one-dimensional event of depth m is a list of open intervals, each tagged
// with the depth-m cylinder of the axis that contains it. Measures therefore
// factor over axes and the d-dimensional cylinder product is never
// enumerated.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shrinkrec/counting.hpp"
#include "shrinkrec/maps.hpp"
#include "shrinkrec/rate.hpp"

namespace shrinkrec {

using Rectangle = std::vector<RationalInterval>;

// Open interval (lo, hi) inside depth-m cylinder `index`; lo < hi.
struct AxisPiece {
  std::uint64_t index = 0;
  Rational lo;
  Rational hi;
};

struct AxisEvent {
  unsigned depth = 0;
  std::uint64_t branch_count = 1;
  std::vector<AxisPiece> pieces;  // sorted by index; several pieces may share one

  Rational measure() const {
    Rational v = 0;
    for (const auto& p : pieces) v += p.hi - p.lo;
    return v;
  }
};

struct EventBlock {
  std::vector<AxisEvent> axes;

  Rational measure() const {
    Rational v = 1;
    for (const auto& a : axes) v *= a.measure();
    return v;
  }
};

enum class EventKind { Recurrence, Target, Pullback, Rectangle, Intersection };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Recurrence:
      return "recurrence";
    case EventKind::Target:
      return "target";
    case EventKind::Pullback:
      return "pullback";
    case EventKind::Rectangle:
      return "rectangle";
    case EventKind::Intersection:
      return "intersection";
  }
  return "?";
}

struct EventSet {
  EventKind kind = EventKind::Rectangle;
  unsigned depth = 0;
  std::vector<EventBlock> blocks;  // pairwise disjoint
};

namespace detail {

inline Rational exact_radius(const AxisRate& rate, std::uint64_t n) {
  auto r = rate.exact(n);
  if (!r) {
    throw IrrationalRate("psi(" + std::to_string(n) + ") = " + rate.describe() +
                         " is irrational; the exact oracle needs rational radii");
  }
  return *r;
}

inline void check_depth(const AxisMap& axis, unsigned n, std::uint64_t cap) {
  if (n == 0) return;
  if (axis_cylinder_count(axis, n, cap) == 0) {
    throw DepthCapExceeded("depth " + std::to_string(n) + " needs more than " + std::to_string(cap) +
                           " cylinders on one axis");
  }
}

// Appends (max(lo, a), min(hi, b)) when non-empty.
inline void push_clipped(std::vector<AxisPiece>& out, std::uint64_t index, const Rational& lo, const Rational& hi,
                         const Rational& a, const Rational& b) {
  const Rational& l = lo < a ? a : lo;
  const Rational& h = hi < b ? hi : b;
  if (l < h) out.push_back(AxisPiece{index, l, h});
}

// {x in [left,right] : |(K-1)x - z| < r}.
inline void recurrence_piece(const AxisCylinder& c, const Rational& r, std::vector<AxisPiece>& out) {
  if (r <= 0) return;
  const Rational k1 = c.slope - 1;
  Rational a = (c.offset - r) / k1;
  Rational b = (c.offset + r) / k1;
  if (b < a) std::swap(a, b);
  push_clipped(out, c.index, a, b, c.left, c.right);
}

// {x in [left,right] : Kx - z in (lo, hi)}.
inline void preimage_piece(const AxisCylinder& c, const Rational& lo, const Rational& hi,
                           std::vector<AxisPiece>& out) {
  if (!(lo < hi)) return;
  Rational a = (lo + c.offset) / c.slope;
  Rational b = (hi + c.offset) / c.slope;
  if (b < a) std::swap(a, b);
  push_clipped(out, c.index, a, b, c.left, c.right);
}

inline RationalInterval clip_unit(const RationalInterval& v) {
  return {std::max(Rational(0), v.lo), std::min(Rational(1), v.hi)};
}

inline RationalInterval clipped_ball(const Rational& center, const Rational& r) {
  return clip_unit({center - r, center + r});
}

inline Rational length(const RationalInterval& v) { return v.hi > v.lo ? Rational(v.hi - v.lo) : Rational(0); }

inline std::uint64_t ipow(std::uint64_t b, unsigned e) {
  std::uint64_t v = 1;
  for (unsigned k = 0; k < e; ++k) v *= b;
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// One-dimensional events

inline AxisEvent axis_interval(const RationalInterval& v, std::uint64_t branch_count) {
  AxisEvent e;
  e.branch_count = branch_count;
  const RationalInterval c = detail::clip_unit(v);
  if (c.lo < c.hi) e.pieces.push_back(AxisPiece{0, c.lo, c.hi});
  return e;
}

inline AxisEvent axis_recurrence(const AxisMap& axis, const Rational& radius, unsigned n,
                                 std::uint64_t cap = kDefaultCylinderCap) {
  detail::check_depth(axis, n, cap);
  AxisEvent e;
  e.depth = n;
  e.branch_count = axis.branch_count();
  for_each_axis_cylinder(axis, n, [&](const AxisCylinder& c) { detail::recurrence_piece(c, radius, e.pieces); },
                         cap);
  return e;
}

inline AxisEvent axis_pullback(const AxisMap& axis, const RationalInterval& f, unsigned n,
                               std::uint64_t cap = kDefaultCylinderCap) {
  if (n == 0) return axis_interval(f, axis.branch_count());
  detail::check_depth(axis, n, cap);
  const RationalInterval g = detail::clip_unit(f);
  AxisEvent e;
  e.depth = n;
  e.branch_count = axis.branch_count();
  if (!(g.lo < g.hi)) return e;
  for_each_axis_cylinder(axis, n, [&](const AxisCylinder& c) { detail::preimage_piece(c, g.lo, g.hi, e.pieces); },
                         cap);
  return e;
}

namespace detail {

using i128 = __int128;

inline unsigned bit_width(i128 v) {
  unsigned __int128 u = v < 0 ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  unsigned w = 0;
  while (u != 0) {
    u >>= 1;
    ++w;
  }
  return w;
}

inline Integer to_integer(i128 v) {
  const bool neg = v < 0;
  unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  Integer z = integer_from_u64(static_cast<std::uint64_t>(u >> 64));
  z <<= 64;
  z += integer_from_u64(static_cast<std::uint64_t>(u));
  return neg ? Integer(-z) : z;
}

inline std::optional<i128> small_integer(const Rational& q, unsigned bits) {
  if (!is_integer(q) || mpz_sizeinbase(q.get_num_mpz_t(), 2) > bits) return std::nullopt;
  return static_cast<i128>(q.get_num().get_si());
}

// Recurrence-event measure on an axis with integer slopes and offsets, in
// 128-bit integers. Each cylinder's piece length is exact in units 1/D with
// D = |K| |K-1| q; sums are grouped by D. Cylinders whose numbers would not
// fit fall back to rationals.
class IntegralRecurrence {
 public:
  static std::optional<IntegralRecurrence> make(const AxisMap& axis, const Rational& radius) {
    IntegralRecurrence r;
    for (const auto& b : axis.branches()) {
      auto k = small_integer(b.slope, 20), w = small_integer(b.offset, 20);
      if (!k || !w) return std::nullopt;
      r.slopes_.push_back(*k);
      r.offsets_.push_back(*w);
    }
    if (mpz_sizeinbase(radius.get_num_mpz_t(), 2) > 40 || mpz_sizeinbase(radius.get_den_mpz_t(), 2) > 40) {
      return std::nullopt;
    }
    r.radius_ = radius;
    r.p_ = radius.get_num().get_si();
    r.q_ = radius.get_den().get_si();
    return r;
  }

  Rational measure(unsigned n) {
    buckets_.clear();
    exact_ = 0;
    visit(n, 0, 1, 0);
    Rational total = exact_;
    for (const auto& b : buckets_) total += Rational(to_integer(b.sum), to_integer(b.den));
    total.canonicalize();
    return total;
  }

 private:
  struct Bucket {
    i128 den;
    i128 sum;
  };

  void visit(unsigned n, unsigned level, i128 k, i128 z) {
    if (level == n) {
      piece(k, z);
      return;
    }
    for (std::size_t s = 0; s < slopes_.size(); ++s) {
      const i128 nk = slopes_[s] * k;
      const i128 nz = slopes_[s] * z + offsets_[s];
      if (bit_width(nk) > 60 || bit_width(nz) > 80) {
        fallback(n, level + 1, Rational(to_integer(nk)), Rational(to_integer(nz)));
      } else {
        visit(n, level + 1, nk, nz);
      }
    }
  }

  void fallback(unsigned n, unsigned level, const Rational& k, const Rational& z) {
    if (level == n) {
      Affine f{k, z};
      auto dom = f.domain();
      std::vector<AxisPiece> out;
      recurrence_piece(AxisCylinder{0, dom.lo, dom.hi, k, z}, radius_, out);
      for (const auto& pc : out) exact_ += pc.hi - pc.lo;
      return;
    }
    for (std::size_t s = 0; s < slopes_.size(); ++s) {
      fallback(n, level + 1, Rational(static_cast<long>(slopes_[s])) * k,
               Rational(static_cast<long>(slopes_[s])) * z + Rational(static_cast<long>(offsets_[s])));
    }
  }

  void piece(i128 k, i128 z) {
    const i128 ak = k < 0 ? -k : k;
    const i128 k1 = k - 1;
    const i128 ak1 = k1 < 0 ? -k1 : k1;
    if (bit_width(z) + 1 + bit_width(ak1) + bit_width(q_) > 124 ||
        bit_width(z) + bit_width(q_) + 1 + bit_width(ak) > 124) {
      fallback(0, 0, Rational(to_integer(k)), Rational(to_integer(z)));
      return;
    }
    const i128 scale = ak1 * q_;
    const i128 left = k > 0 ? z * scale : -(z + 1) * scale;
    const i128 right = k > 0 ? (z + 1) * scale : -z * scale;
    const i128 sign = k1 > 0 ? 1 : -1;
    i128 lo = sign * (z * q_ - p_) * ak;
    i128 hi = sign * (z * q_ + p_) * ak;
    if (hi < lo) std::swap(lo, hi);
    const i128 len = std::min(right, hi) - std::max(left, lo);
    if (len <= 0) return;
    const i128 den = ak * scale;
    for (auto& b : buckets_) {
      if (b.den == den) {
        b.sum += len;
        return;
      }
    }
    if (buckets_.size() >= 64) {
      exact_ += Rational(to_integer(len), to_integer(den));
      exact_.canonicalize();
      return;
    }
    buckets_.push_back({den, len});
  }

  std::vector<i128> slopes_, offsets_;
  Rational radius_;
  i128 p_ = 0, q_ = 1;
  std::vector<Bucket> buckets_;
  Rational exact_;
};

}  // namespace detail

// Measure of the recurrence event on one axis without materializing it.
inline Rational axis_recurrence_measure(const AxisMap& axis, const Rational& radius, unsigned n,
                                        std::uint64_t cap = kDefaultCylinderCap) {
  detail::check_depth(axis, n, cap);
  Rational total = 0;
  if (radius <= 0) return total;
  if (auto fast = detail::IntegralRecurrence::make(axis, radius)) return fast->measure(n);
  std::vector<AxisPiece> scratch;
  for_each_axis_cylinder(
      axis, n,
      [&](const AxisCylinder& c) {
        scratch.clear();
        detail::recurrence_piece(c, radius, scratch);
        for (const auto& p : scratch) total += p.hi - p.lo;
      },
      cap);
  return total;
}

// a ∩ b, where the shallower event is refined to the deeper one's cylinders.
inline AxisEvent axis_intersect(const AxisEvent& a, const AxisEvent& b) {
  if (a.branch_count != b.branch_count && a.depth > 0 && b.depth > 0) {
    throw InvalidArgument("events live on different axes");
  }
  const AxisEvent& shallow = a.depth <= b.depth ? a : b;
  const AxisEvent& deep = a.depth <= b.depth ? b : a;
  const std::uint64_t branches = std::max(a.branch_count, b.branch_count);
  const std::uint64_t scale = detail::ipow(branches, deep.depth - shallow.depth);
  AxisEvent out;
  out.depth = deep.depth;
  out.branch_count = deep.branch_count;
  auto by_index = [](const AxisPiece& p, std::uint64_t i) { return p.index < i; };
  for (const auto& q : deep.pieces) {
    const std::uint64_t parent = q.index / scale;
    auto it = std::lower_bound(shallow.pieces.begin(), shallow.pieces.end(), parent, by_index);
    for (; it != shallow.pieces.end() && it->index == parent; ++it) {
      detail::push_clipped(out.pieces, q.index, it->lo, it->hi, q.lo, q.hi);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// d-dimensional events

inline EventSet event_rectangle(const MapSpec& map, const Rectangle& r) {
  if (r.size() != map.dimension()) throw InvalidArgument("rectangle dimension does not match map");
  EventSet s;
  s.kind = EventKind::Rectangle;
  EventBlock b;
  for (std::size_t i = 0; i < r.size(); ++i) b.axes.push_back(axis_interval(r[i], map.axis(i).branch_count()));
  s.blocks.push_back(std::move(b));
  return s;
}

// A_n = {x : |T^n(x)_i - x_i| < psi_i(n) for all i}.
inline EventSet event_recurrence(const MapSpec& map, const RateFunction& rate, unsigned n,
                                 std::uint64_t cap = kDefaultCylinderCap) {
  if (n == 0) throw InvalidArgument("n must be >= 1");
  if (rate.dimension() != map.dimension()) throw InvalidArgument("rate dimension does not match map");
  EventSet s;
  s.kind = EventKind::Recurrence;
  s.depth = n;
  EventBlock b;
  for (std::size_t i = 0; i < map.dimension(); ++i) {
    b.axes.push_back(axis_recurrence(map.axis(i), detail::exact_radius(rate.axis(i), n), n, cap));
  }
  s.blocks.push_back(std::move(b));
  return s;
}

// E_n = T^{-n}(B(x0, psi(n)) ∩ [0,1]^d).
inline EventSet event_target(const MapSpec& map, const RateFunction& rate, const TargetSpec& target, unsigned n,
                             std::uint64_t cap = kDefaultCylinderCap) {
  if (n == 0) throw InvalidArgument("n must be >= 1");
  if (rate.dimension() != map.dimension()) throw InvalidArgument("rate dimension does not match map");
  target.validate(map.dimension());
  EventSet s;
  s.kind = EventKind::Target;
  s.depth = n;
  EventBlock b;
  for (std::size_t i = 0; i < map.dimension(); ++i) {
    const Rational r = detail::exact_radius(rate.axis(i), n);
    const RationalInterval ball = detail::clipped_ball(target.center[i], r);
    b.axes.push_back(r > 0 ? axis_pullback(map.axis(i), ball, n, cap)
                           : AxisEvent{n, map.axis(i).branch_count(), {}});
  }
  s.blocks.push_back(std::move(b));
  return s;
}

// T^{-n}(union of F), the rectangles of F being pairwise disjoint.
inline EventSet event_pullback(const MapSpec& map, const std::vector<Rectangle>& f, unsigned n,
                               std::uint64_t cap = kDefaultCylinderCap) {
  EventSet s;
  s.kind = EventKind::Pullback;
  s.depth = n;
  for (const auto& r : f) {
    if (r.size() != map.dimension()) throw InvalidArgument("rectangle dimension does not match map");
    EventBlock b;
    for (std::size_t i = 0; i < r.size(); ++i) b.axes.push_back(axis_pullback(map.axis(i), r[i], n, cap));
    s.blocks.push_back(std::move(b));
  }
  return s;
}

inline Rational measure(const EventSet& e) {
  Rational v = 0;
  for (const auto& b : e.blocks) v += b.measure();
  return v;
}

inline EventSet intersect(const EventSet& a, const EventSet& b) {
  EventSet out;
  out.kind = EventKind::Intersection;
  out.depth = std::max(a.depth, b.depth);
  for (const auto& x : a.blocks) {
    for (const auto& y : b.blocks) {
      if (x.axes.size() != y.axes.size()) throw InvalidArgument("events have different dimensions");
      EventBlock z;
      bool empty = false;
      for (std::size_t i = 0; i < x.axes.size(); ++i) {
        z.axes.push_back(axis_intersect(x.axes[i], y.axes[i]));
        if (z.axes.back().pieces.empty()) empty = true;
      }
      if (!empty) out.blocks.push_back(std::move(z));
    }
  }
  return out;
}

// Exact mu(a ∩ b).
inline Rational measure_intersection(const EventSet& a, const EventSet& b) {
  Rational v = 0;
  for (const auto& x : a.blocks) {
    for (const auto& y : b.blocks) {
      if (x.axes.size() != y.axes.size()) throw InvalidArgument("events have different dimensions");
      Rational block = 1;
      for (std::size_t i = 0; i < x.axes.size() && block != 0; ++i) {
        block *= axis_intersect(x.axes[i], y.axes[i]).measure();
      }
      v += block;
    }
  }
  return v;
}

// Exact mu(A_n), streamed axis by axis.
inline Rational recurrence_measure(const MapSpec& map, const RateFunction& rate, unsigned n,
                                   std::uint64_t cap = kDefaultCylinderCap) {
  if (n == 0) throw InvalidArgument("n must be >= 1");
  if (rate.dimension() != map.dimension()) throw InvalidArgument("rate dimension does not match map");
  Rational v = 1;
  for (std::size_t i = 0; i < map.dimension() && v != 0; ++i) {
    v *= axis_recurrence_measure(map.axis(i), detail::exact_radius(rate.axis(i), n), n, cap);
  }
  return v;
}

// Phi(N) = sum_{n<=N} mu(A_n).
inline Rational phi_sum(const MapSpec& map, const RateFunction& rate, unsigned n_max,
                        std::uint64_t cap = kDefaultCylinderCap) {
  if (n_max == 0) throw InvalidArgument("N must be >= 1");
  Rational v = 0;
  for (unsigned n = 1; n <= n_max; ++n) v += recurrence_measure(map, rate, n, cap);
  return v;
}

// Exact mu(A_n) for every n <= n_max, as used for c_n.
inline std::vector<Rational> recurrence_measures(const MapSpec& map, const RateFunction& rate, unsigned n_max,
                                                 std::uint64_t cap = kDefaultCylinderCap) {
  std::vector<Rational> out;
  for (unsigned n = 1; n <= n_max; ++n) out.push_back(recurrence_measure(map, rate, n, cap));
  return out;
}

// ---------------------------------------------------------------------------
// Mixing

inline Rational rectangle_measure(const Rectangle& r) {
  Rational v = 1;
  for (const auto& s : r) v *= detail::length(detail::clip_unit(s));
  return v;
}

// Depth-n cylinders of one axis in spatial order, with prefix sums of lengths.
class SpatialCylinders {
 public:
  SpatialCylinders(const AxisMap& axis, unsigned n, std::uint64_t cap = kDefaultCylinderCap)
      : cylinders_(axis_cylinders(axis, n, cap)) {
    std::sort(cylinders_.begin(), cylinders_.end(),
              [](const AxisCylinder& a, const AxisCylinder& b) { return a.left < b.left; });
    prefix_.reserve(cylinders_.size() + 1);
    prefix_.push_back(0);
    for (const auto& c : cylinders_) prefix_.push_back(prefix_.back() + c.length());
  }

  // mu(E ∩ T^{-n} F) on this axis, for intervals E and F.
  Rational pullback_measure(const RationalInterval& e_raw, const RationalInterval& f_raw) const {
    const RationalInterval e = detail::clip_unit(e_raw);
    const RationalInterval f = detail::clip_unit(f_raw);
    if (!(e.lo < e.hi) || !(f.lo < f.hi)) return 0;
    // first cylinder with left >= e.lo; first cylinder with right > e.hi
    const std::size_t i0 = std::lower_bound(cylinders_.begin(), cylinders_.end(), e.lo,
                                            [](const AxisCylinder& c, const Rational& x) { return c.left < x; }) -
                           cylinders_.begin();
    const std::size_t i1 = std::upper_bound(cylinders_.begin(), cylinders_.end(), e.hi,
                                            [](const Rational& x, const AxisCylinder& c) { return x < c.right; }) -
                           cylinders_.begin();
    Rational total = 0;
    if (i0 < i1) total += (prefix_[i1] - prefix_[i0]) * (f.hi - f.lo);
    std::vector<std::size_t> straddle;
    if (i0 > 0) straddle.push_back(i0 - 1);
    if (i1 < cylinders_.size() && (straddle.empty() || straddle.back() != i1)) straddle.push_back(i1);
    std::vector<AxisPiece> pieces;
    for (auto s : straddle) {
      const AxisCylinder& c = cylinders_[s];
      if (!(c.left < e.hi && e.lo < c.right)) continue;
      if (i0 < i1 && s >= i0 && s < i1) continue;
      pieces.clear();
      detail::preimage_piece(c, f.lo, f.hi, pieces);
      for (const auto& p : pieces) total += detail::length(detail::clip_unit({std::max(p.lo, e.lo), std::min(p.hi, e.hi)}));
    }
    return total;
  }

 private:
  std::vector<AxisCylinder> cylinders_;
  std::vector<Rational> prefix_;
};

inline void check_disjoint(const std::vector<Rectangle>& f) {
  for (std::size_t a = 0; a < f.size(); ++a) {
    for (std::size_t b = a + 1; b < f.size(); ++b) {
      bool overlap = true;
      for (std::size_t i = 0; i < f[a].size(); ++i) {
        if (!(f[a][i].lo < f[b][i].hi && f[b][i].lo < f[a][i].hi)) overlap = false;
      }
      if (overlap) throw InvalidArgument("rectangles of F must be pairwise disjoint");
    }
  }
}

// mu(E ∩ T^{-n}F) - mu(E) mu(F), F a union of disjoint rectangles. Cylinders
// inside E contribute mu(J) mu(F) each, so only the cylinders meeting the
// boundary of E are pulled back explicitly.
inline Rational mixing_deficit(const MapSpec& map, const Rectangle& e, const std::vector<Rectangle>& f, unsigned n,
                               std::uint64_t cap = kDefaultCylinderCap) {
  if (n == 0) throw InvalidArgument("n must be >= 1");
  if (e.size() != map.dimension()) throw InvalidArgument("E dimension does not match map");
  for (const auto& r : f) {
    if (r.size() != map.dimension()) throw InvalidArgument("F dimension does not match map");
  }
  check_disjoint(f);
  std::vector<SpatialCylinders> axes;
  for (const auto& a : map.axes()) {
    detail::check_depth(a, n, cap);
    axes.emplace_back(a, n, cap);
  }
  Rational joint = 0, mu_f = 0;
  for (const auto& r : f) {
    Rational block = 1;
    for (std::size_t i = 0; i < r.size() && block != 0; ++i) block *= axes[i].pullback_measure(e[i], r[i]);
    joint += block;
    mu_f += rectangle_measure(r);
  }
  return joint - rectangle_measure(e) * mu_f;
}

// The proven bound 4 d lambda^{-n} mu(F).
inline Rational mixing_bound(const MapSpec& map, const std::vector<Rectangle>& f, unsigned n) {
  Rational mu_f = 0;
  for (const auto& r : f) mu_f += rectangle_measure(r);
  return Rational(4 * static_cast<long>(map.dimension())) * pow(Rational(1 / map.lambda()), n) * mu_f;
}

}  // namespace shrinkrec
