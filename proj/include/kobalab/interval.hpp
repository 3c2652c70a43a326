#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace kobalab {

// Closed real interval with outward-rounded arithmetic. Every operation widens
// the result by one ulp on each side, so a true value enclosed by the inputs
// stays enclosed by the output.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  constexpr Interval() = default;
  constexpr explicit Interval(double v) : lo(v), hi(v) {}
  constexpr Interval(double l, double h) : lo(l), hi(h) {}

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool valid() const { return lo <= hi && std::isfinite(lo) && std::isfinite(hi); }
};

inline double round_down(double v) {
  return std::nextafter(v, -std::numeric_limits<double>::infinity());
}
inline double round_up(double v) {
  return std::nextafter(v, std::numeric_limits<double>::infinity());
}

inline Interval outward(double lo, double hi) { return {round_down(lo), round_up(hi)}; }

inline Interval operator+(const Interval& a, const Interval& b) {
  return outward(a.lo + b.lo, a.hi + b.hi);
}

inline Interval& operator+=(Interval& a, const Interval& b) { return a = a + b; }

// Scalar multiple; the factor is treated as exact.
inline Interval operator*(double c, const Interval& a) {
  return c >= 0 ? outward(c * a.lo, c * a.hi) : outward(c * a.hi, c * a.lo);
}
inline Interval operator*(const Interval& a, double c) { return c * a; }

inline Interval max(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::max(a.hi, b.hi)};
}
inline Interval min(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::min(a.hi, b.hi)};
}

// Intersection of two enclosures of the same quantity.
inline Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

inline bool operator==(const Interval& a, const Interval& b) { return a.lo == b.lo && a.hi == b.hi; }

inline std::ostream& operator<<(std::ostream& os, const Interval& a) {
  return os << '[' << a.lo << ", " << a.hi << ']';
}

}  // namespace kobalab
