#include <gtest/gtest.h>

#include <random>

#include "kobalab/interval.hpp"

using kobalab::Interval;

TEST(Interval, SumEnclosesExactValue) {
  // 0.1 + 0.2 is not representable; the enclosure must straddle the rounded sum.
  const Interval s = Interval(0.1) + Interval(0.2);
  EXPECT_LT(s.lo, 0.1 + 0.2);
  EXPECT_GT(s.hi, 0.1 + 0.2);
  EXPECT_TRUE(s.valid());
}

TEST(Interval, RepeatedAccumulationStaysEnclosing) {
  // Sum of 1/k for k = 1..1000 in long double as the reference.
  Interval acc(0.0);
  long double ref = 0.0L;
  for (int k = 1; k <= 1000; ++k) {
    acc += Interval(1.0 / k);
    ref += 1.0L / k;
  }
  EXPECT_LE(static_cast<long double>(acc.lo), ref + 1e-15L);
  EXPECT_GE(static_cast<long double>(acc.hi), ref - 1e-15L);
  EXPECT_LT(acc.width(), 1e-11);
}

TEST(Interval, NegativeScaleSwapsEnds) {
  const Interval a{1.0, 2.0};
  const Interval b = -3.0 * a;
  EXPECT_LE(b.lo, -6.0);
  EXPECT_GE(b.hi, -3.0);
  EXPECT_LT(b.lo, b.hi);
  EXPECT_EQ((a * 2.0).lo, (2.0 * a).lo);
}

TEST(Interval, MinMaxIntersect) {
  const Interval a{1.0, 3.0}, b{2.0, 5.0};
  EXPECT_EQ(kobalab::max(a, b), (Interval{2.0, 5.0}));
  EXPECT_EQ(kobalab::min(a, b), (Interval{1.0, 3.0}));
  EXPECT_EQ(kobalab::intersect(a, b), (Interval{2.0, 3.0}));
  EXPECT_FALSE(kobalab::intersect(Interval{0, 1}, Interval{2, 3}).valid());
}

TEST(Interval, Predicates) {
  const Interval a{-1.0, 1.0};
  EXPECT_TRUE(a.contains(0.0));
  EXPECT_FALSE(a.contains(1.5));
  EXPECT_DOUBLE_EQ(a.mid(), 0.0);
  EXPECT_DOUBLE_EQ(a.width(), 2.0);
  EXPECT_FALSE((Interval{0.0, std::numeric_limits<double>::infinity()}).valid());
}

TEST(Interval, RandomSumsEncloseLongDouble) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), y = u(rng), c = u(rng);
    const Interval s = c * (Interval(x) + Interval(y));
    const long double ref = static_cast<long double>(c) * (static_cast<long double>(x) + y);
    EXPECT_LE(static_cast<long double>(s.lo), ref);
    EXPECT_GE(static_cast<long double>(s.hi), ref);
  }
}
