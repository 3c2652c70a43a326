#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kobalab/hyperbolicity.hpp"
#include "kobalab/kobayashi.hpp"

using namespace kobalab;

TEST(Gromov, ProductOfTriangle) {
  EXPECT_DOUBLE_EQ(gromov_product(3.0, 4.0, 5.0), 1.0);
  EXPECT_DOUBLE_EQ(gromov_product(1.0, 1.0, 3.0), 0.0);  // clamped
}

TEST(FourPoint, UnitSquare) {
  // Euclidean unit square: side sums 2, 2 and diagonal sum 2 sqrt 2.
  const double s = std::sqrt(2.0);
  const Distances6 d{1.0, s, 1.0, 1.0, s, 1.0};
  EXPECT_NEAR(four_point_delta(d), s - 1.0, 1e-15);
  EXPECT_NEAR(four_point_delta(d), 0.414214, 1e-6);
}

TEST(FourPoint, TreeMetricIsZero) {
  // Leaves x, y hang off node u, z, w off node v, |uv| = 2, leaf edges 1.
  const Distances6 d{2.0, 4.0, 4.0, 4.0, 4.0, 2.0};
  EXPECT_DOUBLE_EQ(four_point_delta(d), 0.0);
}

TEST(FourPoint, PermutationInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  for (int i = 0; i < 100; ++i) {
    const Distances6 d{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    // swap x <-> y: xy, yz, yw, xz, xw, zw
    const Distances6 swapped{d[0], d[3], d[4], d[1], d[2], d[5]};
    EXPECT_DOUBLE_EQ(four_point_delta(d), four_point_delta(swapped));
  }
}

TEST(FourPoint, IntervalEnclosesEveryRealization) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.5, 3.0), w(0.0, 0.2), t(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Intervals6 box;
    for (auto& b : box) {
      const double lo = u(rng);
      b = {lo, lo + w(rng)};
    }
    const Interval e = four_point_delta(box);
    for (int k = 0; k < 20; ++k) {
      Distances6 d;
      for (int j = 0; j < 6; ++j) d[j] = box[j].lo + t(rng) * box[j].width();
      const double v = four_point_delta(d);
      EXPECT_GE(v, e.lo - 1e-12);
      EXPECT_LE(v, e.hi + 1e-12);
    }
  }
}

TEST(Sampling, PointAtDepth) {
  for (const Domain& d : {make_ball(2), make_polydisc(2), make_ellipsoid(2, 2.0)}) {
    const CTangent u = make_point({0.3, {0.5, -0.2}});
    for (double depth : {1e-1, 1e-3, 1e-4}) {
      const CPoint z = point_at_depth(d, u, depth);
      EXPECT_NEAR(boundary_distance(d, z), depth, 1e-6 * depth) << describe(d);
    }
  }
  EXPECT_EQ(domain_center(make_ball(2)).norm(), 0.0);
  EXPECT_TRUE(contains(make_box(1, 1.0, 1.0, 1.0), domain_center(make_box(1, 1.0, 1.0, 1.0))));
}

TEST(Scan, DeterministicAndWorkerIndependent) {
  ScanSchedule s;
  s.depths = {1e-1, 1e-2};
  const Domain d = make_polydisc(2);
  const DeltaScanReport a = delta_scan(d, 6, s, 3);
  s.workers = 2;
  const DeltaScanReport b = delta_scan(d, 6, s, 3);
  ASSERT_EQ(a.quadruples.size(), b.quadruples.size());
  for (std::size_t i = 0; i < a.quadruples.size(); ++i) {
    EXPECT_EQ(a.quadruples[i].measured, b.quadruples[i].measured);
    EXPECT_EQ(a.quadruples[i].delta, b.quadruples[i].delta);
  }
  EXPECT_EQ(a.n_quadruples + a.skipped, 6);
  ASSERT_EQ(a.batches.size(), 2u);
  EXPECT_EQ(a.batches[0].quadruples + a.batches[0].skipped, 3);
  int histogram_total = 0;
  for (const auto& h : a.histogram) histogram_total += h.count;
  EXPECT_EQ(histogram_total, a.n_quadruples);
  EXPECT_LE(a.delta4_max_lo, a.delta4_max_hi);
}

TEST(Scan, BidiscStructuredQuadrupleGrows) {
  // The first quadruple of each batch is O, p, q, (p + q)/2 with p, q at the
  // batch depth on the antidiagonal; in the bidisc its delta grows like
  // (1/4) log(1/depth) up to constants.
  ScanSchedule s;
  s.depths = {1e-1, 1e-3};
  const DeltaScanReport r = delta_scan(make_polydisc(2), 2, s, 1);
  ASSERT_EQ(r.quadruples.size(), 2u);
  EXPECT_GT(r.quadruples[1].measured, r.quadruples[0].measured + 0.5);
}

TEST(Scan, EmptyScan) {
  const DeltaScanReport r = delta_scan(make_ball(2), 0, ScanSchedule{}, 1);
  EXPECT_EQ(r.n_quadruples, 0);
  EXPECT_TRUE(r.histogram.empty());
}

TEST(SlimTriangle, DiscTrianglesAreUniformlySlim) {
  // Curvature -4 normalization: the slim constant of the disc is
  // log(1 + sqrt 2) / 2 ~ 0.4407 for geodesic triangles.
  const Domain disc = make_disc(1.0);
  const double bound = 0.5 * std::log(1.0 + std::sqrt(2.0));
  for (double rho : {0.9, 0.99}) {
    const CPoint x = make_point({rho});
    const CPoint y = make_point({rho * std::polar(1.0, 2 * kPi / 3)});
    const CPoint z = make_point({rho * std::polar(1.0, 4 * kPi / 3)});
    const Interval delta = slim_triangle_delta(disc, x, y, z);
    EXPECT_LE(delta.lo, delta.hi);
    EXPECT_LT(delta.lo, bound + 0.05) << rho;
  }
}

TEST(Witness, BidiscMatchesClosedForm) {
  const WitnessSeries s = bidisc_witness({10, 100, 1000, 10000});
  ASSERT_EQ(s.rows.size(), 4u);
  EXPECT_TRUE(s.increasing);
  for (const auto& row : s.rows) {
    const double oracle = 0.5 * std::atanh(1.0 - 1.0 / row.parameter);
    EXPECT_NEAR(row.value.lo, oracle, 1e-6) << row.parameter;
    EXPECT_LE(row.value.lo, row.value.hi);
    EXPECT_FALSE(row.flagged);
  }
  EXPECT_NEAR(s.rows[0].value.lo, 0.736110, 1e-6);
}

TEST(Witness, FlatSeriesIsPositiveAndGrows) {
  const Domain d = make_flat(0.5, 1.0, 1.0, 1.0);
  const WitnessSeries s = flat_witness(d, {1e-2, 1e-4});
  ASSERT_EQ(s.rows.size(), 2u);
  for (const auto& row : s.rows) {
    EXPECT_GT(row.value.lo, 0.0);
    EXPECT_LE(row.value.lo, row.value.hi);
    EXPECT_LE(row.value.lo, row.far_bound + 1e-12);
    EXPECT_GT(row.r_prime, 0.0);
  }
  EXPECT_TRUE(s.increasing);
}
