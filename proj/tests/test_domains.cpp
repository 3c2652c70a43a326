#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kobalab/domains.hpp"

using namespace kobalab;

namespace {

// Brute-force distance from (x, y), x, y >= 0, to the boundary of the real
// slice of {|z1|^2 + |z2|^(2p) < 1}; for such points the nearest boundary
// point has non-negative real coordinates.
double ellipsoid_distance_oracle(double x, double y, double p) {
  double best = 1e9;
  const int n = 200000;
  for (int k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    const double t = std::pow(1.0 - s * s, 1.0 / (2.0 * p));
    best = std::min(best, std::hypot(s - x, t - y));
  }
  return best;
}

}  // namespace

TEST(Domains, FactoriesValidate) {
  EXPECT_THROW(make_disc(0.0), InputError);
  EXPECT_THROW(make_polydisc(0, 1.0), InputError);
  EXPECT_THROW(make_ellipsoid(2, 0.5), InputError);
  EXPECT_THROW(make_box(1, 1.0, -1.0, 1.0), InputError);
  EXPECT_EQ(dimension(make_box(2, 1.0, 1.0, 1.0)), 3);
  EXPECT_EQ(dimension(make_flat(0.5, 1.0, 1.0, 1.0)), 2);
  EXPECT_EQ(variant_name(make_ball(3)), "ball");
}

TEST(Domains, Membership) {
  EXPECT_TRUE(contains(make_disc(2.0), make_point({{1.5, 1.0}})));
  EXPECT_FALSE(contains(make_disc(1.0), make_point({1.0})));
  EXPECT_TRUE(contains(make_polydisc(2), make_point({0.9, {0.0, -0.9}})));
  EXPECT_FALSE(contains(make_ball(2), make_point({0.8, 0.7})));
  // |0.8|^2 + |0.7|^4 = 0.8801 < 1
  EXPECT_TRUE(contains(make_ellipsoid(2, 2.0), make_point({0.8, 0.7})));
  const Domain box = make_box(1, 1.0, 1.0, 1.0);
  EXPECT_TRUE(contains(box, make_point({0.0, {0.5, 0.9}})));
  EXPECT_FALSE(contains(box, make_point({0.0, {-0.1, 0.0}})));
  EXPECT_THROW(contains(box, make_point({0.0})), InputError);
}

TEST(Domains, FlatMembership) {
  const Domain d = make_flat(0.5, 1.0, 1.0, 1.0);
  // Over the flat disc any positive height is inside.
  EXPECT_TRUE(contains(d, make_point({0.4, 1e-12})));
  EXPECT_FALSE(contains(d, make_point({0.4, 0.0})));
  // g(0.6) = exp(-1/0.11)
  const double g = std::exp(-1.0 / 0.11);
  EXPECT_FALSE(contains(d, make_point({0.6, 0.9 * g})));
  EXPECT_TRUE(contains(d, make_point({0.6, 1.1 * g})));
}

TEST(Domains, BoundaryDistanceClosedForms) {
  EXPECT_NEAR(boundary_distance(make_disc(1.0), make_point({{0.3, 0.4}})), 0.5, 1e-12);
  EXPECT_NEAR(boundary_distance(make_ball(2), make_point({0.6, 0.0})), 0.4, 1e-12);
  EXPECT_NEAR(boundary_distance(make_polydisc(2), make_point({0.5, 0.9})), 0.1, 1e-12);
  EXPECT_NEAR(boundary_distance(make_box(1, 1.0, 1.0, 1.0), make_point({0.0, 0.3})), 0.3, 1e-12);
  EXPECT_THROW(boundary_distance(make_disc(1.0), make_point({2.0})), DomainError);
}

TEST(Domains, EllipsoidBoundaryDistanceMatchesBruteForce) {
  const Domain d = make_ellipsoid(2, 2.0);
  for (auto [x, y] : {std::pair{0.0, 0.5}, {0.5, 0.5}, {0.9, 0.2}, {0.3, 0.8}}) {
    const double oracle = ellipsoid_distance_oracle(x, y, 2.0);
    EXPECT_NEAR(boundary_distance(d, make_point({x, y})), oracle, 2e-6) << x << "," << y;
  }
}

TEST(Domains, LineBoundaryDistance) {
  EXPECT_NEAR(line_boundary_distance(make_ball(2), make_point({0.0, 0.0}), make_point({1.0, 0.0})),
              1.0, 1e-12);
  EXPECT_NEAR(line_boundary_distance(make_disc(1.0), make_point({0.5}), make_point({{0.0, 2.0}})),
              0.5, 1e-12);
  // Polydisc along (1, 1) from (0.5, 0): |0.5 + l| < 1 binds first at |l| = 0.5.
  EXPECT_NEAR(line_boundary_distance(make_polydisc(2), make_point({0.5, 0.0}), make_point({1.0, 1.0})),
              0.5 * std::sqrt(2.0), 1e-12);
  EXPECT_THROW(line_boundary_distance(make_ball(2), make_point({0.0, 0.0}), make_point({0.0, 0.0})),
               InputError);
}

TEST(Domains, LineDistanceAtLeastBoundaryDistance) {
  const Domain d = make_ellipsoid(2, 3.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    CPoint z = make_point({{g(rng), g(rng)}, {g(rng), g(rng)}});
    z *= 0.7 * std::pow(std::abs(g(rng)) + 1.0, -1.0) / z.norm();
    const CTangent v = make_point({{g(rng), g(rng)}, {g(rng), g(rng)}});
    ASSERT_TRUE(contains(d, z));
    const double line = line_boundary_distance(d, z, v);
    EXPECT_GE(line, boundary_distance(d, z) * (1 - 1e-9));
    // The line distance is attained: the point at that distance along some phase leaves d.
    const LineDistance s = line_boundary_search(d, z, v);
    EXPECT_NEAR(s.distance, line, 1e-9 * line);
    EXPECT_GE(line_boundary_distance_at(d, z, v, s.theta), line * (1 - 1e-9));
  }
}

TEST(Domains, RayExit) {
  EXPECT_NEAR(ray_exit(make_ball(2), make_point({0.0, 0.0}), make_point({0.0, 2.0})), 0.5, 1e-12);
  EXPECT_NEAR(ray_exit(make_box(1, 1.0, 1.0, 1.0), make_point({0.0, 0.25}), make_point({0.0, -1.0})),
              0.25, 1e-12);
}

TEST(Domains, SupportingNormal) {
  const Domain d = make_ball(2);
  const CPoint b = make_point({0.6, {0.0, 0.8}});
  const CTangent nu = supporting_normal(d, b);
  EXPECT_NEAR((nu - b).norm(), 0.0, 1e-12);
}

TEST(Domains, SublevelCutKeepsParallelLines) {
  const Domain box = make_box(1, 1.0, 1.0, 1.0);
  const Domain cut = sublevel_domain(box, 0.1);
  EXPECT_TRUE(contains(cut, make_point({0.0, 0.05})));
  EXPECT_FALSE(contains(cut, make_point({0.0, 0.15})));
  EXPECT_THROW(sublevel_domain(box, -1.0), DomainError);
  // Lines parallel to the cut do not see it.
  const CPoint z = make_point({0.2, 0.05});
  const Domain twice = sublevel_domain(box, 0.2);
  const CTangent flat_dir = make_point({1.0, 0.0});
  EXPECT_NEAR(line_boundary_distance(twice, z, flat_dir), line_boundary_distance(box, z, flat_dir),
              1e-10);
}

TEST(Domains, FlatSliceGeometry) {
  const Domain d = make_flat(0.5, 1.0, 1.0, 1.0);
  const FlatDomain& f = std::get<FlatDomain>(d.shape);
  for (double r : {1e-2, 1e-3, 1e-6}) {
    // g(x) = r  <=>  x = sqrt(a^2 + 1/log(1/r))
    const double radius = std::sqrt(0.25 + 1.0 / std::log(1.0 / r));
    EXPECT_NEAR(flat_slice_radius(f, r), radius, 1e-10);
    const SliceGeometry s = slice_geometry(d, r);
    EXPECT_NEAR(s.f_r, radius - 0.5, 1e-10);
    EXPECT_NEAR(s.q_r[0].real(), 0.5, 0.0);
    EXPECT_NEAR(s.q_r[1].real(), r, 0.0);
  }
  EXPECT_THROW(slice_geometry(d, 0.5), RangeError);
  EXPECT_DOUBLE_EQ(flat_profile(f, 0.3), 0.0);
  EXPECT_NEAR(flat_profile(f, 0.6), std::exp(-1.0 / 0.11), 1e-15);
  // Convexified tail: derivative keeps increasing past the knee.
  EXPECT_GE(flat_profile_derivative(f, f.knee + 0.05), flat_profile_derivative(f, f.knee) - 1e-12);
}
