#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "kobalab/curve.hpp"
#include "kobalab/domains.hpp"
#include "kobalab/interval.hpp"

namespace kobalab {

/// (x|y)_w = (d(x,w) + d(y,w) - d(x,y)) / 2, clamped at 0.
Scalar gromov_product(Scalar d_xw, Scalar d_yw, Scalar d_xy);

/// Pairwise distances of {x, y, z, w} in the order xy, xz, xw, yz, yw, zw.
using Distances6 = std::array<Scalar, 6>;
using Intervals6 = std::array<Interval, 6>;

/// Half the gap between the largest and the middle of the three pair sums.
Scalar four_point_delta(const Distances6& d6);

/// Enclosure of four_point_delta over the box of distance intervals.
Interval four_point_delta(const Intervals6& d6);

// ---------------------------------------------------------------------------
// Four-point scans

struct ScanSchedule {
  // Boundary distances the sample points are pushed to, one batch per depth.
  std::vector<Scalar> depths{1e-1, 1e-2, 1e-3, 1e-4};
  // Per-distance optimizer settings; coarser than the defaults since a scan
  // needs thousands of distances.
  OptimizerParams optimizer{9, 2, 80, 1, 1, 1e-2, 1e-9, 1e-5};
  Scalar histogram_width = 0.25;
  int workers = 1;
};

struct ScanBatch {
  Scalar depth = 0.0;
  int quadruples = 0;
  int skipped = 0;
  Scalar max_measured = 0.0;  // four-point delta of the upper distances
  Interval max_delta{0.0, 0.0};
};

struct HistogramBucket {
  Scalar lo = 0.0, hi = 0.0;
  int count = 0;
};

struct QuadrupleRecord {
  int batch = 0;
  std::array<CPoint, 4> points;
  Intervals6 distances;
  Scalar measured = 0.0;
  Interval delta{0.0, 0.0};
  bool skipped = false;
};

struct DeltaScanReport {
  std::string domain;
  int n_quadruples = 0;  // evaluated, skipped ones excluded
  int skipped = 0;
  int non_converged = 0;  // distances whose optimizer ran out of budget
  Scalar delta4_max_lo = 0.0;
  Scalar delta4_max_hi = 0.0;
  Scalar delta4_max_measured = 0.0;
  std::vector<HistogramBucket> histogram;  // of the measured values
  std::vector<ScanBatch> batches;
  std::vector<QuadrupleRecord> quadruples;
  unsigned seed = 1;
  std::string schedule;
};

/// Point at boundary distance `depth` on the ray from the domain's reference
/// center in direction u (u need not be normalized).
CPoint point_at_depth(const Domain& d, const CTangent& u, Scalar depth);

/// Reference interior point used by the samplers (origin for balanced domains).
CPoint domain_center(const Domain& d);

/// n quadruples split evenly over the schedule's depths (earlier depths take
/// the remainder). Each batch starts with a structured quadruple {O, p, q, m}:
/// p, q at the batch depth in the directions e_1 -+ e_n and m = (p + q)/2, which
/// in the bidisc is the midpoint of the p q geodesic; the rest are four points
/// at the batch depth in random directions from the center.
DeltaScanReport delta_scan(const Domain& d, int n, const ScanSchedule& schedule, unsigned seed);

struct EllipsoidScanReport {
  DeltaScanReport ellipsoid;
  DeltaScanReport control;  // Polydisc(2, 1), same schedule and seed
};

EllipsoidScanReport ellipsoid_scan(Scalar p, int n, const ScanSchedule& schedule, unsigned seed);

// ---------------------------------------------------------------------------
// Slim triangles

struct TriangleParams {
  OptimizerParams optimizer{};
  int samples_per_side = 17;
};

/// Max over sampled side points of the distance to the other two sides.
/// lo/hi come from the distance intervals; sampling of the target sides makes
/// the value an upper estimate of the continuum quantity.
Interval slim_triangle_delta(const Domain& d, const CPoint& x, const CPoint& y, const CPoint& z,
                             const TriangleParams& params = {});

// ---------------------------------------------------------------------------
// Witness series

struct WitnessRow {
  Scalar parameter = 0.0;
  Interval value{0.0, 0.0};
  std::optional<Scalar> analytic;  // closed-form cross-check, when one exists
  Scalar far_bound = 0.0;          // flat witness only
  Scalar near_bound = 0.0;         // flat witness only
  Scalar r_prime = 0.0;            // flat witness only
  bool flagged = false;            // construction failed or did not converge
  std::string note;
};

struct WitnessSeries {
  std::string name;
  std::vector<WitnessRow> rows;
  bool increasing = false;  // value.lo strictly increasing along rows
};

/// d_m for each m: distance from the midpoint of the p_m q_m geodesic to the
/// two geodesics from the origin, in the bidisc.
WitnessSeries bidisc_witness(const std::vector<int>& m_values);

struct FlatWitnessParams {
  OptimizerParams optimizer{};
  int side_samples = 400;  // nodes per side segment in the near region
};

/// Certified lower bounds on the distance from the sigma midpoint to the two
/// segments z0 -> p_r, z0 -> q_r. Rows follow `r_values` in the given order;
/// `increasing` refers to decreasing r.
WitnessSeries flat_witness(const Domain& d, const std::vector<Scalar>& r_values,
                           const std::optional<CPoint>& z0 = std::nullopt,
                           const FlatWitnessParams& params = {});

}  // namespace kobalab
