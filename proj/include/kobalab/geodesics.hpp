#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "kobalab/curve.hpp"
#include "kobalab/interval.hpp"

namespace kobalab {

struct OptimizeResult {
  Curve curve;
  Interval length;                    // adaptive quadrature of the returned curve
  bool converged = true;
  std::vector<Scalar> stage_lengths;  // upper length after every accepted stage
  long metric_evaluations = 0;
};

/// Shortens a piecewise-linear curve from p to q under the upper metric.
/// Quasi-Newton (L-BFGS) on all interior nodes with finite-difference gradients,
/// node count doubling between stages. A stage is kept only if it does not
/// lengthen the curve; refinement stops once the relative gain drops below
/// params.tol_dist. Complex coordinates listed in `frozen` are held at their
/// values on the initial straight segment.
OptimizeResult optimize_curve_detailed(const Domain& d, const CPoint& p, const CPoint& q,
                                       const OptimizerParams& params = {},
                                       const std::vector<int>& frozen = {});

Curve optimize_curve(const Domain& d, const CPoint& p, const CPoint& q,
                     const OptimizerParams& params = {});

/// Sets t to cumulative upper length at each node without moving nodes.
Curve with_arclength_parameter(const Curve& c, Scalar tol_quad = 1e-6);

/// Moves nodes so that consecutive ones are equally spaced in upper-metric
/// length. `count` defaults to the current node count. Interior corners of the
/// input polyline are kept (with their own parameter value) so the geometric
/// image is unchanged.
Curve reparametrize_arclength(const Curve& c, int count = 0, Scalar tol_quad = 1e-6);

struct QuasiGeodesicCertificate {
  Scalar A = 1.0;
  Scalar B = 0.0;
  int samples = 0;
  Scalar worst_lower_margin = 0.0;  // min over pairs of d.lo - (|dt|/A - B)
  Scalar worst_upper_margin = 0.0;  // min over pairs of A|dt| + B - d.hi
  bool pass = false;
};

/// Two-sided interval for the distance between nodes i < j of an arclength
/// curve: closed form when available, otherwise [minorant, subarc length].
Interval node_distance(const Curve& c, const std::vector<Interval>& cumulative, std::size_t i,
                       std::size_t j);

/// Checks |t1 - t2|/A - B <= d <= A|t1 - t2| + B over up to `n_pairs` node pairs
/// (all pairs when there are few enough). The lower inequality uses d.lo and the
/// upper one d.hi, so rounding can only produce false failures.
QuasiGeodesicCertificate certify_quasi_geodesic(const Domain& d, const Curve& c, Scalar A, Scalar B,
                                                int n_pairs = 2000);

/// Smallest A >= 1 with which `c` certifies for the given B.
Scalar fit_quasi_geodesic_A(const Domain& d, const Curve& c, Scalar B, int n_pairs = 2000);

/// Straight segment x -> x + cut (b - x) toward the boundary point b,
/// arclength parametrized with `count` nodes.
Curve boundary_segment(const Domain& d, const CPoint& x, const CPoint& b, Scalar cut = 1.0 - 1e-6,
                       int count = 33);

struct SigmaResult {
  Curve curve;        // l_p, then the slice curve, then l_q
  Curve geodesic;     // optimized p_r -> q_r
  Scalar r = 0.0;
  Scalar measured_sup = 0.0;  // sup of Re z2 along the optimized geodesic
  Scalar r_prime = 0.0;       // min(measured_sup, sqrt(r))
  Interval vertical_p, slice, vertical_q;
  std::size_t slice_begin = 0, slice_end = 0;  // node range of the slice curve
  bool converged = true;
};

/// Builds the three-piece comparison curve from p_r to q_r in a flat domain:
/// vertical segment up to height 2r', a curve inside the slice at that height,
/// and the vertical segment back down to q_r.
SigmaResult sigma_construction(const Domain& d, Scalar r, const OptimizerParams& params = {});

/// CSV with columns t, re_z1, im_z1, ..., cumulative_length_lo, cumulative_length_hi.
void write_curve_csv(std::ostream& os, const Curve& c, Scalar tol_quad = 1e-6);

}  // namespace kobalab
