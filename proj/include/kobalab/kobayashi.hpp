#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kobalab/core.hpp"
#include "kobalab/curve.hpp"
#include "kobalab/domains.hpp"
#include "kobalab/interval.hpp"

namespace kobalab {

/// Enclosure of the Kobayashi infinitesimal metric K_D(z, v).
///
/// Disc, polydisc and ball use their closed forms (zero width up to rounding).
/// Other domains combine the convex sandwich
///   |v| / (2 delta_D(z, v)) <= K_D(z, v) <= |v| / delta_D(z, v)
/// with comparison domains: enclosing products raise the lower end, inscribed
/// exact domains lower the upper end.
Interval infinitesimal_metric(const Domain& d, const CPoint& z, const CTangent& v,
                              Scalar tol_geom = 1e-10);

struct MetricProbe {
  bool numeric = false;  // the line distance needed a phase search
  Scalar theta = 0.0;    // its minimizing phase
};

/// Upper end of infinitesimal_metric only; +inf outside the domain. Optionally
/// reports the minimizing phase of the line-distance search.
Scalar metric_upper(const Domain& d, const CPoint& z, const CTangent& v,
                    MetricProbe* probe = nullptr);

/// metric_upper with the phase search replaced by a single ray at probe.theta.
/// Agrees with metric_upper to first order near the probed (z, v); used for
/// finite-difference gradients.
Scalar metric_upper_at(const Domain& d, const CPoint& z, const CTangent& v,
                       const MetricProbe& probe);

/// True when infinitesimal_metric is exact for the domain.
bool has_exact_metric(const Domain& d);

/// Poincare distance on the unit disc, normalized so that K(0, v) = |v|.
Scalar poincare_distance(Complex z, Complex w);

/// Kobayashi distance of the unit ball of C^n.
Scalar ball_distance(const CPoint& z, const CPoint& w);

/// Kobayashi distance of the right half-plane {Re > 0}.
Scalar half_plane_distance(Complex u, Complex w);

/// Kobayashi distance of the vertical strip {0 < Re < width}.
Scalar strip_distance(Complex u, Complex w, Scalar width);

/// Closed-form distance where one is known (disc, polydisc, ball, and pairs
/// through the origin of a balanced ellipsoid).
std::optional<Scalar> exact_distance(const Domain& d, const CPoint& p, const CPoint& q);

/// Upper-metric length of the straight segment a -> b by adaptive Gauss-Legendre.
Interval segment_length(const Domain& d, const CPoint& a, const CPoint& b, Scalar tol_quad = 1e-6);

/// Length of a piecewise-linear curve: [integral of lower metric, integral of upper metric].
Interval curve_length(const Curve& c, Scalar tol_quad = 1e-6);

/// Cumulative lengths at each node (first entry [0, 0]).
std::vector<Interval> cumulative_length(const Curve& c, Scalar tol_quad = 1e-6);

/// Best certified lower bound on d^K_D(p, q) from enclosing comparison domains:
/// each defining constraint (disc factor, ball, half-plane, strip), the boxing
/// bound for domains lying in {Re z_n > 0}, and supporting half-spaces at the
/// boundary points of the complex line through p and q.
Scalar minorant_lower_bound(const Domain& d, const CPoint& p, const CPoint& q);

/// minorant_lower_bound together with a description of the winning comparison domain.
std::pair<Scalar, std::string> minorant_details(const Domain& d, const CPoint& p, const CPoint& q);

struct DistanceEstimate {
  Interval bound;
  Curve witness_curve;
  std::string lower_bound_source;
  bool converged = true;
};

/// Two-sided distance estimate: hi is the upper-metric length of an optimized
/// curve, lo the certified minorant bound.
DistanceEstimate distance(const Domain& d, const CPoint& p, const CPoint& q,
                          const OptimizerParams& params = {});

}  // namespace kobalab
