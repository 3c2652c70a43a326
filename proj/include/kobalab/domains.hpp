#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "kobalab/core.hpp"

namespace kobalab {

// Catalog of bounded convex domains. Every variant carries its parameters;
// use the make_* factories, which validate them.

/// Disc of radius `radius` in C.
struct Disc {
  Scalar radius = 1.0;
};

/// Polydisc Delta_radius^n.
struct Polydisc {
  int n = 2;
  Scalar radius = 1.0;
};

/// Unit ball of C^n.
struct Ball {
  int n = 2;
};

/// Complex ellipsoid {|z'|^2 + |z_n|^{2p} < 1}, p >= 1.
struct Ellipsoid {
  int n = 2;
  Scalar p = 2.0;
};

/// Delta_R^discs x R_{alpha,beta} where R_{alpha,beta} = {0 < Re < alpha, |Im| < beta}.
/// The complex dimension is discs + 1.
struct BoxDomain {
  int discs = 1;
  Scalar R = 1.0;
  Scalar alpha = 1.0;
  Scalar beta = 1.0;
};

/// Domain in C^2 whose boundary contains the analytic disc {(z1, 0) : |z1| < a}:
///   |z1| < R,  g(|z1|) < Re z2 < alpha,  |Im z2| < beta,
/// with g(x) = exp(-1/(x^2 - a^2)) for x > a and 0 otherwise. Past the first
/// inflection point `knee` of g the profile continues along its tangent line,
/// which keeps the set convex; the region used by the experiments lies well
/// inside |z1| < knee.
struct FlatDomain {
  Scalar a = 0.5;
  Scalar R = 1.0;
  Scalar alpha = 1.0;
  Scalar beta = 1.0;
  Scalar knee = 0.0;  // filled in by make_flat
};

struct Domain;

/// D ∩ {Re z_n < height}.
struct Sublevel {
  std::shared_ptr<const Domain> inner;
  Scalar height = 1.0;
};

namespace detail {
struct DiscConstraint {  // |z_i| < rho
  int i;
  Scalar rho;
};
struct BallConstraint {  // |z| < 1 over all coordinates
  int n;
};
struct HalfPlaneConstraint {  // Re(eta z_i) < c, |eta| = 1
  int i;
  Complex eta;
  Scalar c;
};
struct EllipsoidConstraint {  // |z'|^2 + |z_n|^{2p} < 1
  int n;
  Scalar p;
};
struct FlatLowerConstraint {  // g(|z_1|) < Re z_2
  FlatDomain f;
};
using Constraint = std::variant<DiscConstraint, BallConstraint, HalfPlaneConstraint,
                                EllipsoidConstraint, FlatLowerConstraint>;

// Unit outward normal of a single constraint set at a point b of its boundary.
CPoint constraint_normal(const Constraint& c, const CPoint& b);
}  // namespace detail

struct Domain {
  std::variant<Disc, Polydisc, Ball, Ellipsoid, BoxDomain, FlatDomain, Sublevel> shape;
  // Every catalog domain is an intersection of these convex sets.
  std::vector<detail::Constraint> constraints;
  int dim = 0;
};

using DomainSpec = Domain;

Domain make_disc(Scalar radius = 1.0);
Domain make_polydisc(int n, Scalar radius = 1.0);
Domain make_ball(int n);
Domain make_ellipsoid(int n, Scalar p);
Domain make_box(int discs, Scalar R, Scalar alpha, Scalar beta);
Domain make_flat(Scalar a, Scalar R, Scalar alpha, Scalar beta);

/// Complex dimension of the ambient space.
int dimension(const Domain& d);

/// Short variant name ("disc", "polydisc", ...).
std::string variant_name(const Domain& d);

/// Human-readable description including parameters.
std::string describe(const Domain& d);

/// True iff z lies in the open set. Throws InputError on dimension mismatch.
bool contains(const Domain& d, const CPoint& z);

/// Euclidean distance from z to the boundary.
/// Throws DomainError if z is not inside d.
Scalar boundary_distance(const Domain& d, const CPoint& z);

struct BoundaryQuery {
  Scalar distance = 0.0;
  bool low_precision = false;  // z closer to the boundary than tol_geom
};

BoundaryQuery boundary_query(const Domain& d, const CPoint& z, Scalar tol_geom = 1e-10);

/// Distance t > 0 from z to the boundary along the real ray z + t u (|u| = 1 not required;
/// the result is measured in units of t).
Scalar ray_exit(const Domain& d, const CPoint& z, const CTangent& u);

/// Euclidean distance from z to the boundary along the complex line z + C v.
/// Throws InputError for v = 0 and DomainError if z is not inside d.
Scalar line_boundary_distance(const Domain& d, const CPoint& z, const CTangent& v,
                              Scalar tol_geom = 1e-10);

struct LineDistance {
  Scalar distance = 0.0;
  bool numeric = false;  // a phase search was needed
  Scalar theta = 0.0;    // minimizing phase of lambda when `numeric`
};

/// line_boundary_distance together with the minimizing phase.
LineDistance line_boundary_search(const Domain& d, const CPoint& z, const CTangent& v,
                                  Scalar tol_geom = 1e-10);

/// Exit distance along the single ray of phase theta for the numeric constraints
/// (closed-form constraints still use the full line). An upper bound on
/// line_boundary_distance with equal first derivatives at the minimizing phase,
/// which makes it a cheap stand-in for finite differences. Membership is not checked.
Scalar line_boundary_distance_at(const Domain& d, const CPoint& z, const CTangent& v, Scalar theta,
                                 Scalar tol_geom = 1e-10);

/// Outward normal nu at a boundary point b, normalized to |nu| = 1, such that
/// d ⊂ {z : Re <z - b, nu> < 0} with <x, y> = sum x_i conj(y_i).
CTangent supporting_normal(const Domain& d, const CPoint& b);

/// Returns Sublevel(d, r). Throws DomainError if the cut misses d.
Domain sublevel_domain(const Domain& d, Scalar r);

// ---------------------------------------------------------------------------
// Flat-boundary geometry

/// Upper end of the heights r for which slice_geometry is defined.
inline constexpr Scalar kFlatRangeR0 = 0.1;

/// Boundary profile g of the flat domain (convexified past the knee).
Scalar flat_profile(const FlatDomain& f, Scalar x);
Scalar flat_profile_derivative(const FlatDomain& f, Scalar x);

/// Radius of the slice disc E_h = {z1 : g(|z1|) < h} (capped at R).
Scalar flat_slice_radius(const FlatDomain& f, Scalar height);

/// True iff z lies in the region the flat-domain experiments are validated on:
/// |z1| <= a + f(r0) and Re z2 <= alpha/2.
bool flat_validated(const FlatDomain& f, const CPoint& z);

struct SliceGeometry {
  Scalar r = 0.0;
  CPoint p_r;  // (-a, r)
  CPoint q_r;  // (a, r)
  Scalar f_r = 0.0;  // distance from q_r to the slice boundary along L_r
  Scalar h_r = 0.0;  // distance from p_r to the slice boundary along L_r
  CPoint segment_start;  // L_r runs from p_r ...
  CPoint segment_end;    // ... to q_r
};

/// Slice data at height r in (0, r0). Throws RangeError otherwise.
SliceGeometry slice_geometry(const FlatDomain& f, Scalar r);
SliceGeometry slice_geometry(const Domain& d, Scalar r);

}  // namespace kobalab
