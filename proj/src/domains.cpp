#include "kobalab/domains.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kobalab {

namespace {

using namespace detail;

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
constexpr int kAngleGrid = 64;

void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

// ---------------------------------------------------------------------------
// One-dimensional helpers

template <class F>
Scalar golden_minimize(F&& f, Scalar lo, Scalar hi, Scalar tol, Scalar* arg = nullptr) {
  const Scalar ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  Scalar c = hi - ratio * (hi - lo);
  Scalar d = lo + ratio * (hi - lo);
  Scalar fc = f(c), fd = f(d);
  while (hi - lo > tol) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - ratio * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + ratio * (hi - lo);
      fd = f(d);
    }
  }
  if (arg) *arg = fc <= fd ? c : d;
  return std::min(fc, fd);
}

// Grid search followed by golden refinement around the best grid node.
template <class F>
Scalar grid_minimize(F&& f, Scalar lo, Scalar hi, int grid, Scalar tol) {
  Scalar best = kInf;
  int best_k = 0;
  const Scalar h = (hi - lo) / grid;
  for (int k = 0; k <= grid; ++k) {
    const Scalar v = f(lo + k * h);
    if (v < best) {
      best = v;
      best_k = k;
    }
  }
  const Scalar a = lo + std::max(0, best_k - 1) * h;
  const Scalar b = lo + std::min(grid, best_k + 1) * h;
  return std::min(best, golden_minimize(f, a, b, tol));
}

// Root of a convex function phi along [0, t_hi] with phi(0) < 0 <= phi(t_hi).
// Newton iterates started right of the root decrease monotonically onto it.
template <class Phi>
Scalar convex_root_from_right(Phi&& phi, Scalar t_hi, Scalar rel_tol) {
  Scalar t = t_hi;
  Scalar lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    Scalar value, slope;
    phi(t, value, slope);
    if (value <= 0.0) {
      // Rounding put us at or left of the root.
      lo = t;
      break;
    }
    Scalar next = slope > 0.0 ? t - value / slope : 0.5 * (lo + t);
    if (!(next > lo)) next = 0.5 * (lo + t);
    if (t - next <= rel_tol * t) return next;
    t = next;
  }
  // Bisection fallback on [lo, t_hi] when Newton stalled.
  Scalar hi = t_hi;
  for (int it = 0; it < 200 && hi - lo > rel_tol * hi; ++it) {
    const Scalar mid = 0.5 * (lo + hi);
    Scalar value, slope;
    phi(mid, value, slope);
    (value < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Positive root of |w + t u|^2 = rho^2 (with |w| < rho), i.e. exit of a ball.
Scalar sphere_exit(Scalar uu, Scalar wu, Scalar ww, Scalar rho2) {
  if (uu <= 0.0) return kInf;
  const Scalar c = ww - rho2;  // < 0 inside
  const Scalar disc = wu * wu - uu * c;
  const Scalar s = std::sqrt(std::max(disc, 0.0));
  // Stable form of (-wu + s) / uu.
  return wu <= 0.0 ? (-wu + s) / uu : -c / (wu + s);
}

// ---------------------------------------------------------------------------
// Flat-domain profile

Scalar raw_profile(Scalar a, Scalar x) {
  const Scalar t = x * x - a * a;
  return t > 0.0 ? std::exp(-1.0 / t) : 0.0;
}

Scalar raw_profile_derivative(Scalar a, Scalar x) {
  const Scalar t = x * x - a * a;
  return t > 0.0 ? std::exp(-1.0 / t) / (t * t) * 2.0 * x : 0.0;
}

// Sign of g'' for x > a: 4x^2(1 - 2t) + 2t^2 with t = x^2 - a^2.
Scalar curvature_sign(Scalar a, Scalar x) {
  const Scalar t = x * x - a * a;
  return 4.0 * x * x * (1.0 - 2.0 * t) + 2.0 * t * t;
}

Scalar find_knee(Scalar a) {
  Scalar lo = a, hi = a;
  const Scalar step = 1e-3 * std::max(a, 1.0);
  do {
    lo = hi;
    hi += step;
  } while (curvature_sign(a, hi) > 0.0);
  for (int it = 0; it < 200; ++it) {
    const Scalar mid = 0.5 * (lo + hi);
    (curvature_sign(a, mid) > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Constraint primitives. Each returns quantities for a single convex set.

bool inside(const Constraint& c, const CPoint& z) {
  return std::visit(
      [&](const auto& k) -> bool {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiscConstraint>) {
          return std::abs(z[k.i]) < k.rho;
        } else if constexpr (std::is_same_v<K, BallConstraint>) {
          return z.squaredNorm() < 1.0;
        } else if constexpr (std::is_same_v<K, HalfPlaneConstraint>) {
          return (k.eta * z[k.i]).real() < k.c;
        } else if constexpr (std::is_same_v<K, EllipsoidConstraint>) {
          const Scalar head = z.head(k.n - 1).squaredNorm();
          return head + std::pow(std::norm(z[k.n - 1]), k.p) < 1.0;
        } else {
          return flat_profile(k.f, std::abs(z[0])) < z[1].real();
        }
      },
      c);
}

Scalar ellipsoid_planar_distance(Scalar p, Scalar x0, Scalar y0) {
  // Boundary curve (cos s, sin(s)^{1/p}), s in [0, pi/2].
  auto dist2 = [&](Scalar s) {
    const Scalar x = std::cos(s) - x0;
    const Scalar y = std::pow(std::max(std::sin(s), 0.0), 1.0 / p) - y0;
    return x * x + y * y;
  };
  return std::sqrt(grid_minimize(dist2, 0.0, 0.5 * kPi, 256, 1e-13));
}

Scalar flat_planar_distance(const FlatDomain& f, Scalar x0, Scalar y0) {
  const Scalar vertical = y0 - flat_profile(f, x0);
  if (vertical <= 0.0) return 0.0;
  auto dist2 = [&](Scalar x) {
    const Scalar dx = x - x0;
    const Scalar dy = flat_profile(f, x) - y0;
    return dx * dx + dy * dy;
  };
  const Scalar lo = std::max(0.0, x0 - vertical);
  const Scalar hi = x0 + vertical;
  return std::min(vertical, std::sqrt(grid_minimize(dist2, lo, hi, 128, 1e-13 * std::max(1.0, hi))));
}

Scalar boundary_dist(const Constraint& c, const CPoint& z) {
  return std::visit(
      [&](const auto& k) -> Scalar {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiscConstraint>) {
          return k.rho - std::abs(z[k.i]);
        } else if constexpr (std::is_same_v<K, BallConstraint>) {
          return 1.0 - z.norm();
        } else if constexpr (std::is_same_v<K, HalfPlaneConstraint>) {
          return k.c - (k.eta * z[k.i]).real();
        } else if constexpr (std::is_same_v<K, EllipsoidConstraint>) {
          if (k.p == 1.0) return 1.0 - z.norm();
          return ellipsoid_planar_distance(k.p, z.head(k.n - 1).norm(), std::abs(z[k.n - 1]));
        } else {
          return flat_planar_distance(k.f, std::abs(z[0]), z[1].real());
        }
      },
      c);
}

// Value and slope of a numeric constraint's defining function along w + t u.
struct RayFunction {
  const Constraint* c;
  const CPoint* w;
  const CTangent* u;

  void operator()(Scalar t, Scalar& value, Scalar& slope) const {
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, EllipsoidConstraint>) {
            const int m = k.n - 1;
            Scalar head = 0.0, head_slope = 0.0;
            for (int i = 0; i < m; ++i) {
              const Complex x = (*w)[i] + t * (*u)[i];
              head += std::norm(x);
              head_slope += 2.0 * (std::conj(x) * (*u)[i]).real();
            }
            const Complex x = (*w)[m] + t * (*u)[m];
            const Scalar r2 = std::norm(x);
            const Scalar dr2 = 2.0 * (std::conj(x) * (*u)[m]).real();
            Scalar tail, tail_d;
            if (k.p == 2.0) {
              tail = r2 * r2;
              tail_d = 2.0 * r2;
            } else {
              tail_d = r2 > 0.0 ? k.p * std::pow(r2, k.p - 1.0) : 0.0;
              tail = r2 > 0.0 ? tail_d * r2 / k.p : 0.0;
            }
            value = head + tail - 1.0;
            slope = head_slope + tail_d * dr2;
          } else if constexpr (std::is_same_v<K, FlatLowerConstraint>) {
            const Complex x1 = (*w)[0] + t * (*u)[0];
            const Complex x2 = (*w)[1] + t * (*u)[1];
            const Scalar r = std::abs(x1);
            value = flat_profile(k.f, r) - x2.real();
            const Scalar dr = r > 0.0 ? (std::conj(x1) * (*u)[0]).real() / r : 0.0;
            slope = flat_profile_derivative(k.f, r) * dr - (*u)[1].real();
          } else {
            value = slope = 0.0;
          }
        },
        *c);
  }
};

// Upper bracket for a numeric ray search: a parameter at which the ray has
// certainly left the constraint set (or kInf when it never does).
Scalar numeric_cap(const Constraint& c, const CPoint& w, const CTangent& u) {
  return std::visit(
      [&](const auto& k) -> Scalar {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, EllipsoidConstraint>) {
          const int m = k.n - 1;
          Scalar cap = kInf;
          if (m > 0) {
            cap = std::min(cap, sphere_exit(u.head(m).squaredNorm(),
                                            (w.head(m).dot(u.head(m))).real(),
                                            w.head(m).squaredNorm(), 1.0));
          }
          cap = std::min(cap, sphere_exit(std::norm(u[m]), (std::conj(w[m]) * u[m]).real(),
                                          std::norm(w[m]), 1.0));
          return cap;
        } else if constexpr (std::is_same_v<K, FlatLowerConstraint>) {
          if (std::abs(u[0]) > 0.0) {
            return sphere_exit(std::norm(u[0]), (std::conj(w[0]) * u[0]).real(), std::norm(w[0]),
                               k.f.R * k.f.R);
          }
          return kInf;
        } else {
          return kInf;
        }
      },
      c);
}

bool is_numeric(const Constraint& c) {
  return std::holds_alternative<EllipsoidConstraint>(c) ||
         std::holds_alternative<FlatLowerConstraint>(c);
}

// Ray exit for a numeric constraint, searching only below `limit`.
// Returns `limit` when the ray is still inside at that parameter.
Scalar numeric_ray(const Constraint& c, const CPoint& w, const CTangent& u, Scalar limit,
                   Scalar rel_tol) {
  if (const auto* k = std::get_if<FlatLowerConstraint>(&c); k && std::abs(u[0]) == 0.0) {
    // Profile is constant along the ray: the constraint is a half-plane.
    const Scalar slack = w[1].real() - flat_profile(k->f, std::abs(w[0]));
    const Scalar rate = -u[1].real();
    return rate > 0.0 ? std::min(limit, slack / rate) : limit;
  }
  Scalar t_hi = std::min(limit, numeric_cap(c, w, u));
  if (!std::isfinite(t_hi)) return limit;
  RayFunction phi{&c, &w, &u};
  Scalar value, slope;
  phi(t_hi, value, slope);
  if (value < 0.0) return t_hi;
  return convex_root_from_right(phi, t_hi, rel_tol);
}

Scalar closed_ray(const Constraint& c, const CPoint& w, const CTangent& u) {
  return std::visit(
      [&](const auto& k) -> Scalar {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiscConstraint>) {
          return sphere_exit(std::norm(u[k.i]), (std::conj(w[k.i]) * u[k.i]).real(),
                             std::norm(w[k.i]), k.rho * k.rho);
        } else if constexpr (std::is_same_v<K, BallConstraint>) {
          return sphere_exit(u.squaredNorm(), (w.dot(u)).real(), w.squaredNorm(), 1.0);
        } else if constexpr (std::is_same_v<K, HalfPlaneConstraint>) {
          const Scalar rate = (k.eta * u[k.i]).real();
          return rate > 0.0 ? (k.c - (k.eta * w[k.i]).real()) / rate : kInf;
        } else {
          return kInf;
        }
      },
      c);
}

// Distance (in units of |lambda|) from 0 to the boundary of {lambda : w + lambda v in C}
// for the closed-form constraints.
Scalar closed_lambda(const Constraint& c, const CPoint& w, const CTangent& v) {
  return std::visit(
      [&](const auto& k) -> Scalar {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiscConstraint>) {
          const Scalar vi = std::abs(v[k.i]);
          return vi > 0.0 ? (k.rho - std::abs(w[k.i])) / vi : kInf;
        } else if constexpr (std::is_same_v<K, BallConstraint>) {
          // |w + lambda v|^2 = |v|^2 |lambda - c|^2 + |w|^2 - |s|^2/|v|^2, s = <w, v>.
          const Scalar vv = v.squaredNorm();
          const Complex s = v.dot(w);  // sum conj(v_i) w_i
          const Scalar radius2 = (1.0 - w.squaredNorm() + std::norm(s) / vv) / vv;
          return std::sqrt(std::max(radius2, 0.0)) - std::abs(s) / vv;
        } else if constexpr (std::is_same_v<K, HalfPlaneConstraint>) {
          const Scalar vi = std::abs(v[k.i]);
          return vi > 0.0 ? (k.c - (k.eta * w[k.i]).real()) / vi : kInf;
        } else if constexpr (std::is_same_v<K, FlatLowerConstraint>) {
          if (std::abs(v[0]) > 0.0) return kInf;  // handled numerically
          const Scalar vi = std::abs(v[1]);
          return vi > 0.0 ? (w[1].real() - flat_profile(k.f, std::abs(w[0]))) / vi : kInf;
        } else {
          return kInf;
        }
      },
      c);
}

}  // namespace

CTangent detail::constraint_normal(const Constraint& c, const CPoint& b) {
  CTangent nu = CTangent::Zero(b.size());
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiscConstraint>) {
          const Scalar r = std::abs(b[k.i]);
          nu[k.i] = r > 0.0 ? b[k.i] / r : Complex(1.0);
        } else if constexpr (std::is_same_v<K, BallConstraint>) {
          nu = b;
        } else if constexpr (std::is_same_v<K, HalfPlaneConstraint>) {
          nu[k.i] = std::conj(k.eta);
        } else if constexpr (std::is_same_v<K, EllipsoidConstraint>) {
          const int m = k.n - 1;
          nu.head(m) = b.head(m);
          const Scalar r2 = std::norm(b[m]);
          nu[m] = r2 > 0.0 ? k.p * std::pow(r2, k.p - 1.0) * b[m] : Complex(0.0);
        } else {
          const Scalar r = std::abs(b[0]);
          nu[0] = r > 0.0 ? flat_profile_derivative(k.f, r) * b[0] / r : Complex(0.0);
          nu[1] = -1.0;
        }
      },
      c);
  const Scalar norm = nu.norm();
  return norm > 0.0 ? CTangent(nu / norm) : nu;
}

namespace {

void check_dim(const Domain& d, Eigen::Index n) {
  if (n != d.dim) {
    throw InputError("point dimension " + std::to_string(n) + " does not match domain dimension " +
                     std::to_string(d.dim));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Factories

Domain make_disc(Scalar radius) {
  require(radius > 0.0 && std::isfinite(radius), "disc radius must be positive");
  return {Disc{radius}, {DiscConstraint{0, radius}}, 1};
}

Domain make_polydisc(int n, Scalar radius) {
  require(n >= 1, "polydisc dimension must be >= 1");
  require(radius > 0.0 && std::isfinite(radius), "polydisc radius must be positive");
  Domain d{Polydisc{n, radius}, {}, n};
  for (int i = 0; i < n; ++i) d.constraints.push_back(DiscConstraint{i, radius});
  return d;
}

Domain make_ball(int n) {
  require(n >= 1, "ball dimension must be >= 1");
  return {Ball{n}, {BallConstraint{n}}, n};
}

Domain make_ellipsoid(int n, Scalar p) {
  require(n >= 2, "ellipsoid dimension must be >= 2");
  require(p >= 1.0 && std::isfinite(p), "ellipsoid exponent must be >= 1");
  if (p == 1.0) return {Ellipsoid{n, p}, {BallConstraint{n}}, n};
  return {Ellipsoid{n, p}, {EllipsoidConstraint{n, p}}, n};
}

Domain make_box(int discs, Scalar R, Scalar alpha, Scalar beta) {
  require(discs >= 0, "box disc count must be >= 0");
  require(R > 0.0 && alpha > 0.0 && beta > 0.0, "box parameters must be positive");
  const int n = discs + 1;
  Domain d{BoxDomain{discs, R, alpha, beta}, {}, n};
  for (int i = 0; i < discs; ++i) d.constraints.push_back(DiscConstraint{i, R});
  d.constraints.push_back(HalfPlaneConstraint{n - 1, Complex(-1.0), 0.0});
  d.constraints.push_back(HalfPlaneConstraint{n - 1, Complex(1.0), alpha});
  d.constraints.push_back(HalfPlaneConstraint{n - 1, Complex(0.0, -1.0), beta});
  d.constraints.push_back(HalfPlaneConstraint{n - 1, Complex(0.0, 1.0), beta});
  return d;
}

Domain make_flat(Scalar a, Scalar R, Scalar alpha, Scalar beta) {
  require(a > 0.0 && R > a, "flat domain requires 0 < a < R");
  require(alpha > 0.0 && beta > 0.0, "flat domain requires alpha, beta > 0");
  FlatDomain f{a, R, alpha, beta, find_knee(a)};
  Domain d{f, {}, 2};
  d.constraints.push_back(DiscConstraint{0, R});
  d.constraints.push_back(FlatLowerConstraint{f});
  // Implied by g >= 0; listed so that comparison domains see the strip 0 < Re z2 < alpha.
  d.constraints.push_back(HalfPlaneConstraint{1, Complex(-1.0), 0.0});
  d.constraints.push_back(HalfPlaneConstraint{1, Complex(1.0), alpha});
  d.constraints.push_back(HalfPlaneConstraint{1, Complex(0.0, -1.0), beta});
  d.constraints.push_back(HalfPlaneConstraint{1, Complex(0.0, 1.0), beta});
  return d;
}

namespace {
// Infimum of Re z_n over the domain.
Scalar inf_last_real(const Domain& d) {
  return std::visit(
      [](const auto& s) -> Scalar {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Disc> || std::is_same_v<S, Polydisc>) return -s.radius;
        else if constexpr (std::is_same_v<S, Ball> || std::is_same_v<S, Ellipsoid>) return -1.0;
        else if constexpr (std::is_same_v<S, Sublevel>) return inf_last_real(*s.inner);
        else return 0.0;
      },
      d.shape);
}
}  // namespace

Domain sublevel_domain(const Domain& d, Scalar r) {
  require(std::isfinite(r), "sublevel height must be finite");
  if (inf_last_real(d) >= r) throw DomainError("sublevel cut does not intersect the domain");
  Domain out{Sublevel{std::make_shared<const Domain>(d), r}, d.constraints, d.dim};
  out.constraints.push_back(HalfPlaneConstraint{d.dim - 1, Complex(1.0), r});
  return out;
}

// ---------------------------------------------------------------------------

int dimension(const Domain& d) { return d.dim; }

std::string variant_name(const Domain& d) {
  static constexpr const char* names[] = {"disc", "polydisc", "ball", "ellipsoid",
                                          "box",  "flat",     "sublevel"};
  return names[d.shape.index()];
}

std::string describe(const Domain& d) {
  std::ostringstream os;
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Disc>) os << "Disc(" << s.radius << ")";
        else if constexpr (std::is_same_v<S, Polydisc>) os << "Polydisc(" << s.n << ", " << s.radius << ")";
        else if constexpr (std::is_same_v<S, Ball>) os << "Ball(" << s.n << ")";
        else if constexpr (std::is_same_v<S, Ellipsoid>) os << "Ellipsoid(" << s.n << ", p=" << s.p << ")";
        else if constexpr (std::is_same_v<S, BoxDomain>)
          os << "BoxDomain(" << s.discs << ", R=" << s.R << ", alpha=" << s.alpha << ", beta=" << s.beta << ")";
        else if constexpr (std::is_same_v<S, FlatDomain>)
          os << "FlatDomain(a=" << s.a << ", R=" << s.R << ", alpha=" << s.alpha << ", beta=" << s.beta << ")";
        else os << "Sublevel(" << describe(*s.inner) << ", " << s.height << ")";
      },
      d.shape);
  return os.str();
}

bool contains(const Domain& d, const CPoint& z) {
  check_dim(d, z.size());
  if (!z.allFinite()) return false;
  return std::all_of(d.constraints.begin(), d.constraints.end(),
                     [&](const Constraint& c) { return inside(c, z); });
}

Scalar boundary_distance(const Domain& d, const CPoint& z) {
  if (!contains(d, z)) throw DomainError("point is not inside " + describe(d));
  Scalar best = kInf;
  for (const auto& c : d.constraints) best = std::min(best, boundary_dist(c, z));
  return std::max(best, 0.0);
}

BoundaryQuery boundary_query(const Domain& d, const CPoint& z, Scalar tol_geom) {
  BoundaryQuery q;
  q.distance = boundary_distance(d, z);
  q.low_precision = q.distance < tol_geom;
  return q;
}

Scalar ray_exit(const Domain& d, const CPoint& z, const CTangent& u) {
  check_dim(d, z.size());
  check_dim(d, u.size());
  Scalar best = kInf;
  for (const auto& c : d.constraints) {
    if (!is_numeric(c)) best = std::min(best, closed_ray(c, z, u));
  }
  for (const auto& c : d.constraints) {
    if (is_numeric(c)) best = numeric_ray(c, z, u, best, 1e-14);
  }
  return best;
}

namespace {

// Closed-form part of the line distance (in units of |lambda| for unit v) and the
// constraints that need the phase search.
Scalar closed_line_part(const Domain& d, const CPoint& z, const CTangent& unit,
                        std::vector<const Constraint*>& numeric) {
  Scalar best = kInf;
  for (const auto& c : d.constraints) {
    const Scalar cf = closed_lambda(c, z, unit);
    if (is_numeric(c) && !std::isfinite(cf)) numeric.push_back(&c);
    else best = std::min(best, cf);
  }
  return best;
}

Scalar numeric_exit(const std::vector<const Constraint*>& numeric, const CPoint& z,
                    const CTangent& unit, Scalar theta, Scalar limit, Scalar rel) {
  const CTangent u = std::polar(1.0, theta) * unit;
  Scalar t = limit;
  for (const auto* c : numeric) t = numeric_ray(*c, z, u, t, rel);
  return t;
}

Scalar ray_tolerance(Scalar tol_geom) { return std::max(tol_geom * 1e-2, 1e-15); }

}  // namespace

LineDistance line_boundary_search(const Domain& d, const CPoint& z, const CTangent& v,
                                  Scalar tol_geom) {
  check_dim(d, v.size());
  const Scalar vnorm = v.norm();
  if (!(vnorm > 0.0)) throw InputError("line_boundary_distance requires v != 0");
  if (!contains(d, z)) throw DomainError("point is not inside " + describe(d));
  const CTangent unit = v / vnorm;

  std::vector<const Constraint*> numeric;
  LineDistance out;
  out.distance = closed_line_part(d, z, unit, numeric);
  if (numeric.empty()) return out;

  // Minimize the ray exit over the phase of lambda: pruned grid, then golden section.
  const Scalar rel = ray_tolerance(tol_geom);
  const Scalar step = 2.0 * kPi / kAngleGrid;
  Scalar best = out.distance;
  int best_k = -1;
  for (int k = 0; k < kAngleGrid; ++k) {
    const Scalar t = numeric_exit(numeric, z, unit, k * step, best, rel);
    if (t < best) {
      best = t;
      best_k = k;
    }
  }
  if (best_k < 0) return out;  // numeric constraints never active
  const Scalar cap = best * 2.0;
  auto f = [&](Scalar theta) { return numeric_exit(numeric, z, unit, theta, cap, rel); };
  Scalar theta = best_k * step;
  const Scalar refined = golden_minimize(f, (best_k - 1) * step, (best_k + 1) * step,
                                         std::max(1e-7, std::sqrt(tol_geom) * 1e-2), &theta);
  out.numeric = true;
  if (refined < best) {
    out.distance = refined;
    out.theta = theta;
  } else {
    out.distance = best;
    out.theta = best_k * step;
  }
  return out;
}

Scalar line_boundary_distance(const Domain& d, const CPoint& z, const CTangent& v,
                              Scalar tol_geom) {
  return line_boundary_search(d, z, v, tol_geom).distance;
}

Scalar line_boundary_distance_at(const Domain& d, const CPoint& z, const CTangent& v,
                                 Scalar theta, Scalar tol_geom) {
  const Scalar vnorm = v.norm();
  if (!(vnorm > 0.0)) throw InputError("line_boundary_distance requires v != 0");
  const CTangent unit = v / vnorm;
  std::vector<const Constraint*> numeric;
  const Scalar closed = closed_line_part(d, z, unit, numeric);
  if (numeric.empty()) return closed;
  return numeric_exit(numeric, z, unit, theta, closed, ray_tolerance(tol_geom));
}

CTangent supporting_normal(const Domain& d, const CPoint& b) {
  check_dim(d, b.size());
  // The active constraint is the one whose own boundary is closest to b.
  const Constraint* active = nullptr;
  Scalar best = kInf;
  for (const auto& c : d.constraints) {
    const Scalar slack = std::abs(boundary_dist(c, b));
    if (slack < best) {
      best = slack;
      active = &c;
    }
  }
  return constraint_normal(*active, b);
}

// ---------------------------------------------------------------------------
// Flat-boundary geometry

Scalar flat_profile(const FlatDomain& f, Scalar x) {
  if (x <= f.knee || f.knee <= 0.0) return raw_profile(f.a, x);
  return raw_profile(f.a, f.knee) + raw_profile_derivative(f.a, f.knee) * (x - f.knee);
}

Scalar flat_profile_derivative(const FlatDomain& f, Scalar x) {
  if (x <= f.knee || f.knee <= 0.0) return raw_profile_derivative(f.a, x);
  return raw_profile_derivative(f.a, f.knee);
}

Scalar flat_slice_radius(const FlatDomain& f, Scalar height) {
  if (height <= 0.0) return f.a;
  const Scalar at_knee = raw_profile(f.a, f.knee);
  Scalar x;
  if (height < at_knee || f.knee <= 0.0) {
    x = std::sqrt(f.a * f.a + 1.0 / std::log(1.0 / height));
  } else {
    x = f.knee + (height - at_knee) / raw_profile_derivative(f.a, f.knee);
  }
  return std::min(x, f.R);
}

bool flat_validated(const FlatDomain& f, const CPoint& z) {
  const Scalar reach = flat_slice_radius(f, kFlatRangeR0);
  return z.size() == 2 && std::abs(z[0]) <= reach && z[1].real() <= 0.5 * f.alpha;
}

SliceGeometry slice_geometry(const FlatDomain& f, Scalar r) {
  if (!(r > 0.0 && r < kFlatRangeR0)) {
    throw RangeError("slice height must lie in (0, r0)");
  }
  SliceGeometry s;
  s.r = r;
  s.p_r = make_point({-f.a, r});
  s.q_r = make_point({f.a, r});
  // The slice is the disc of radius g^{-1}(r); q_r and p_r sit on its real diameter.
  const Scalar radius = flat_slice_radius(f, r);
  s.f_r = radius - f.a;
  s.h_r = radius - f.a;
  s.segment_start = s.p_r;
  s.segment_end = s.q_r;
  return s;
}

SliceGeometry slice_geometry(const Domain& d, Scalar r) {
  const auto* f = std::get_if<FlatDomain>(&d.shape);
  if (!f) throw InputError("slice_geometry requires a flat domain");
  return slice_geometry(*f, r);
}

}  // namespace kobalab
