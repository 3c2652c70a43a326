#include "kobalab/kobayashi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kobalab/geodesics.hpp"

namespace kobalab {

namespace {

using namespace detail;

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

// Four-point Gauss-Legendre rule on [0, 1].
constexpr Scalar kGaussX[4] = {0.5 - 0.5 * 0.8611363115940526, 0.5 - 0.5 * 0.3399810435848563,
                               0.5 + 0.5 * 0.3399810435848563, 0.5 + 0.5 * 0.8611363115940526};
constexpr Scalar kGaussW[4] = {0.5 * 0.3478548451374538, 0.5 * 0.6521451548625461,
                               0.5 * 0.6521451548625461, 0.5 * 0.3478548451374538};

Scalar disc_metric(Complex z, Complex v, Scalar rho) {
  return std::abs(v) * rho / (rho * rho - std::norm(z));
}

template <class P, class T>
Scalar ball_metric(const P& z, const T& v) {
  const Scalar s = 1.0 - z.squaredNorm();
  const Scalar zv = std::norm(v.dot(z));
  return std::sqrt(v.squaredNorm() / s + zv / (s * s));
}

Scalar disc_dist(Complex z, Complex w, Scalar rho) { return poincare_distance(z / rho, w / rho); }

// For integer p, Phi(z', z_n) = (z', z_n^p) maps D_p onto the unit ball, so
// K_B(Phi z, dPhi v) bounds K_{D_p} from below. Ball slices lift back through
// a p-th root wherever w_n has no zero, which bounds it from above.
int cover_degree(Scalar p) {
  return (p >= 2.0 && p <= 64.0 && p == std::floor(p)) ? static_cast<int>(p) : 0;
}

CPoint cover_map(const CPoint& z, int deg) {
  CPoint w = z;
  const Eigen::Index m = z.size() - 1;
  w[m] = 1.0;
  for (int k = 0; k < deg; ++k) w[m] *= z[m];
  return w;
}

CTangent cover_push(const CPoint& z, const CTangent& v, int deg) {
  CTangent u = v;
  const Eigen::Index m = z.size() - 1;
  Complex d = static_cast<Scalar>(deg);
  for (int k = 1; k < deg; ++k) d *= z[m];
  u[m] = d * v[m];
  return u;
}

// Upper bound at w = Phi(z) in direction u: the slice of the ball through w is
// a disc; when w_n vanishes at some point of it, remove a radial slit from that
// point (Koebe: the slit disc Delta minus [s, 1) has metric (1+s)^2/(4s) at 0).
Scalar cover_upper_metric(const CPoint& w, const CTangent& u, Scalar kball) {
  const Eigen::Index m = w.size() - 1;
  if (w[m] == 0.0) return kInf;
  if (u[m] == 0.0) return kball;
  const Complex mu0 = -w[m] / u[m];
  if ((w + mu0 * u).squaredNorm() >= 1.0) return kball;
  const Scalar a = u.squaredNorm();
  const Complex c = u.dot(w) / a;  // slice is |mu + c| < R in the parameter mu
  const Scalar R = std::sqrt((1.0 - w.squaredNorm()) / a + std::norm(c));
  const Complex xz = c / R, x0 = (mu0 + c) / R;
  const Scalar s = std::abs((x0 - xz) / (1.0 - std::conj(xz) * x0));
  if (s <= 0.0) return kInf;
  return kball * (1.0 + s) * (1.0 + s) / (4.0 * s);
}

// Automorphism of D_p (n = 2) moving z to (0, b): Moebius in z1 and the
// matching rescaling of z2. Returns the image point and pushed tangent.
std::pair<CPoint, CTangent> ellipsoid_normalize(const CPoint& z, const CTangent& v, Scalar p) {
  const Complex a = z[0];
  const Scalar s = 1.0 - std::norm(a);
  const Scalar g = std::pow(s, -0.5 / p);
  const Complex dg = g * std::conj(a) / (p * s);
  CPoint w(2);
  CTangent u(2);
  w << 0.0, z[1] * g;
  u << v[0] / s, v[1] * g + z[1] * dg * v[0];
  return {w, u};
}

// d_B(Phi p, Phi q) when the ball geodesic through the images lifts to a disc
// in D_p through p and q; then it is the exact distance.
std::optional<Scalar> cover_exact_distance(const CPoint& p, const CPoint& q, int deg) {
  const Eigen::Index m = p.size() - 1;
  const CPoint P = cover_map(p, deg), Q = cover_map(q, deg);
  if (P[m] == 0.0 || Q[m] == 0.0) return std::nullopt;
  const Complex dn = Q[m] - P[m];
  if (dn != 0.0 && (P - (P[m] / dn) * (Q - P)).squaredNorm() < 1.0) return std::nullopt;
  // The branch of the root continued along the segment from P to Q.
  const Complex lifted = p[m] * std::exp(std::log(Q[m] / P[m]) / static_cast<Scalar>(deg));
  if (std::abs(lifted - q[m]) > 1e-9 * std::max(1.0, std::abs(q[m]))) return std::nullopt;
  return ball_distance(P, Q);
}

// Enclosure of the metric of R_{alpha,beta} = {0 < Re < alpha, |Im| < beta} at zeta.
Interval rectangle_metric(Complex zeta, Complex w, Scalar alpha, Scalar beta) {
  const Scalar aw = std::abs(w);
  if (aw == 0.0) return {0.0, 0.0};
  const Scalar x = zeta.real(), y = zeta.imag();
  const Scalar delta = std::min({x, alpha - x, beta - y, beta + y});
  // Lower: convex sandwich and the two enclosing strips (exact hyperbolic metrics).
  Scalar lo = aw / (2.0 * delta);
  lo = std::max(lo, aw * kPi / (2.0 * alpha * std::sin(kPi * x / alpha)));
  lo = std::max(lo, aw * kPi / (4.0 * beta * std::cos(kPi * y / (2.0 * beta))));
  // Upper: the disc centred at zeta and the largest inscribed disc closest to zeta.
  Scalar hi = aw / delta;
  const Scalar rho = std::min(0.5 * alpha, beta);
  const Complex c(std::clamp(x, rho, alpha - rho), std::clamp(y, -beta + rho, beta - rho));
  const Scalar off2 = std::norm(zeta - c);
  if (off2 < rho * rho) hi = std::min(hi, disc_metric(zeta - c, w, rho));
  return {lo, std::max(lo, hi)};
}

// Rectangle hull data for domains that sit inside Delta_R^k x R_{alpha,beta}.
struct BoxHull {
  BoxDomain box;
  bool equal = false;  // the hull is the domain itself
};

std::optional<BoxHull> box_hull(const Domain& d) {
  if (const auto* b = std::get_if<BoxDomain>(&d.shape)) return BoxHull{*b, true};
  if (const auto* f = std::get_if<FlatDomain>(&d.shape)) {
    return BoxHull{BoxDomain{1, f->R, f->alpha, f->beta}, false};
  }
  if (const auto* s = std::get_if<Sublevel>(&d.shape)) {
    auto h = box_hull(*s->inner);
    if (h) h->box.alpha = std::min(h->box.alpha, s->height);
    return h;
  }
  return std::nullopt;
}

Interval box_metric(const BoxDomain& b, const CPoint& z, const CTangent& v) {
  Scalar factors = 0.0;
  for (int i = 0; i < b.discs; ++i) factors = std::max(factors, disc_metric(z[i], v[i], b.R));
  const Interval rect = rectangle_metric(z[b.discs], v[b.discs], b.alpha, b.beta);
  return {std::max(factors, rect.lo), std::max(factors, rect.hi)};
}

std::optional<Scalar> exact_metric(const Domain& d, const CPoint& z, const CTangent& v) {
  if (const auto* s = std::get_if<Disc>(&d.shape)) return disc_metric(z[0], v[0], s->radius);
  if (const auto* s = std::get_if<Polydisc>(&d.shape)) {
    Scalar k = 0.0;
    for (int i = 0; i < s->n; ++i) k = std::max(k, disc_metric(z[i], v[i], s->radius));
    return k;
  }
  if (std::holds_alternative<Ball>(d.shape)) return ball_metric(z, v);
  if (const auto* s = std::get_if<Ellipsoid>(&d.shape); s && s->p == 1.0) return ball_metric(z, v);
  return std::nullopt;
}

// Comparison enclosure from enclosing (lower end) and inscribed (upper end)
// domains with known metrics; [0, inf] when nothing applies.
Interval comparison_metric(const Domain& d, const CPoint& z, const CTangent& v) {
  if (auto k = exact_metric(d, z, v)) return {*k, *k};
  Interval out{0.0, kInf};
  if (const auto* e = std::get_if<Ellipsoid>(&d.shape)) {
    const int m = e->n - 1;
    out.lo = std::max(ball_metric(z.head(m), v.head(m)), disc_metric(z[m], v[m], 1.0));
    if (z.squaredNorm() < 1.0) out.hi = ball_metric(z, v);  // the unit ball is inscribed in D_p
    if (e->n == 2) {
      const auto [w, u] = ellipsoid_normalize(z, v, e->p);
      out.lo = std::max({out.lo, disc_metric(0.0, u[0], 1.0), disc_metric(w[1], u[1], 1.0)});
      if (w.squaredNorm() < 1.0) out.hi = std::min(out.hi, ball_metric(w, u));
    }
    if (const int deg = cover_degree(e->p)) {
      const CPoint w = cover_map(z, deg);
      const CTangent u = cover_push(z, v, deg);
      const Scalar kb = ball_metric(w, u);
      out.lo = std::max(out.lo, kb);
      out.hi = std::min(out.hi, cover_upper_metric(w, u, kb));
    }
  }
  if (const auto* s = std::get_if<Sublevel>(&d.shape)) {
    out.lo = comparison_metric(*s->inner, z, v).lo;
  }
  if (auto h = box_hull(d)) {
    const Interval b = box_metric(h->box, z, v);
    out.lo = std::max(out.lo, b.lo);
    if (h->equal) out.hi = std::min(out.hi, b.hi);
  }
  return out;
}

void require_inside(const Domain& d, const CPoint& z) {
  if (!contains(d, z)) throw DomainError("point is not inside " + describe(d));
}

// Upper metric; `phase` reuses a minimizing phase instead of searching.
Scalar upper_at(const Domain& d, const CPoint& z, const CTangent& v, MetricProbe* probe,
                const Scalar* phase) {
  const Scalar vn = v.norm();
  if (vn == 0.0) return 0.0;
  if (auto k = exact_metric(d, z, v)) return *k;
  const Interval cmp = comparison_metric(d, z, v);
  if (cmp.hi <= cmp.lo * (1.0 + 1e-12)) return cmp.hi;  // no boundary search needed
  Scalar delta;
  if (phase) {
    delta = line_boundary_distance_at(d, z, v, *phase);
  } else {
    const LineDistance ld = line_boundary_search(d, z, v);
    delta = ld.distance;
    if (probe) {
      probe->numeric = ld.numeric;
      probe->theta = ld.theta;
    }
  }
  return std::min(vn / delta, cmp.hi);
}

// 4-point Gauss-Legendre on [s0, s1] for both ends of an interval-valued integrand.
template <class F>
Interval gauss_piece(F&& f, Scalar s0, Scalar s1) {
  Interval sum{0.0, 0.0};
  const Scalar h = s1 - s0;
  for (int g = 0; g < 4; ++g) {
    const Interval v = f(s0 + kGaussX[g] * h);
    sum.lo += kGaussW[g] * h * v.lo;
    sum.hi += kGaussW[g] * h * v.hi;
  }
  return sum;
}

// Composite rule on [0, 1]: every piece is halved until halving changes it by
// less than its share (proportional to width) of tol * total. Pieces that have
// settled stop splitting, so kinks of the integrand only refine locally.
template <class F>
Interval adaptive_gauss(F&& f, Scalar tol) {
  struct Piece {
    Scalar a, b;
    Interval value;
  };
  std::vector<Piece> active{{0.0, 1.0, gauss_piece(f, 0.0, 1.0)}}, next;
  Interval done{0.0, 0.0};
  for (int depth = 0; depth < 30 && !active.empty(); ++depth) {
    Interval total = done;
    for (const auto& p : active) {
      total.lo += p.value.lo;
      total.hi += p.value.hi;
    }
    next.clear();
    for (const auto& p : active) {
      const Scalar m = 0.5 * (p.a + p.b);
      const Interval l = gauss_piece(f, p.a, m), r = gauss_piece(f, m, p.b);
      const Scalar share = tol * (p.b - p.a);
      const bool ok = std::abs(l.hi + r.hi - p.value.hi) <= share * std::abs(total.hi) &&
                      std::abs(l.lo + r.lo - p.value.lo) <= share * std::abs(total.lo);
      if (ok) {
        done.lo += l.lo + r.lo;
        done.hi += l.hi + r.hi;
      } else {
        next.push_back({p.a, m, l});
        next.push_back({m, p.b, r});
      }
    }
    active.swap(next);
  }
  for (const auto& p : active) {
    done.lo += p.value.lo;
    done.hi += p.value.hi;
  }
  return done;
}

// Minkowski functional of the ellipsoid {|z'|^2 + |z_n|^{2p} < 1}.
Scalar ellipsoid_gauge(const CPoint& z, int n, Scalar p) {
  const Scalar a = z.head(n - 1).norm();
  const Scalar b = std::abs(z[n - 1]);
  if (a == 0.0 && b == 0.0) return 0.0;
  Scalar lo = std::max(a, b), hi = a + b;
  auto phi = [&](Scalar t) { return (a / t) * (a / t) + std::pow(b / t, 2.0 * p) - 1.0; };
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const Scalar mid = 0.5 * (lo + hi);
    (phi(mid) > 0.0 ? lo : hi) = mid;
  }
  return hi;
}

struct Candidate {
  Scalar value = 0.0;
  std::string source = "none";
  void offer(Scalar v, const char* what) {
    if (std::isfinite(v) && v > value) {
      value = v;
      source = what;
    }
  }
};

// Minorants from a single defining constraint: the constraint set contains D,
// so its own Kobayashi distance bounds d_D from below.
void constraint_minorant(const Constraint& c, const CPoint& p, const CPoint& q, Candidate& best) {
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiscConstraint>) {
          best.offer(disc_dist(p[k.i], q[k.i], k.rho), "disc factor");
        } else if constexpr (std::is_same_v<K, BallConstraint>) {
          best.offer(ball_distance(p, q), "ball");
        } else if constexpr (std::is_same_v<K, HalfPlaneConstraint>) {
          best.offer(half_plane_distance(k.c - k.eta * p[k.i], k.c - k.eta * q[k.i]),
                     "half-plane (boxing)");
        } else if constexpr (std::is_same_v<K, EllipsoidConstraint>) {
          const int m = k.n - 1;
          best.offer(std::max(ball_distance(p.head(m), q.head(m)), disc_dist(p[m], q[m], 1.0)),
                     "ball x disc hull");
          if (const int deg = cover_degree(k.p)) {
            best.offer(ball_distance(cover_map(p, deg), cover_map(q, deg)), "ball cover");
          }
          if (p.squaredNorm() == 0.0) {
            best.offer(std::atanh(ellipsoid_gauge(q, k.n, k.p)), "balanced origin formula");
          } else if (q.squaredNorm() == 0.0) {
            best.offer(std::atanh(ellipsoid_gauge(p, k.n, k.p)), "balanced origin formula");
          }
        } else if constexpr (std::is_same_v<K, FlatLowerConstraint>) {
          // Tangent half-spaces of the lower surface below p and q.
          for (const CPoint* x : {&p, &q}) {
            CPoint b = *x;
            b[1] = Complex(flat_profile(k.f, std::abs(b[0])), b[1].imag());
            const CTangent nu = constraint_normal(c, b);
            best.offer(half_plane_distance(nu.dot(b - p), nu.dot(b - q)),
                       "supporting half-space");
          }
        }
      },
      c);
}

}  // namespace

// ---------------------------------------------------------------------------

Scalar poincare_distance(Complex z, Complex w) {
  if (!(std::abs(z) < 1.0 && std::abs(w) < 1.0)) {
    throw DomainError("poincare_distance requires points of the unit disc");
  }
  const Scalar x = std::abs(w - z) / std::abs(1.0 - std::conj(z) * w);
  return std::atanh(std::min(x, 1.0));
}

Scalar ball_distance(const CPoint& z, const CPoint& w) {
  // tanh^2 d = (|z - w|^2 - (|z|^2 |w|^2 - |<z, w>|^2)) / |1 - <z, w>|^2.
  const Complex zw = w.dot(z);  // sum z_i conj(w_i)
  const Scalar num = (z - w).squaredNorm() - (z.squaredNorm() * w.squaredNorm() - std::norm(zw));
  const Scalar x = std::sqrt(std::max(num, 0.0) / std::norm(1.0 - zw));
  return std::atanh(std::min(x, 1.0));
}

Scalar half_plane_distance(Complex u, Complex w) {
  if (!(u.real() > 0.0 && w.real() > 0.0)) return 0.0;
  const Scalar x = std::abs(u - w) / std::abs(u + std::conj(w));
  return std::atanh(std::min(x, 1.0));
}

Scalar strip_distance(Complex u, Complex w, Scalar width) {
  // exp(i pi s / width) maps the strip onto the upper half-plane.
  const Complex i(0.0, 1.0);
  const Complex fu = std::exp(i * kPi * u / width);
  const Complex fw = std::exp(i * kPi * w / width);
  return half_plane_distance(-i * fu, -i * fw);
}

bool has_exact_metric(const Domain& d) {
  const CPoint z = CPoint::Zero(d.dim);
  return exact_metric(d, z, z).has_value();
}

Interval infinitesimal_metric(const Domain& d, const CPoint& z, const CTangent& v,
                              Scalar tol_geom) {
  if (v.size() != d.dim) throw InputError("tangent dimension does not match domain");
  require_inside(d, z);
  const Scalar vn = v.norm();
  if (vn == 0.0) return {0.0, 0.0};
  if (auto k = exact_metric(d, z, v)) return outward(*k, *k);
  const Scalar delta = line_boundary_distance(d, z, v, tol_geom);
  const Interval cmp = comparison_metric(d, z, v);
  const Scalar lo = std::max(vn / (2.0 * delta), cmp.lo);
  const Scalar hi = std::max(lo, std::min(vn / delta, cmp.hi));
  return outward(lo, hi);
}

Scalar metric_upper(const Domain& d, const CPoint& z, const CTangent& v, MetricProbe* probe) {
  if (probe) *probe = MetricProbe{};
  if (!contains(d, z)) return kInf;
  return upper_at(d, z, v, probe, nullptr);
}

Scalar metric_upper_at(const Domain& d, const CPoint& z, const CTangent& v,
                       const MetricProbe& probe) {
  if (!contains(d, z)) return kInf;
  return upper_at(d, z, v, nullptr, probe.numeric ? &probe.theta : nullptr);
}

std::optional<Scalar> exact_distance(const Domain& d, const CPoint& p, const CPoint& q) {
  if (const auto* s = std::get_if<Disc>(&d.shape)) return disc_dist(p[0], q[0], s->radius);
  if (const auto* s = std::get_if<Polydisc>(&d.shape)) {
    Scalar k = 0.0;
    for (int i = 0; i < s->n; ++i) k = std::max(k, disc_dist(p[i], q[i], s->radius));
    return k;
  }
  if (std::holds_alternative<Ball>(d.shape)) return ball_distance(p, q);
  if (const auto* s = std::get_if<Ellipsoid>(&d.shape)) {
    if (s->p == 1.0) return ball_distance(p, q);
    if (p.squaredNorm() == 0.0) return std::atanh(ellipsoid_gauge(q, s->n, s->p));
    if (q.squaredNorm() == 0.0) return std::atanh(ellipsoid_gauge(p, s->n, s->p));
    if (const int deg = cover_degree(s->p)) return cover_exact_distance(p, q, deg);
  }
  return std::nullopt;
}

Interval segment_length(const Domain& d, const CPoint& a, const CPoint& b, Scalar tol_quad) {
  require_inside(d, a);
  require_inside(d, b);
  const CTangent v = b - a;
  if (v.squaredNorm() == 0.0) return {0.0, 0.0};
  auto f = [&](Scalar s) -> Interval {
    const CPoint z = a + s * v;
    if (auto k = exact_metric(d, z, v)) return {*k, *k};
    return infinitesimal_metric(d, z, v);
  };
  const Interval len = adaptive_gauss(f, tol_quad);
  return outward(len.lo, len.hi);
}

std::vector<Interval> cumulative_length(const Curve& c, Scalar tol_quad) {
  if (c.nodes.empty()) throw CurveError("curve has no nodes");
  for (const auto& z : c.nodes) {
    if (!contains(c.domain, z)) throw CurveError("curve node outside " + describe(c.domain));
  }
  std::vector<Interval> out{Interval{0.0, 0.0}};
  for (std::size_t k = 1; k < c.nodes.size(); ++k) {
    out.push_back(out.back() + segment_length(c.domain, c.nodes[k - 1], c.nodes[k], tol_quad));
  }
  return out;
}

Interval curve_length(const Curve& c, Scalar tol_quad) { return cumulative_length(c, tol_quad).back(); }

Scalar minorant_lower_bound(const Domain& d, const CPoint& p, const CPoint& q) {
  return minorant_details(d, p, q).first;
}

std::pair<Scalar, std::string> minorant_details(const Domain& d, const CPoint& p, const CPoint& q) {
  require_inside(d, p);
  require_inside(d, q);
  if ((p - q).squaredNorm() == 0.0) return {0.0, "coincident points"};
  if (auto e = exact_distance(d, p, q)) return {*e, "closed form"};

  Candidate best;
  for (const auto& c : d.constraints) constraint_minorant(c, p, q, best);

  // Strips: pairs of opposite half-planes on the same coordinate.
  for (const auto& c1 : d.constraints) {
    const auto* h1 = std::get_if<HalfPlaneConstraint>(&c1);
    if (!h1) continue;
    for (const auto& c2 : d.constraints) {
      const auto* h2 = std::get_if<HalfPlaneConstraint>(&c2);
      if (!h2 || h2->i != h1->i || std::abs(h1->eta + h2->eta) > 1e-15) continue;
      const Scalar width = h1->c + h2->c;
      if (!(width > 0.0)) continue;
      best.offer(strip_distance(h1->eta * p[h1->i] + h2->c, h1->eta * q[h1->i] + h2->c, width),
                 "strip");
    }
  }

  // Supporting half-spaces where the real line through p and q leaves the domain.
  const CTangent dir = q - p;
  for (int side = 0; side < 2; ++side) {
    const CPoint& from = side == 0 ? q : p;
    const CTangent u = side == 0 ? CTangent(dir) : CTangent(-dir);
    const Scalar t = ray_exit(d, from, u);
    if (!std::isfinite(t)) continue;
    const CPoint b = from + t * u;
    const CTangent nu = supporting_normal(d, b);
    best.offer(half_plane_distance(nu.dot(b - p), nu.dot(b - q)), "supporting half-space");
  }
  return {best.value, best.source};
}

DistanceEstimate distance(const Domain& d, const CPoint& p, const CPoint& q,
                          const OptimizerParams& params) {
  require_inside(d, p);
  require_inside(d, q);
  DistanceEstimate est;
  if ((p - q).squaredNorm() == 0.0) {
    est.bound = {0.0, 0.0};
    est.witness_curve = straight_curve(d, p, q, 2);
    est.lower_bound_source = "coincident points";
    return est;
  }
  OptimizeResult opt = optimize_curve_detailed(d, p, q, params);
  const auto [lo, source] = minorant_details(d, p, q);
  est.witness_curve = std::move(opt.curve);
  est.converged = opt.converged;
  est.lower_bound_source = source;
  // Quadrature of an exact metric can land a few ulps-of-tolerance below the
  // closed-form lower bound; the upper end never drops below lo.
  est.bound = {std::max(lo, 0.0), std::max(opt.length.hi, lo)};
  return est;
}

}  // namespace kobalab
