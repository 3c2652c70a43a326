#include "kobalab/hyperbolicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "kobalab/geodesics.hpp"
#include "kobalab/kobayashi.hpp"
#include "kobalab/parallel.hpp"

namespace kobalab {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

// Index of the pair (i, j), i < j, in the xy, xz, xw, yz, yw, zw ordering.
constexpr int pair_index(int i, int j) {
  constexpr int table[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
  return table[i][j];
}

// Minimizes f on [a, b]: grid first so a non-unimodal f still lands in the
// right basin, then Brent on the bracketing cell.
template <class F>
std::pair<Scalar, Scalar> grid_minimize(F&& f, Scalar a, Scalar b, int grid = 400) {
  int best = 0;
  Scalar fbest = kInf;
  for (int k = 0; k <= grid; ++k) {
    const Scalar v = f(a + (b - a) * k / grid);
    if (v < fbest) {
      fbest = v;
      best = k;
    }
  }
  const Scalar lo = a + (b - a) * std::max(best - 1, 0) / grid;
  const Scalar hi = a + (b - a) * std::min(best + 1, grid) / grid;
  const auto [x, fx] = boost::math::tools::brent_find_minima(f, lo, hi, 40);
  return fx < fbest ? std::pair{x, fx} : std::pair{a + (b - a) * best / grid, fbest};
}

Interval pair_distance(const Domain& d, const CPoint& a, const CPoint& b, const OptimizerParams& prm,
                       bool& converged) {
  converged = true;
  if (auto e = exact_distance(d, a, b)) return outward(*e, *e);
  const DistanceEstimate est = distance(d, a, b, prm);
  converged = est.converged;
  return est.bound;
}

std::string describe_schedule(const ScanSchedule& s, int n) {
  std::ostringstream os;
  os << "n=" << n << "; depths=";
  for (std::size_t i = 0; i < s.depths.size(); ++i) os << (i ? "," : "") << s.depths[i];
  os << "; per batch: structured {O,p,q,(p+q)/2} then uniform random directions from the center"
     << "; optimizer M0=" << s.optimizer.initial_nodes << " refinements=" << s.optimizer.max_refinements
     << " tol_dist=" << s.optimizer.tol_dist;
  return os.str();
}

CTangent random_direction(std::mt19937_64& rng, int n) {
  std::normal_distribution<Scalar> normal;
  CTangent u(n);
  for (int i = 0; i < n; ++i) {
    const Scalar re = normal(rng);
    const Scalar im = normal(rng);
    u[i] = Complex(re, im);
  }
  return u / u.norm();
}

}  // namespace

Scalar gromov_product(Scalar d_xw, Scalar d_yw, Scalar d_xy) {
  return std::max(0.0, 0.5 * (d_xw + d_yw - d_xy));
}

Scalar four_point_delta(const Distances6& d) {
  std::array<Scalar, 3> s{d[0] + d[5], d[1] + d[4], d[2] + d[3]};
  std::sort(s.begin(), s.end());
  return 0.5 * (s[2] - s[1]);
}

Interval four_point_delta(const Intervals6& d) {
  // Largest sum lies in [max lo, max hi], the middle one in [median lo, median hi].
  std::array<Interval, 3> s{d[0] + d[5], d[1] + d[4], d[2] + d[3]};
  std::array<Scalar, 3> lo{s[0].lo, s[1].lo, s[2].lo}, hi{s[0].hi, s[1].hi, s[2].hi};
  std::sort(lo.begin(), lo.end());
  std::sort(hi.begin(), hi.end());
  const Interval v = 0.5 * Interval(lo[2] - hi[1], hi[2] - lo[1]);
  return {std::max(0.0, round_down(v.lo)), std::max(0.0, round_up(v.hi))};
}

CPoint domain_center(const Domain& d) {
  CPoint c = CPoint::Zero(d.dim);
  if (const auto* b = std::get_if<BoxDomain>(&d.shape)) c[d.dim - 1] = 0.5 * b->alpha;
  if (const auto* f = std::get_if<FlatDomain>(&d.shape)) c[1] = 0.5 * f->alpha;
  if (const auto* s = std::get_if<Sublevel>(&d.shape)) {
    c = domain_center(*s->inner);
    if (!contains(d, c)) c[d.dim - 1] = Complex(0.5 * s->height, c[d.dim - 1].imag());
  }
  if (!contains(d, c)) throw DomainError("no reference center for " + describe(d));
  return c;
}

CPoint point_at_depth(const Domain& d, const CTangent& u0, Scalar depth) {
  if (u0.size() != d.dim || u0.norm() == 0.0) throw InputError("bad sampling direction");
  const CPoint c = domain_center(d);
  if (boundary_distance(d, c) <= depth) throw RangeError("depth exceeds the center's boundary distance");
  const CTangent u = u0 / u0.norm();
  // The boundary distance is concave along the ray, so {delta >= depth} is an
  // interval starting at the center.
  Scalar lo = 0.0, hi = ray_exit(d, c, u);
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const Scalar mid = 0.5 * (lo + hi);
    const CPoint z = c + mid * u;
    if (contains(d, z) && boundary_distance(d, z) >= depth) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return c + lo * u;
}

DeltaScanReport delta_scan(const Domain& d, int n, const ScanSchedule& sch, unsigned seed) {
  if (n < 0) throw InputError("quadruple count must be nonnegative");
  if (sch.depths.empty()) throw InputError("schedule needs at least one depth");
  DeltaScanReport rep;
  rep.domain = describe(d);
  rep.seed = seed;
  rep.schedule = describe_schedule(sch, n);
  if (n == 0) return rep;

  // Sample everything up front so the result does not depend on the workers.
  const int B = static_cast<int>(sch.depths.size());
  std::mt19937_64 rng(seed);
  const CPoint center = domain_center(d);
  CTangent up = CTangent::Zero(d.dim), uq = CTangent::Zero(d.dim);
  if (d.dim == 1) {
    up[0] = std::polar(1.0, -kPi / 3);
    uq[0] = std::polar(1.0, kPi / 3);
  } else {
    up[0] = uq[0] = 1.0;
    up[d.dim - 1] = -1.0;
    uq[d.dim - 1] = 1.0;
  }
  std::vector<QuadrupleRecord> quads;
  for (int b = 0; b < B; ++b) {
    const int count = n / B + (b < n % B ? 1 : 0);
    const Scalar depth = sch.depths[b];
    for (int k = 0; k < count; ++k) {
      QuadrupleRecord q;
      q.batch = b;
      if (k == 0) {
        const CPoint p = point_at_depth(d, up, depth);
        const CPoint r = point_at_depth(d, uq, depth);
        q.points = {center, p, r, CPoint(0.5 * (p + r))};
      } else {
        for (auto& z : q.points) z = point_at_depth(d, random_direction(rng, d.dim), depth);
      }
      quads.push_back(std::move(q));
    }
  }

  std::vector<int> nonconv(quads.size(), 0);
  parallel_for(quads.size(), sch.workers, [&](std::size_t i) {
    QuadrupleRecord& q = quads[i];
    try {
      for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) {
          bool ok = true;
          q.distances[pair_index(a, b)] = pair_distance(d, q.points[a], q.points[b], sch.optimizer, ok);
          if (!ok) ++nonconv[i];
        }
      }
      Distances6 hi;
      for (int k = 0; k < 6; ++k) hi[k] = q.distances[k].hi;
      q.measured = four_point_delta(hi);
      q.delta = four_point_delta(q.distances);
      q.skipped = nonconv[i] > 0 || !std::isfinite(q.measured);
    } catch (const std::exception&) {
      q.skipped = true;
    }
  });

  rep.batches.resize(B);
  for (int b = 0; b < B; ++b) rep.batches[b].depth = sch.depths[b];
  for (std::size_t i = 0; i < quads.size(); ++i) {
    const QuadrupleRecord& q = quads[i];
    ScanBatch& batch = rep.batches[q.batch];
    rep.non_converged += nonconv[i];
    if (q.skipped) {
      ++batch.skipped;
      ++rep.skipped;
      continue;
    }
    ++batch.quadruples;
    ++rep.n_quadruples;
    batch.max_measured = std::max(batch.max_measured, q.measured);
    batch.max_delta = max(batch.max_delta, q.delta);
    rep.delta4_max_measured = std::max(rep.delta4_max_measured, q.measured);
    rep.delta4_max_lo = std::max(rep.delta4_max_lo, q.delta.lo);
    rep.delta4_max_hi = std::max(rep.delta4_max_hi, q.delta.hi);
  }
  if (rep.n_quadruples > 0) {
    const Scalar w = sch.histogram_width;
    const int buckets = static_cast<int>(std::floor(rep.delta4_max_measured / w)) + 1;
    for (int k = 0; k < buckets; ++k) rep.histogram.push_back({k * w, (k + 1) * w, 0});
    for (const auto& q : quads) {
      if (q.skipped) continue;
      const int k = std::min(buckets - 1, static_cast<int>(std::floor(q.measured / w)));
      ++rep.histogram[k].count;
    }
  }
  rep.quadruples = std::move(quads);
  return rep;
}

EllipsoidScanReport ellipsoid_scan(Scalar p, int n, const ScanSchedule& schedule, unsigned seed) {
  EllipsoidScanReport out;
  out.ellipsoid = delta_scan(make_ellipsoid(2, p), n, schedule, seed);
  out.control = delta_scan(make_polydisc(2, 1.0), n, schedule, seed);
  return out;
}

Interval slim_triangle_delta(const Domain& d, const CPoint& x, const CPoint& y, const CPoint& z,
                             const TriangleParams& prm) {
  const CPoint* corners[3] = {&x, &y, &z};
  std::array<std::vector<CPoint>, 3> sides;
  for (int s = 0; s < 3; ++s) {
    const CPoint& a = *corners[s];
    const CPoint& b = *corners[(s + 1) % 3];
    if ((a - b).squaredNorm() == 0.0) {
      sides[s] = {a};
      continue;
    }
    const Curve c = optimize_curve(d, a, b, prm.optimizer);
    sides[s] = reparametrize_arclength(c, prm.samples_per_side, prm.optimizer.tol_quad).nodes;
  }
  auto bound = [&](const CPoint& a, const CPoint& b) -> Interval {
    if ((a - b).squaredNorm() == 0.0) return {0.0, 0.0};
    if (auto e = exact_distance(d, a, b)) return outward(*e, *e);
    const Scalar lo = minorant_lower_bound(d, a, b);
    return {lo, std::max(lo, segment_length(d, a, b, prm.optimizer.tol_quad).hi)};
  };
  Interval worst{0.0, 0.0};
  for (int s = 0; s < 3; ++s) {
    for (const CPoint& a : sides[s]) {
      Interval nearest{kInf, kInf};
      for (int o = 0; o < 3; ++o) {
        if (o == s) continue;
        for (const CPoint& b : sides[o]) nearest = min(nearest, bound(a, b));
      }
      worst = max(worst, nearest);
    }
  }
  return worst;
}

WitnessSeries bidisc_witness(const std::vector<int>& m_values) {
  const Domain bidisc = make_polydisc(2, 1.0);
  WitnessSeries out;
  out.name = "bidisc";
  for (int m : m_values) {
    if (m < 2) throw InputError("bidisc witness needs m >= 2");
    const Scalar x = 1.0 - 1.0 / m;
    const CPoint zm = make_point({x, 0.0});  // midpoint of the p_m -> q_m geodesic
    Scalar best = kInf;
    for (const Scalar sign : {-1.0, 1.0}) {  // sides O -> p_m and O -> q_m
      auto f = [&](Scalar tau) {
        return *exact_distance(bidisc, zm, make_point({tau * x, sign * tau * x}));
      };
      best = std::min(best, grid_minimize(f, 0.0, 1.0).second);
    }
    WitnessRow row;
    row.parameter = m;
    row.value = outward(best, best);
    row.analytic = 0.5 * std::atanh(x);
    row.flagged = std::abs(best - *row.analytic) > 0.05 * *row.analytic;
    out.rows.push_back(row);
  }
  out.increasing = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    out.increasing = out.increasing && out.rows[i].value.lo > out.rows[i - 1].value.lo;
  }
  return out;
}

namespace {

// Lower bound on d(z, x) for x below height H in a flat domain: a curve from z
// to x either climbs to some level h (boxing in Re z2, both ways) or stays in
// D_h, where the metric is at least half that of D_2h and hence of the slice
// disc of radius rho(2h).
Scalar low_region_bound(const FlatDomain& f, const CPoint& z, const CPoint& x) {
  const Scalar zs = z[1].real(), xs = x[1].real();
  const Scalar h0 = std::max(zs, xs) * (1.0 + 1e-12);
  const Scalar h1 = 0.5 * f.alpha;
  Scalar best = 0.0;
  constexpr int grid = 240;
  for (int k = 0; k <= grid && h0 < h1; ++k) {
    const Scalar h = h0 * std::pow(h1 / h0, static_cast<Scalar>(k) / grid);
    const Scalar climb = 0.5 * std::log(h / zs) + 0.5 * std::log(h / xs);
    const Scalar rho = flat_slice_radius(f, 2.0 * h);
    const Scalar stay = 0.5 * poincare_distance(z[0] / rho, x[0] / rho);
    best = std::max(best, std::min(climb, stay));
  }
  return best;
}

}  // namespace

WitnessSeries flat_witness(const Domain& d, const std::vector<Scalar>& r_values,
                           const std::optional<CPoint>& z0_in, const FlatWitnessParams& prm) {
  const auto* f = std::get_if<FlatDomain>(&d.shape);
  if (!f) throw InputError("flat witness requires a flat domain");
  const CPoint z0 = z0_in ? *z0_in : make_point({0.0, 0.5 * f->alpha});
  if (!contains(d, z0) || z0[0].imag() != 0.0) throw InputError("z0 must be inside with real z0_1");
  const Scalar tq = prm.optimizer.tol_quad;

  WitnessSeries out;
  out.name = "flat";
  for (Scalar r : r_values) {
    WitnessRow row;
    row.parameter = r;
    try {
      if (r < 1e-8) throw RangeError("r below 1e-8");
      const SigmaResult sig = sigma_construction(d, r, prm.optimizer);
      row.r_prime = sig.r_prime;
      // First crossing of Re z1 = 0 along the curve.
      std::optional<CPoint> mid;
      const auto& nodes = sig.curve.nodes;
      for (std::size_t k = 0; k + 1 < nodes.size() && !mid; ++k) {
        const Scalar a = nodes[k][0].real(), b = nodes[k + 1][0].real();
        if (a <= 0.0 && b >= 0.0 && b > a) mid = nodes[k] + (-a / (b - a)) * (nodes[k + 1] - nodes[k]);
      }
      if (!mid) throw CurveError("sigma does not cross Re z1 = 0");
      const CPoint zs = *mid;
      const Scalar H = std::sqrt(2.0 * sig.r_prime);
      row.far_bound = std::max(0.0, 0.5 * std::log(H / zs[1].real()));

      Scalar near = kInf, upper = kInf;
      const SliceGeometry sg = slice_geometry(*f, r);
      for (const CPoint& end : {sg.p_r, sg.q_r}) {
        // Heights along the segment grow geometrically from r to H, which keeps
        // every cell short in the metric.
        const Scalar rise = z0[1].real() - end[1].real();
        const int N = prm.side_samples;
        std::vector<CPoint> xs;
        std::vector<Scalar> b;
        for (int k = 0; k <= N; ++k) {
          const Scalar height = end[1].real() * std::pow(H / end[1].real(), static_cast<Scalar>(k) / N);
          const CPoint x = end + std::clamp((height - end[1].real()) / rise, 0.0, 1.0) * (z0 - end);
          b.push_back(std::max(minorant_lower_bound(d, zs, x), low_region_bound(*f, zs, x)));
          if (k % std::max(N / 16, 1) == 0) upper = std::min(upper, segment_length(d, zs, x, tq).hi);
          xs.push_back(x);
        }
        for (int k = 0; k < N; ++k) {
          const Scalar cell = segment_length(d, xs[k], xs[k + 1], tq).hi;
          near = std::min(near, std::max(0.0, 0.5 * (b[k] + b[k + 1] - cell)));
        }
        upper = std::min(upper, segment_length(d, zs, z0, tq).hi);
      }
      row.near_bound = near;
      const Scalar lo = std::min(row.far_bound, near);
      row.value = {lo, std::max(lo, upper)};
      row.flagged = !sig.converged;
      if (!sig.converged) row.note = "sigma optimizer budget exhausted";
    } catch (const std::exception& e) {
      row.flagged = true;
      row.note = e.what();
    }
    out.rows.push_back(row);
  }
  out.increasing = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    out.increasing = out.increasing && !out.rows[i].flagged &&
                     out.rows[i].value.lo > out.rows[i - 1].value.lo;
  }
  return out;
}

}  // namespace kobalab
