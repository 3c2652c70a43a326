#include "kobalab/geodesics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>

#include <Eigen/QR>

#include "kobalab/kobayashi.hpp"

namespace kobalab {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

constexpr Scalar kGaussX[4] = {0.5 - 0.5 * 0.8611363115940526, 0.5 - 0.5 * 0.3399810435848563,
                               0.5 + 0.5 * 0.3399810435848563, 0.5 + 0.5 * 0.8611363115940526};
constexpr Scalar kGaussW[4] = {0.5 * 0.3478548451374538, 0.5 * 0.6521451548625461,
                               0.5 * 0.6521451548625461, 0.5 * 0.3478548451374538};

// Quadrature layout of one segment plus the line-search phases at its Gauss
// points. Near the boundary the metric grows like 1/delta, so a single rule
// underestimates segments with one end much deeper than the other; the pieces
// are graded geometrically toward the heavier end instead.
struct SegmentProbe {
  int pieces = 1;
  Scalar ratio = 1.0;      // metric at the heavier end over the lighter one
  bool heavy_end_b = false;
  std::vector<MetricProbe> phases;

  Scalar breakpoint(int j) const {
    const Scalar u = static_cast<Scalar>(j) / pieces;
    const Scalar s = ratio > 1.0 ? (std::pow(ratio, u) - 1.0) / (ratio - 1.0) : u;
    return s;
  }
  // Sub-interval of piece j in segment coordinates (0 at a, 1 at b).
  std::pair<Scalar, Scalar> piece(int j) const {
    if (!heavy_end_b) return {breakpoint(j), breakpoint(j + 1)};
    return {1.0 - breakpoint(pieces - j), 1.0 - breakpoint(pieces - j - 1)};
  }
};

// The optimizer's objective on one segment. The full evaluation fixes the
// layout and records the phases; `at` reuses both for perturbed segments.
struct SegmentCost {
  const Domain& d;
  long evals = 0;
  Scalar operator()(const CPoint& a, const CPoint& b, SegmentProbe& sp) {
    const CTangent v = b - a;
    if (v.squaredNorm() == 0.0) return 0.0;
    const Scalar ma = metric_upper(d, a, v), mb = metric_upper(d, b, v);
    evals += 2;
    sp.heavy_end_b = mb > ma;
    sp.ratio = std::max(ma, mb) / std::max(std::min(ma, mb), 1e-300);
    sp.pieces = sp.ratio > 2.0 ? std::min(48, static_cast<int>(std::ceil(std::log2(sp.ratio)))) : 1;
    if (sp.pieces == 1) sp.ratio = 1.0;
    sp.phases.assign(4 * sp.pieces, MetricProbe{});
    Scalar sum = 0.0;
    for (int j = 0; j < sp.pieces; ++j) {
      const auto [s0, s1] = sp.piece(j);
      for (int g = 0; g < 4; ++g) {
        sum += (s1 - s0) * kGaussW[g] *
               metric_upper(d, a + (s0 + kGaussX[g] * (s1 - s0)) * v, v, &sp.phases[4 * j + g]);
      }
    }
    evals += 4 * sp.pieces;
    return sum;
  }
  Scalar at(const CPoint& a, const CPoint& b, const SegmentProbe& sp) {
    const CTangent v = b - a;
    if (v.squaredNorm() == 0.0) return 0.0;
    Scalar sum = 0.0;
    for (int j = 0; j < sp.pieces; ++j) {
      const auto [s0, s1] = sp.piece(j);
      for (int g = 0; g < 4; ++g) {
        sum += (s1 - s0) * kGaussW[g] *
               metric_upper_at(d, a + (s0 + kGaussX[g] * (s1 - s0)) * v, v, sp.phases[4 * j + g]);
      }
    }
    evals += 4 * sp.pieces;
    return sum;
  }
};

// Real directions of motion for one node: an orthonormal basis of the
// hyperplane (within the free coordinates) normal to the curve at that node.
struct NodeFrame {
  std::vector<CTangent> dirs;
};

NodeFrame normal_frame(const CTangent& tangent, const std::vector<int>& free, Eigen::Index n) {
  const int f = static_cast<int>(2 * free.size());
  Eigen::VectorXd tau(f);
  for (std::size_t i = 0; i < free.size(); ++i) {
    tau[2 * i] = tangent[free[i]].real();
    tau[2 * i + 1] = tangent[free[i]].imag();
  }
  NodeFrame frame;
  const Scalar tn = tau.norm();
  Eigen::MatrixXd basis;
  if (tn > 0.0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(tau / tn);
    basis = Eigen::MatrixXd(qr.householderQ()).rightCols(f - 1);
  } else {
    basis = Eigen::MatrixXd::Identity(f, f);
  }
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    CTangent dir = CTangent::Zero(n);
    for (std::size_t i = 0; i < free.size(); ++i) {
      dir[free[i]] = Complex(basis(2 * i, j), basis(2 * i + 1, j));
    }
    frame.dirs.push_back(dir);
  }
  return frame;
}

// Euclidean scale of node k: the shorter adjacent segment.
Scalar node_scale(const std::vector<CPoint>& nodes, std::size_t k) {
  return std::min((nodes[k] - nodes[k - 1]).norm(), (nodes[k + 1] - nodes[k]).norm());
}

struct StageOutcome {
  bool converged = false;
  int iterations = 0;
};

// L-BFGS on the interior nodes. Infeasible trial points cost +inf, so the
// backtracking line search keeps every node inside the domain.
StageOutcome lbfgs_stage(const Domain& d, std::vector<CPoint>& nodes,
                         const std::vector<int>& free, const OptimizerParams& prm, long& evals) {
  const std::size_t M = nodes.size();
  // Nodes move only within their normal hyperplanes: sliding along the curve
  // would let the optimizer exploit the fixed quadrature rule.
  const std::vector<CPoint> base = nodes;
  std::vector<NodeFrame> frames(M);
  for (std::size_t k = 1; k + 1 < M; ++k) {
    frames[k] = normal_frame(base[k + 1] - base[k - 1], free, d.dim);
  }
  const std::size_t nb = M > 2 ? frames[1].dirs.size() : 0;
  const Eigen::Index nv = static_cast<Eigen::Index>((M - 2) * nb);
  StageOutcome out;
  if (nv == 0) {
    out.converged = true;
    return out;
  }
  SegmentCost cost{d};

  auto unpack = [&](const Eigen::VectorXd& x, std::vector<CPoint>& ns) {
    for (std::size_t k = 1; k + 1 < M; ++k) {
      ns[k] = base[k];
      for (std::size_t b = 0; b < nb; ++b) ns[k] += x[(k - 1) * nb + b] * frames[k].dirs[b];
    }
  };
  auto segments = [&](const std::vector<CPoint>& ns, std::vector<Scalar>& seg,
                      std::vector<SegmentProbe>& probes) {
    for (std::size_t k = 1; k + 1 < M; ++k) {
      if (!contains(d, ns[k])) return kInf;
    }
    Scalar total = 0.0;
    for (std::size_t k = 0; k + 1 < M; ++k) {
      seg[k] = cost(ns[k], ns[k + 1], probes[k]);
      total += seg[k];
    }
    return total;
  };
  auto gradient = [&](std::vector<CPoint>& ns, const std::vector<SegmentProbe>& probes) {
    Eigen::VectorXd g(nv);
    for (std::size_t k = 1; k + 1 < M; ++k) {
      const Scalar h = 1e-6 * std::max(node_scale(ns, k), 1e-12);
      auto local = [&] {
        return cost.at(ns[k - 1], ns[k], probes[k - 1]) + cost.at(ns[k], ns[k + 1], probes[k]);
      };
      Scalar f0 = kInf;
      for (std::size_t b = 0; b < nb; ++b) {
        Scalar f[2];
        for (int side = 0; side < 2; ++side) {
          const Scalar step = side == 0 ? h : -h;
          const CPoint saved = ns[k];
          ns[k] += step * frames[k].dirs[b];
          f[side] = contains(d, ns[k]) ? local() : kInf;
          ns[k] = saved;
        }
        if (!(std::isfinite(f[0]) && std::isfinite(f[1])) && !std::isfinite(f0)) f0 = local();
        Scalar gv = 0.0;
        if (std::isfinite(f[0]) && std::isfinite(f[1])) gv = (f[0] - f[1]) / (2.0 * h);
        else if (std::isfinite(f[0])) gv = (f[0] - f0) / h;
        else if (std::isfinite(f[1])) gv = (f0 - f[1]) / h;
        g[(k - 1) * nb + b] = gv;
      }
    }
    return g;
  };

  std::vector<Scalar> seg(M - 1), trial_seg(M - 1);
  std::vector<SegmentProbe> probes(M - 1), trial_probes(M - 1);
  Scalar F = segments(nodes, seg, probes);
  if (!std::isfinite(F)) throw CurveError("initial curve leaves the domain");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd g = gradient(nodes, probes);

  constexpr int kMemory = 8;
  std::vector<Eigen::VectorXd> S, Y;
  std::vector<Scalar> rho;
  std::vector<CPoint> trial = nodes;
  int quiet = 0;

  for (int it = 0; it < prm.max_iterations; ++it) {
    out.iterations = it + 1;
    // Diagonal preconditioner: squared local scale of each node. Near the
    // boundary the metric blows up like 1/delta, and this evens out the curvature.
    Eigen::VectorXd D(nv);
    for (std::size_t k = 1; k + 1 < M; ++k) {
      const Scalar sc = node_scale(nodes, k);
      D.segment(static_cast<Eigen::Index>((k - 1) * nb), static_cast<Eigen::Index>(nb))
          .setConstant(sc * sc);
    }
    // Two-loop recursion with H0 = gamma D.
    Eigen::VectorXd dir = -g;
    std::vector<Scalar> alpha_hist(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha_hist[i] = rho[i] * S[i].dot(dir);
      dir -= alpha_hist[i] * Y[i];
    }
    dir = dir.cwiseProduct(D);
    if (!S.empty()) dir *= S.back().dot(Y.back()) / Y.back().cwiseProduct(D).dot(Y.back());
    for (std::size_t i = 0; i < S.size(); ++i) {
      const Scalar beta = rho[i] * Y[i].dot(dir);
      dir += (alpha_hist[i] - beta) * S[i];
    }
    Scalar gd = g.dot(dir);
    if (!(gd < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      dir = -g.cwiseProduct(D);
      gd = g.dot(dir);
      if (gd == 0.0) {
        out.converged = true;
        break;
      }
    }
    // Cap the step so that no node moves by more than half its local scale.
    Scalar step = S.empty() ? kInf : 1.0;
    for (std::size_t k = 1; k + 1 < M; ++k) {
      const Scalar move = dir.segment(static_cast<Eigen::Index>((k - 1) * nb),
                                      static_cast<Eigen::Index>(nb)).norm();
      if (move > 0.0) step = std::min(step, 0.5 * node_scale(nodes, k) / move);
    }
    if (!std::isfinite(step)) break;

    bool accepted = false;
    Scalar Fnew = F;
    Eigen::VectorXd xnew;
    for (int ls = 0; ls < 40; ++ls) {
      xnew = x + step * dir;
      unpack(xnew, trial);
      Fnew = segments(trial, trial_seg, trial_probes);
      if (std::isfinite(Fnew) && Fnew <= F + 1e-4 * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent along the quasi-Newton direction: retry once from steepest descent.
      if (!S.empty()) {
        S.clear();
        Y.clear();
        rho.clear();
        continue;
      }
      out.converged = true;
      break;
    }
    nodes.swap(trial);
    trial = nodes;
    seg.swap(trial_seg);
    probes.swap(trial_probes);
    const Eigen::VectorXd gnew = gradient(nodes, probes);
    const Eigen::VectorXd s = xnew - x;
    const Eigen::VectorXd y = gnew - g;
    const Scalar sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(S.size()) == kMemory) {
        S.erase(S.begin());
        Y.erase(Y.begin());
        rho.erase(rho.begin());
      }
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
    }
    const Scalar gain = (F - Fnew) / std::max(F, 1e-300);
    x = xnew;
    g = gnew;
    F = Fnew;
    quiet = gain < 0.1 * prm.tol_dist ? quiet + 1 : 0;
    if (quiet >= 3) {
      out.converged = true;
      break;
    }
  }
  evals += cost.evals;
  return out;
}

std::vector<CPoint> insert_midpoints(const std::vector<CPoint>& nodes) {
  std::vector<CPoint> out;
  out.reserve(2 * nodes.size() - 1);
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    out.push_back(nodes[k]);
    out.push_back(0.5 * (nodes[k] + nodes[k + 1]));
  }
  out.push_back(nodes.back());
  return out;
}

Curve from_nodes(const Domain& d, std::vector<CPoint> nodes) {
  Curve c;
  c.domain = d;
  c.nodes = std::move(nodes);
  const std::size_t M = c.nodes.size();
  c.t.resize(M);
  for (std::size_t k = 0; k < M; ++k) c.t[k] = M > 1 ? Scalar(k) / Scalar(M - 1) : 0.0;
  return c;
}

bool lexicographic_less(const std::vector<CPoint>& a, const std::vector<CPoint>& b) {
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
    for (Eigen::Index i = 0; i < a[k].size(); ++i) {
      if (a[k][i].real() != b[k][i].real()) return a[k][i].real() < b[k][i].real();
      if (a[k][i].imag() != b[k][i].imag()) return a[k][i].imag() < b[k][i].imag();
    }
  }
  return a.size() < b.size();
}

void require_inside(const Domain& d, const CPoint& z) {
  if (!contains(d, z)) throw DomainError("point is not inside " + describe(d));
}

bool is_corner(const CPoint& prev, const CPoint& at, const CPoint& next) {
  const CTangent u = at - prev, v = next - at;
  const Scalar nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return false;
  // Collinear and same direction iff |<u, v>| = |u||v| with positive real part.
  const Complex uv = v.dot(u);
  return !(uv.real() > 0.0 && std::abs(uv.real() - nu * nv) <= 1e-12 * nu * nv &&
           std::abs(uv.imag()) <= 1e-12 * nu * nv);
}

}  // namespace

// ---------------------------------------------------------------------------

Curve straight_curve(const Domain& d, const CPoint& p, const CPoint& q, int count) {
  if (count < 2) throw InputError("a curve needs at least two nodes");
  std::vector<CPoint> nodes;
  for (int k = 0; k < count; ++k) nodes.push_back(p + (Scalar(k) / (count - 1)) * (q - p));
  return from_nodes(d, std::move(nodes));
}

CPoint evaluate(const Curve& c, Scalar s) {
  if (c.nodes.empty()) throw CurveError("empty curve");
  if (s <= c.t.front()) return c.nodes.front();
  if (s >= c.t.back()) return c.nodes.back();
  const auto it = std::upper_bound(c.t.begin(), c.t.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - c.t.begin());
  const Scalar span = c.t[k] - c.t[k - 1];
  const Scalar w = span > 0.0 ? (s - c.t[k - 1]) / span : 0.0;
  return c.nodes[k - 1] + w * (c.nodes[k] - c.nodes[k - 1]);
}

void validate(const Curve& c, Scalar margin) {
  if (c.nodes.size() < 2) throw CurveError("a curve needs at least two nodes");
  if (c.t.size() != c.nodes.size()) throw CurveError("parameter and node counts differ");
  for (const auto& z : c.nodes) {
    if (!contains(c.domain, z) || boundary_distance(c.domain, z) < margin) {
      throw CurveError("curve node outside " + describe(c.domain));
    }
  }
}

OptimizeResult optimize_curve_detailed(const Domain& d, const CPoint& p, const CPoint& q,
                                       const OptimizerParams& prm, const std::vector<int>& frozen) {
  if (prm.initial_nodes < 3) throw InputError("initial_nodes must be >= 3");
  if (!(prm.tol_dist > 0.0)) throw InputError("tol_dist must be positive");
  require_inside(d, p);
  require_inside(d, q);
  OptimizeResult best;
  if ((p - q).squaredNorm() == 0.0) {
    best.curve = straight_curve(d, p, q, 2);
    best.length = {0.0, 0.0};
    best.stage_lengths = {0.0};
    return best;
  }
  std::vector<int> free;
  for (int i = 0; i < d.dim; ++i) {
    if (std::find(frozen.begin(), frozen.end(), i) == frozen.end()) free.push_back(i);
  }
  const Curve start =
      reparametrize_arclength(straight_curve(d, p, q, 2), prm.initial_nodes, prm.tol_quad);

  bool have_best = false;
  for (int restart = 0; restart < std::max(prm.restarts, 1); ++restart) {
    std::vector<CPoint> nodes = start.nodes;
    if (restart > 0) {
      // Seeded bump away from the straight segment.
      std::mt19937_64 rng(prm.seed * 1000003ULL + static_cast<unsigned>(restart));
      std::normal_distribution<Scalar> normal;
      CTangent dir(d.dim);
      for (int i = 0; i < d.dim; ++i) dir[i] = Complex(normal(rng), normal(rng));
      for (int i : frozen) dir[i] = 0.0;
      dir /= std::max(dir.norm(), 1e-300);
      Scalar amp = 0.3 * boundary_distance(d, 0.5 * (p + q));
      for (int tries = 0; tries < 60; ++tries, amp *= 0.5) {
        std::vector<CPoint> bent = start.nodes;
        bool ok = true;
        for (std::size_t k = 1; k + 1 < bent.size(); ++k) {
          bent[k] += amp * std::sin(kPi * start.t[k]) * dir;
          ok = ok && contains(d, bent[k]);
        }
        if (ok) {
          nodes = bent;
          break;
        }
      }
    }
    OptimizeResult run;
    Curve accepted;
    Scalar accepted_len = kInf;
    bool converged = false;
    for (int stage = 0; stage <= prm.max_refinements; ++stage) {
      if (stage > 0) nodes = insert_midpoints(accepted.nodes);
      const StageOutcome so = lbfgs_stage(d, nodes, free, prm, run.metric_evaluations);
      Curve cur = from_nodes(d, nodes);
      const Interval len = curve_length(cur, prm.tol_quad);
      if (len.hi > accepted_len) {
        converged = true;  // refinement no longer helps; keep the previous stage
        break;
      }
      const Scalar gain = stage == 0 ? kInf : (accepted_len - len.hi) / accepted_len;
      accepted = std::move(cur);
      accepted_len = len.hi;
      run.length = len;
      run.stage_lengths.push_back(len.hi);
      if (gain < prm.tol_dist || (prm.max_refinements == 0 && so.converged)) {
        converged = true;
        break;
      }
    }
    run.curve = std::move(accepted);
    run.converged = converged;
    const bool better =
        !have_best || run.length.hi < best.length.hi ||
        (run.length.hi == best.length.hi && lexicographic_less(run.curve.nodes, best.curve.nodes));
    const long evals = best.metric_evaluations + run.metric_evaluations;
    if (better) {
      best = std::move(run);
      have_best = true;
    }
    best.metric_evaluations = evals;
  }
  return best;
}

Curve optimize_curve(const Domain& d, const CPoint& p, const CPoint& q,
                     const OptimizerParams& params) {
  return optimize_curve_detailed(d, p, q, params).curve;
}

Curve with_arclength_parameter(const Curve& c, Scalar tol_quad) {
  Curve out = c;
  const auto cum = cumulative_length(c, tol_quad);
  for (std::size_t k = 0; k < cum.size(); ++k) out.t[k] = cum[k].hi;
  out.param = Parametrization::KobayashiArclength;
  return out;
}

Curve reparametrize_arclength(const Curve& c, int count, Scalar tol_quad) {
  if (c.nodes.size() < 2) throw InputError("curve needs at least two nodes");
  if (count <= 0) count = static_cast<int>(c.nodes.size());
  if (count < 2) throw InputError("reparametrization needs at least two nodes");
  const Domain& d = c.domain;
  for (const auto& z : c.nodes) {
    if (!contains(d, z)) throw CurveError("curve node outside " + describe(d));
  }

  // Fine table of cumulative upper length: `pieces` sub-intervals per segment,
  // each integrated adaptively. A fixed rule is not enough here: on segments that
  // run into the boundary the last piece carries most of the length.
  constexpr int pieces = 32;
  const std::size_t S = c.nodes.size() - 1;
  std::vector<Scalar> table{0.0};
  std::vector<Scalar> seg_start(S + 1, 0.0);
  auto at = [&](std::size_t k, Scalar s) -> CPoint {
    return c.nodes[k] + s * (c.nodes[k + 1] - c.nodes[k]);
  };
  for (std::size_t k = 0; k < S; ++k) {
    for (int j = 0; j < pieces; ++j) {
      const Scalar len = segment_length(d, at(k, Scalar(j) / pieces), at(k, Scalar(j + 1) / pieces),
                                        tol_quad).hi;
      table.push_back(table.back() + len);
    }
    seg_start[k + 1] = table.back();
  }
  const Scalar total = table.back();
  if (!(total > 0.0)) throw InputError("cannot reparametrize a zero-length curve");

  // Inverse of the cumulative length: piece lookup then safeguarded Newton inside
  // the piece; the derivative of the length in s is the metric along the segment.
  auto locate = [&](Scalar target) -> CPoint {
    if (target <= 0.0) return c.nodes.front();
    if (target >= total) return c.nodes.back();
    const auto it = std::upper_bound(table.begin(), table.end(), target);
    std::size_t idx = static_cast<std::size_t>(it - table.begin()) - 1;
    idx = std::min(idx, S * pieces - 1);
    const std::size_t k = idx / pieces;
    const int j = static_cast<int>(idx % pieces);
    const Scalar s0 = Scalar(j) / pieces, s1 = Scalar(j + 1) / pieces;
    const Scalar want = target - table[idx];
    const CPoint start = at(k, s0);
    const CTangent v = c.nodes[k + 1] - c.nodes[k];
    const Scalar piece = table[idx + 1] - table[idx];
    Scalar lo = s0, hi = s1;
    Scalar s = s0 + (s1 - s0) * std::clamp(want / piece, 0.0, 1.0);
    for (int it2 = 0; it2 < 60 && hi - lo > 1e-15; ++it2) {
      const CPoint z = at(k, s);
      const Scalar g = segment_length(d, start, z, tol_quad).hi - want;
      if (std::abs(g) <= 1e-13 * total) break;
      (g < 0.0 ? lo : hi) = s;
      const Scalar slope = infinitesimal_metric(d, z, v).hi;
      const Scalar next = s - g / slope;
      s = (slope > 0.0 && next > lo && next < hi) ? next : 0.5 * (lo + hi);
    }
    return at(k, s);
  };

  struct Entry {
    Scalar t;
    CPoint z;
  };
  std::vector<Entry> entries;
  for (int m = 0; m < count; ++m) {
    const Scalar target = total * Scalar(m) / Scalar(count - 1);
    entries.push_back({target, m == 0 ? c.nodes.front() : m == count - 1 ? c.nodes.back()
                                                                      : locate(target)});
  }
  for (std::size_t k = 1; k < S; ++k) {
    if (is_corner(c.nodes[k - 1], c.nodes[k], c.nodes[k + 1])) {
      entries.push_back({seg_start[k], c.nodes[k]});
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.t < b.t; });
  Curve out;
  out.domain = d;
  out.param = Parametrization::KobayashiArclength;
  for (auto& e : entries) {
    if (!out.t.empty() && e.t == out.t.back() && (e.z - out.nodes.back()).norm() == 0.0) continue;
    out.t.push_back(e.t);
    out.nodes.push_back(e.z);
  }
  return out;
}

Interval node_distance(const Curve& c, const std::vector<Interval>& cum, std::size_t i,
                       std::size_t j) {
  if (i > j) std::swap(i, j);
  if (i == j) return {0.0, 0.0};
  const CPoint& a = c.nodes[i];
  const CPoint& b = c.nodes[j];
  if (auto e = exact_distance(c.domain, a, b)) return outward(*e, *e);
  const Scalar lo = minorant_lower_bound(c.domain, a, b);
  // Upper length of the subarc. Both cumulative ends carry the same rounding
  // history up to node i, so the difference needs only a few ulps of slack.
  const Scalar hi = (cum[j].hi - cum[i].hi) + 8.0 * std::numeric_limits<Scalar>::epsilon() * cum[j].hi;
  return {lo, std::max(lo, hi)};
}

namespace {

template <class Visit>
void for_pairs(std::size_t M, int n_pairs, Visit&& visit) {
  const std::size_t total = M * (M - 1) / 2;
  const std::size_t cap = static_cast<std::size_t>(std::max(n_pairs, 1));
  std::size_t counter = 0, taken = 0;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i + 1; j < M; ++j, ++counter) {
      if (total > cap && counter * cap / total < taken) continue;
      ++taken;
      visit(i, j);
    }
  }
}

std::vector<Scalar> parameters(const Curve& c, const std::vector<Interval>& cum) {
  if (c.param == Parametrization::KobayashiArclength) return c.t;
  std::vector<Scalar> t;
  for (const auto& x : cum) t.push_back(x.hi);
  return t;
}

}  // namespace

QuasiGeodesicCertificate certify_quasi_geodesic(const Domain& d, const Curve& c0, Scalar A, Scalar B,
                                                int n_pairs) {
  if (!(A >= 1.0) || !(B >= 0.0)) throw InputError("certification needs A >= 1 and B >= 0");
  Curve c = c0;
  c.domain = d;
  const auto cum = cumulative_length(c);
  const auto t = parameters(c, cum);
  QuasiGeodesicCertificate cert;
  cert.A = A;
  cert.B = B;
  cert.worst_lower_margin = kInf;
  cert.worst_upper_margin = kInf;
  for_pairs(c.nodes.size(), n_pairs, [&](std::size_t i, std::size_t j) {
    const Interval dist = node_distance(c, cum, i, j);
    const Scalar dt = std::abs(t[j] - t[i]);
    cert.worst_lower_margin = std::min(cert.worst_lower_margin, dist.lo - (dt / A - B));
    cert.worst_upper_margin = std::min(cert.worst_upper_margin, A * dt + B - dist.hi);
    ++cert.samples;
  });
  if (cert.samples == 0) cert.worst_lower_margin = cert.worst_upper_margin = 0.0;
  cert.pass = cert.worst_lower_margin >= 0.0 && cert.worst_upper_margin >= 0.0;
  return cert;
}

Scalar fit_quasi_geodesic_A(const Domain& d, const Curve& c0, Scalar B, int n_pairs) {
  Curve c = c0;
  c.domain = d;
  const auto cum = cumulative_length(c);
  const auto t = parameters(c, cum);
  Scalar A = 1.0;
  for_pairs(c.nodes.size(), n_pairs, [&](std::size_t i, std::size_t j) {
    const Scalar dt = std::abs(t[j] - t[i]);
    if (dt == 0.0) return;
    const Interval dist = node_distance(c, cum, i, j);
    if (dist.lo + B > 0.0) A = std::max(A, dt / (dist.lo + B));
    else A = kInf;
    A = std::max(A, (dist.hi - B) / dt);
  });
  return A;
}

Curve boundary_segment(const Domain& d, const CPoint& x, const CPoint& b, Scalar cut, int count) {
  require_inside(d, x);
  if (!(cut > 0.0 && cut < 1.0)) throw InputError("cut must lie in (0, 1)");
  if (b.size() != d.dim) throw InputError("boundary point dimension does not match domain");
  const CTangent u = b - x;
  if (u.squaredNorm() == 0.0) throw InputError("boundary point coincides with x");
  const Scalar t = ray_exit(d, x, u);
  if (contains(d, b) || !(std::abs(t - 1.0) <= 1e-8)) {
    throw InputError("point is not on the boundary of " + describe(d));
  }
  return reparametrize_arclength(straight_curve(d, x, x + cut * u, 2), count);
}

SigmaResult sigma_construction(const Domain& d, Scalar r, const OptimizerParams& prm) {
  const auto* f = std::get_if<FlatDomain>(&d.shape);
  if (!f) throw InputError("sigma construction requires a flat domain");
  const SliceGeometry sg = slice_geometry(*f, r);
  SigmaResult out;
  out.r = r;
  const OptimizeResult geo = optimize_curve_detailed(d, sg.p_r, sg.q_r, prm);
  out.geodesic = geo.curve;
  out.measured_sup = 0.0;
  for (const auto& z : geo.curve.nodes) out.measured_sup = std::max(out.measured_sup, z[1].real());
  out.r_prime = std::min(out.measured_sup, std::sqrt(r));
  const Scalar h = 2.0 * out.r_prime;
  const CPoint top_p = make_point({-f->a, h});
  const CPoint top_q = make_point({f->a, h});

  const Curve lp = reparametrize_arclength(straight_curve(d, sg.p_r, top_p, 2), 17, prm.tol_quad);
  const OptimizeResult mid = optimize_curve_detailed(d, top_p, top_q, prm, {1});
  const Curve lq = reparametrize_arclength(straight_curve(d, top_q, sg.q_r, 2), 17, prm.tol_quad);
  out.converged = geo.converged && mid.converged;

  std::vector<CPoint> nodes = lp.nodes;
  out.slice_begin = nodes.size() - 1;
  nodes.insert(nodes.end(), mid.curve.nodes.begin() + 1, mid.curve.nodes.end());
  out.slice_end = nodes.size() - 1;
  nodes.insert(nodes.end(), lq.nodes.begin() + 1, lq.nodes.end());
  out.curve = with_arclength_parameter(from_nodes(d, std::move(nodes)), prm.tol_quad);
  out.vertical_p = curve_length(lp, prm.tol_quad);
  out.slice = mid.length;
  out.vertical_q = curve_length(lq, prm.tol_quad);
  return out;
}

void write_curve_csv(std::ostream& os, const Curve& c, Scalar tol_quad) {
  const auto cum = cumulative_length(c, tol_quad);
  const int n = c.domain.dim;
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",re_z" << i << ",im_z" << i;
  os << ",cumulative_length_lo,cumulative_length_hi\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < c.nodes.size(); ++k) {
    os << c.t[k];
    for (int i = 0; i < n; ++i) os << ',' << c.nodes[k][i].real() << ',' << c.nodes[k][i].imag();
    os << ',' << cum[k].lo << ',' << cum[k].hi << '\n';
  }
}

}  // namespace kobalab
