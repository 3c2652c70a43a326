#pragma once

#include <vector>

#include "kobalab/core.hpp"
#include "kobalab/domains.hpp"

namespace kobalab {

enum class Parametrization { Uniform, KobayashiArclength };

/// Piecewise-linear path through `nodes`. `t` holds the parameter value of each
/// node: uniform in [0, 1], or cumulative upper-metric length once the curve is
/// arclength parametrized.
struct Curve {
  std::vector<CPoint> nodes;
  std::vector<Scalar> t;
  Parametrization param = Parametrization::Uniform;
  Domain domain;

  std::size_t size() const { return nodes.size(); }
  const CPoint& front() const { return nodes.front(); }
  const CPoint& back() const { return nodes.back(); }
};

/// Straight curve p -> q with `count` uniformly spaced nodes.
Curve straight_curve(const Domain& d, const CPoint& p, const CPoint& q, int count = 2);

/// Point at parameter value s (linear interpolation between nodes).
CPoint evaluate(const Curve& c, Scalar s);

/// Throws CurveError unless every node lies inside the domain with at least `margin`.
void validate(const Curve& c, Scalar margin = 0.0);

struct OptimizerParams {
  int initial_nodes = 17;
  int max_refinements = 6;
  int max_iterations = 200;  // quasi-Newton iterations per stage
  int restarts = 1;          // independent starts, reduced by minimum length
  unsigned seed = 1;
  Scalar tol_dist = 1e-4;    // relative improvement that ends refinement
  Scalar margin = 1e-9;      // minimal boundary distance of every node
  Scalar tol_quad = 1e-6;
};

}  // namespace kobalab
