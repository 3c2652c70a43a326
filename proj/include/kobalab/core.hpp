#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace kobalab {

using Scalar = double;
using Complex = std::complex<Scalar>;

inline constexpr Scalar kPi = 3.14159265358979323846;

/// A point of C^n. Components are finite complex numbers.
using CPoint = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
/// A tangent vector at a point of C^n; the zero vector is allowed.
using CTangent = CPoint;

/// Numerical tolerances shared across modules.
struct Tolerances {
  Scalar geom = 1e-10;  // boundary-distance accuracy (relative)
  Scalar quad = 1e-6;   // quadrature relative change
  Scalar dist = 1e-4;   // optimizer relative improvement
};

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class CurveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline CPoint make_point(std::initializer_list<Complex> coords) {
  CPoint z(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (const auto& c : coords) z[i++] = c;
  return z;
}

inline CPoint basis_vector(Eigen::Index n, Eigen::Index i) {
  CPoint e = CPoint::Zero(n);
  e[i] = 1.0;
  return e;
}

}  // namespace kobalab
