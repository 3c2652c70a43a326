#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kobalab/core.hpp"
#include "kobalab/domains.hpp"

namespace kobalab {

enum class ExperimentKind {
  MetricCheck,
  Distance,
  Geodesic,
  Certify,
  Boxing,
  BidiscWitness,
  FlatWitness,
  EllipsoidScan,
  DeltaScan,
};

std::string to_string(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

enum class OutputFormat { Csv, Report };

/// Thrown for malformed or incomplete configurations (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DomainConfig {
  std::string variant;  // disc | polydisc | ball | ellipsoid | box | flat; empty = kind default
  int n = 2;
  Scalar radius = 1.0;
  Scalar p = 2.0;
  int discs = 1;
  Scalar R = 1.0;
  Scalar alpha = 1.0;
  Scalar beta = 1.0;
  Scalar a = 0.5;
  std::optional<Scalar> sublevel;  // wrap in Sublevel(domain, height)

  bool operator==(const DomainConfig&) const = default;
};

Domain build_domain(const DomainConfig& c);

/// One experiment. Sections of the INI file: [experiment], [domain],
/// [parameters], [optimizer], [tolerances], [output]. Keys that are not listed
/// below are rejected.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Distance;
  unsigned seed = 1;
  int workers = 1;
  Scalar failure_budget = 0.01;  // tolerated fraction of skipped / non-converged items

  DomainConfig domain;

  // [parameters]; which ones are used depends on the kind
  int n = 0;                        // samples or quadruples
  std::vector<int> m_values;        // bidisc-witness
  std::vector<Scalar> r_values;     // flat-witness; boxing r; certify sigma r
  std::vector<Scalar> r_prime_values;  // boxing
  std::vector<Complex> point_p, point_q;  // distance, geodesic, certify (geodesic)
  std::vector<Complex> x, b;        // certify (boundary-segment)
  std::vector<Complex> z0;          // flat-witness (optional)
  Scalar cut = 1.0 - 1e-6;
  std::string curve = "geodesic";   // certify: geodesic | boundary-segment | sigma
  Scalar A = 1.0, B = 0.0;
  int n_pairs = 2000;
  std::vector<Scalar> depths{1e-1, 1e-2, 1e-3, 1e-4};
  Scalar exponent = 2.0;            // ellipsoid-scan
  int side_samples = 400;           // flat-witness

  // [optimizer] and the quadrature / optimizer tolerances; unset keys take the
  // kind's defaults (scans run a coarser optimizer than single distances).
  std::optional<int> initial_nodes;
  std::optional<int> max_refinements;
  std::optional<int> max_iterations;
  std::optional<int> restarts;

  // [tolerances]
  Scalar tol_geom = 1e-10;
  std::optional<Scalar> tol_quad;
  std::optional<Scalar> tol_dist;

  // [output]
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& c);

/// Throws ConfigError when a key required by the kind is missing or a value is
/// out of range. parse_config calls this.
void validate_config(const ExperimentConfig& c);

// Value syntax shared with the CLI: comma separated lists; complex numbers as
// "a", "bi", "a+bi" or "a-bi".
Complex parse_complex(const std::string& s);
std::string format_complex(Complex z);
std::string format_real(Scalar v);
CPoint config_point(const std::vector<Complex>& coords);

}  // namespace kobalab
