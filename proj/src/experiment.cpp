#include "kobalab/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "kobalab/geodesics.hpp"
#include "kobalab/hyperbolicity.hpp"
#include "kobalab/kobayashi.hpp"

#ifndef KOBALAB_VERSION
#define KOBALAB_VERSION "dev"
#endif

namespace kobalab {

namespace {

using json = nlohmann::ordered_json;
using K = ExperimentKind;

OptimizerParams single_optimizer(const ExperimentConfig& c) {
  OptimizerParams p;
  p.initial_nodes = c.initial_nodes.value_or(p.initial_nodes);
  p.max_refinements = c.max_refinements.value_or(p.max_refinements);
  p.max_iterations = c.max_iterations.value_or(p.max_iterations);
  p.restarts = c.restarts.value_or(p.restarts);
  p.tol_dist = c.tol_dist.value_or(p.tol_dist);
  p.tol_quad = c.tol_quad.value_or(p.tol_quad);
  p.seed = c.seed;
  return p;
}

ScanSchedule scan_schedule(const ExperimentConfig& c) {
  ScanSchedule s;
  s.depths = c.depths;
  s.workers = c.workers;
  auto& p = s.optimizer;
  p.initial_nodes = c.initial_nodes.value_or(p.initial_nodes);
  p.max_refinements = c.max_refinements.value_or(p.max_refinements);
  p.max_iterations = c.max_iterations.value_or(p.max_iterations);
  p.restarts = c.restarts.value_or(p.restarts);
  p.tol_dist = c.tol_dist.value_or(p.tol_dist);
  p.tol_quad = c.tol_quad.value_or(p.tol_quad);
  p.seed = c.seed;
  return s;
}

Domain domain_or(const ExperimentConfig& c, const DomainConfig& fallback) {
  return build_domain(c.domain.variant.empty() ? fallback : c.domain);
}

DomainConfig default_box() {
  DomainConfig d;
  d.variant = "box";
  return d;
}

DomainConfig default_flat() {
  DomainConfig d;
  d.variant = "flat";
  return d;
}

Table curve_table(const Curve& c, Scalar tol_quad) {
  Table t;
  t.name = "curve";
  t.columns.push_back("t");
  const auto n = c.nodes.empty() ? 0 : c.nodes.front().size();
  for (Eigen::Index i = 1; i <= n; ++i) {
    t.columns.push_back("re_z" + std::to_string(i));
    t.columns.push_back("im_z" + std::to_string(i));
  }
  t.columns.push_back("cumulative_length_lo");
  t.columns.push_back("cumulative_length_hi");
  const auto cum = cumulative_length(c, tol_quad);
  for (std::size_t k = 0; k < c.size(); ++k) {
    std::vector<Cell> row{c.t[k]};
    for (Eigen::Index i = 0; i < n; ++i) {
      row.push_back(c.nodes[k][i].real());
      row.push_back(c.nodes[k][i].imag());
    }
    row.push_back(cum[k].lo);
    row.push_back(cum[k].hi);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CTangent gaussian_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> g;
  CTangent v(n);
  for (int i = 0; i < n; ++i) {
    const Scalar re = g(rng);
    const Scalar im = g(rng);
    v[i] = Complex(re, im);
  }
  return v;
}

// --------------------------------------------------------------------------

void run_metric_check(const ExperimentConfig& c, ReportEnvelope& r) {
  const Domain d = build_domain(c.domain);
  const int n = dimension(d);
  const bool exact = has_exact_metric(d);
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<Scalar> unit(0.0, 1.0);
  const CPoint center = domain_center(d);
  constexpr Scalar kTol = 1e-9;

  Table t{"metric_check",
          {"sample", "metric_lo", "metric_hi", "sandwich_lo", "sandwich_hi", "exact", "violation"},
          {}};
  int violations = 0;
  Scalar worst = 0.0;  // largest relative excursion outside the sandwich
  for (int s = 0; s < c.n; ++s) {
    const CTangent u = gaussian_vector(n, rng);
    const Scalar frac = 0.02 + 0.96 * unit(rng);
    const CPoint z = center + (frac * ray_exit(d, center, u)) * u;
    const CTangent v = gaussian_vector(n, rng) * std::exp(4.0 * unit(rng) - 2.0);
    const Scalar delta = line_boundary_distance(d, z, v, c.tol_geom);
    const Scalar norm = v.norm();
    const Interval sandwich{norm / (2.0 * delta), norm / delta};
    const Interval k = infinitesimal_metric(d, z, v, c.tol_geom);
    const Scalar below = (sandwich.lo - k.hi) / sandwich.lo;
    const Scalar above = (k.lo - sandwich.hi) / sandwich.hi;
    worst = std::max({worst, below, above});
    const bool bad = below > kTol || above > kTol || !(k.lo <= k.hi * (1 + kTol));
    violations += bad;
    t.rows.push_back({long(s), k.lo, k.hi, sandwich.lo, sandwich.hi, exact, bad});
  }
  r.items = c.n;
  r.summary = {{"samples", long(c.n)},
               {"violations", long(violations)},
               {"exact_metric", exact},
               {"max_relative_excursion", worst},
               {"tolerance", kTol}};
  r.tables.push_back(std::move(t));
}

void run_distance(const ExperimentConfig& c, ReportEnvelope& r) {
  const Domain d = build_domain(c.domain);
  const OptimizerParams prm = single_optimizer(c);
  const CPoint p = config_point(c.point_p), q = config_point(c.point_q);
  const DistanceEstimate est = distance(d, p, q, prm);
  const auto ex = exact_distance(d, p, q);
  Table t{"distance",
          {"distance_lo", "distance_hi", "exact", "lower_bound_source", "converged", "nodes"},
          {}};
  t.rows.push_back({est.bound.lo, est.bound.hi, ex ? Cell(*ex) : Cell(std::string()),
                    est.lower_bound_source, est.converged, long(est.witness_curve.size())});
  r.items = 1;
  r.non_converged = !est.converged;
  r.summary = {{"distance_lo", est.bound.lo},
               {"distance_hi", est.bound.hi},
               {"lower_bound_source", est.lower_bound_source}};
  r.tables.push_back(std::move(t));
  r.tables.push_back(curve_table(est.witness_curve, prm.tol_quad));
}

void run_geodesic(const ExperimentConfig& c, ReportEnvelope& r) {
  const Domain d = build_domain(c.domain);
  const OptimizerParams prm = single_optimizer(c);
  const OptimizeResult res =
      optimize_curve_detailed(d, config_point(c.point_p), config_point(c.point_q), prm);
  const Curve curve = reparametrize_arclength(res.curve, 0, prm.tol_quad);
  r.items = 1;
  r.non_converged = !res.converged;
  r.summary = {{"length_lo", res.length.lo},
               {"length_hi", res.length.hi},
               {"nodes", long(curve.size())},
               {"stages", long(res.stage_lengths.size())},
               {"metric_evaluations", res.metric_evaluations},
               {"converged", res.converged}};
  r.tables.push_back(curve_table(curve, prm.tol_quad));
}

void run_certify(const ExperimentConfig& c, ReportEnvelope& r) {
  const OptimizerParams prm = single_optimizer(c);
  Domain d;
  Curve curve;
  bool converged = true;
  if (c.curve == "sigma") {
    d = domain_or(c, default_flat());
    const SigmaResult s = sigma_construction(d, c.r_values.front(), prm);
    curve = s.curve;
    converged = s.converged;
    r.summary.push_back({"r_prime", s.r_prime});
  } else if (c.curve == "boundary-segment") {
    d = build_domain(c.domain);
    curve = boundary_segment(d, config_point(c.x), config_point(c.b), c.cut);
  } else {
    d = build_domain(c.domain);
    const OptimizeResult res =
        optimize_curve_detailed(d, config_point(c.point_p), config_point(c.point_q), prm);
    curve = reparametrize_arclength(res.curve, 0, prm.tol_quad);
    converged = res.converged;
  }
  const QuasiGeodesicCertificate cert = certify_quasi_geodesic(d, curve, c.A, c.B, c.n_pairs);
  const Scalar fitted = fit_quasi_geodesic_A(d, curve, c.B, c.n_pairs);
  Table t{"certificate",
          {"curve", "A", "B", "samples", "worst_lower_margin", "worst_upper_margin", "pass",
           "fitted_A"},
          {}};
  t.rows.push_back({c.curve, cert.A, cert.B, long(cert.samples), cert.worst_lower_margin,
                    cert.worst_upper_margin, cert.pass, fitted});
  r.items = 1;
  r.non_converged = !converged;
  r.summary.insert(r.summary.begin(), {{"pass", cert.pass}, {"fitted_A", fitted}});
  r.tables.push_back(std::move(t));
  r.tables.push_back(curve_table(curve, prm.tol_quad));
}

void run_boxing(const ExperimentConfig& c, ReportEnvelope& r) {
  const Domain d = domain_or(c, default_box());
  const OptimizerParams prm = single_optimizer(c);
  const int n = dimension(d);
  Table t{"boxing",
          {"r", "r_prime", "bound", "measured_lo", "measured_hi", "holds", "converged"},
          {}};
  int failures = 0;
  for (std::size_t i = 0; i < c.r_values.size(); ++i) {
    CPoint p = CPoint::Zero(n), q = CPoint::Zero(n);
    p[n - 1] = c.r_values[i];
    q[n - 1] = c.r_prime_values[i];
    const Scalar bound = 0.5 * std::abs(std::log(c.r_prime_values[i] / c.r_values[i]));
    const DistanceEstimate est = distance(d, p, q, prm);
    const bool holds = est.bound.lo >= bound - 1e-9 && est.bound.hi >= est.bound.lo;
    failures += !holds;
    r.non_converged += !est.converged;
    t.rows.push_back({c.r_values[i], c.r_prime_values[i], bound, est.bound.lo, est.bound.hi, holds,
                      est.converged});
  }
  r.items = static_cast<int>(c.r_values.size());
  r.summary = {{"pairs", long(r.items)}, {"failures", long(failures)}};
  r.tables.push_back(std::move(t));
}

Table witness_table(const WitnessSeries& s, const std::string& parameter, bool flat) {
  Table t{s.name, {parameter, "value_lo", "value_hi"}, {}};
  if (flat) {
    for (const char* col : {"far_bound", "near_bound", "r_prime"}) t.columns.push_back(col);
  } else {
    t.columns.push_back("analytic");
  }
  t.columns.push_back("flagged");
  t.columns.push_back("monotone");
  for (const auto& row : s.rows) {
    std::vector<Cell> cells{flat ? Cell(row.parameter) : Cell(std::lround(row.parameter)),
                            row.value.lo, row.value.hi};
    if (flat) {
      cells.insert(cells.end(), {row.far_bound, row.near_bound, row.r_prime});
    } else {
      cells.push_back(row.analytic ? Cell(*row.analytic) : Cell(std::string()));
    }
    cells.push_back(row.flagged);
    cells.push_back(s.increasing);
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void run_witness(const ExperimentConfig& c, ReportEnvelope& r) {
  WitnessSeries s;
  const bool flat = c.kind == K::FlatWitness;
  if (flat) {
    const Domain d = domain_or(c, default_flat());
    FlatWitnessParams prm;
    prm.optimizer = single_optimizer(c);
    prm.side_samples = c.side_samples;
    std::optional<CPoint> z0;
    if (!c.z0.empty()) z0 = config_point(c.z0);
    s = flat_witness(d, c.r_values, z0, prm);
  } else {
    s = bidisc_witness(c.m_values);
  }
  r.items = static_cast<int>(s.rows.size());
  for (const auto& row : s.rows) r.non_converged += row.flagged;
  r.summary = {{"series", s.name}, {"rows", long(r.items)}, {"monotone", s.increasing}};
  if (s.rows.size() >= 2)
    r.summary.push_back({"growth", s.rows.back().value.lo - s.rows.front().value.lo});
  r.tables.push_back(witness_table(s, flat ? "r" : "m", flat));
}

void append_scan(const DeltaScanReport& s, const std::string& label, Table& batches,
                 Table& histogram, Table& quadruples) {
  for (const auto& b : s.batches)
    batches.rows.push_back({label, b.depth, long(b.quadruples), long(b.skipped), b.max_measured,
                            b.max_delta.lo, b.max_delta.hi});
  for (const auto& h : s.histogram) histogram.rows.push_back({label, h.lo, h.hi, long(h.count)});
  long index = 0;
  for (const auto& q : s.quadruples)
    quadruples.rows.push_back({label, index++, s.batches[q.batch].depth, q.measured, q.delta.lo,
                               q.delta.hi, q.skipped});
}

bool strictly_increasing(const DeltaScanReport& s) {
  for (std::size_t i = 1; i < s.batches.size(); ++i)
    if (!(s.batches[i].max_measured > s.batches[i - 1].max_measured)) return false;
  return !s.batches.empty();
}

void run_scan(const ExperimentConfig& c, ReportEnvelope& r) {
  const ScanSchedule sch = scan_schedule(c);
  Table batches{"batches",
                {"domain", "depth", "quadruples", "skipped", "max_measured", "max_delta_lo",
                 "max_delta_hi"},
                {}};
  Table histogram{"histogram", {"domain", "bucket_lo", "bucket_hi", "count"}, {}};
  Table quadruples{"quadruples",
                   {"domain", "index", "depth", "measured", "delta_lo", "delta_hi", "skipped"},
                   {}};
  auto add_flags = [&](const DeltaScanReport& s, const std::string& prefix) {
    r.items += s.n_quadruples + s.skipped;
    r.skipped += s.skipped;
    r.non_converged += s.non_converged;
    r.summary.push_back({prefix + "quadruples", long(s.n_quadruples)});
    r.summary.push_back({prefix + "skipped", long(s.skipped)});
    r.summary.push_back({prefix + "delta4_max_measured", s.delta4_max_measured});
    r.summary.push_back({prefix + "delta4_max_lo", s.delta4_max_lo});
    r.summary.push_back({prefix + "delta4_max_hi", s.delta4_max_hi});
  };
  if (c.kind == K::EllipsoidScan) {
    const EllipsoidScanReport e = ellipsoid_scan(c.exponent, c.n, sch, c.seed);
    r.domain = e.ellipsoid.domain;
    append_scan(e.ellipsoid, "ellipsoid", batches, histogram, quadruples);
    append_scan(e.control, "control", batches, histogram, quadruples);
    add_flags(e.ellipsoid, "");
    add_flags(e.control, "control_");
    const auto& b = e.ellipsoid.batches;
    if (b.size() >= 2 && b[b.size() - 2].max_measured > 0)
      r.summary.push_back({"last_batch_ratio", b.back().max_measured / b[b.size() - 2].max_measured});
    const auto& cb = e.control.batches;
    r.summary.push_back({"control_increasing", strictly_increasing(e.control)});
    if (!cb.empty())
      r.summary.push_back({"control_growth", cb.back().max_measured - cb.front().max_measured});
    r.summary.push_back({"schedule", e.ellipsoid.schedule});
  } else {
    const Domain d = build_domain(c.domain);
    const DeltaScanReport s = delta_scan(d, c.n, sch, c.seed);
    append_scan(s, variant_name(d), batches, histogram, quadruples);
    add_flags(s, "");
    r.summary.push_back({"schedule", s.schedule});
  }
  r.tables.push_back(std::move(batches));
  r.tables.push_back(std::move(histogram));
  r.tables.push_back(std::move(quadruples));
}

// --------------------------------------------------------------------------

std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          if (v.find_first_of(",\"\n") == std::string::npos) return v;
          std::string q = "\"";
          for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
          return q + "\"";
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_real(v);
        } else {
          return std::to_string(v);
        }
      },
      c);
}

json cell_json(const Cell& c) {
  return std::visit([](const auto& v) { return json(v); }, c);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      const std::string& col = t.columns[i];
      if (ends_with(col, "_lo") && i + 1 < t.columns.size() &&
          t.columns[i + 1] == col.substr(0, col.size() - 3) + "_hi") {
        obj[col.substr(0, col.size() - 3)] = {{"lo", cell_json(row[i])}, {"hi", cell_json(row[i + 1])}};
        ++i;
      } else {
        obj[col] = cell_json(row[i]);
      }
    }
    rows.push_back(std::move(obj));
  }
  return {{"columns", t.columns}, {"rows", std::move(rows)}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

bool ReportEnvelope::within_budget() const {
  if (items == 0) return true;
  const int failed = std::max(skipped, non_converged);
  return static_cast<Scalar>(failed) <= config.failure_budget * static_cast<Scalar>(items);
}

std::string anchor(ExperimentKind kind) {
  switch (kind) {
    case K::MetricCheck:
      return "convex sandwich |v|/(2 delta_D(z,v)) <= K_D(z,v) <= |v|/delta_D(z,v)";
    case K::Distance:
      return "Kobayashi distance as the infimum of K-lengths of curves from p to q";
    case K::Geodesic:
      return "K-length minimizing curve between two points, arclength parametrized";
    case K::Certify:
      return "(A,B) quasi-geodesic: |t1-t2|/A - B <= d(c(t1),c(t2)) <= A|t1-t2| + B";
    case K::Boxing:
      return "product box: d((0,r),(0,r')) >= |log(r'/r)|/2 in the last coordinate";
    case K::BidiscWitness:
      return "bidisc triangles O, p_m, q_m: the geodesic midpoint drifts away from the other sides";
    case K::FlatWitness:
      return "flat boundary disc: sigma midpoint drifts away from the segments z0-p_r, z0-q_r";
    case K::EllipsoidScan:
      return "complex ellipsoid |z'|^2 + |z_n|^(2p) < 1 is Gromov hyperbolic (four-point probe)";
    case K::DeltaScan:
      return "four-point Gromov delta over samples approaching the boundary";
  }
  return "";
}

ReportEnvelope run(const ExperimentConfig& config) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();
  ReportEnvelope r;
  r.config = config;
  r.tool_version = KOBALAB_VERSION;
  r.anchor = anchor(config.kind);
  if (!config.domain.variant.empty()) r.domain = describe(build_domain(config.domain));
  switch (config.kind) {
    case K::MetricCheck: run_metric_check(config, r); break;
    case K::Distance: run_distance(config, r); break;
    case K::Geodesic: run_geodesic(config, r); break;
    case K::Certify: run_certify(config, r); break;
    case K::Boxing: run_boxing(config, r); break;
    case K::BidiscWitness:
    case K::FlatWitness: run_witness(config, r); break;
    case K::EllipsoidScan:
    case K::DeltaScan: run_scan(config, r); break;
  }
  if (r.domain.empty()) {
    if (config.kind == K::Boxing) r.domain = describe(domain_or(config, default_box()));
    else if (config.kind == K::FlatWitness || config.kind == K::Certify)
      r.domain = describe(domain_or(config, default_flat()));
    else if (config.kind == K::BidiscWitness) r.domain = describe(make_polydisc(2, 1.0));
  }
  r.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell_text(row[i]);
    out += "\n";
  }
  return out;
}

std::string to_report(const ReportEnvelope& r) {
  json doc;
  doc["tool"] = "kobalab";
  doc["version"] = r.tool_version;
  doc["kind"] = to_string(r.config.kind);
  doc["anchor"] = r.anchor;
  doc["domain"] = r.domain;
  doc["seed"] = r.config.seed;
  doc["config"] = serialize_config(r.config);
  doc["wall_clock_seconds"] = r.wall_clock_seconds;
  json summary = json::object();
  for (const auto& f : r.summary) summary[f.key] = cell_json(f.value);
  doc["summary"] = std::move(summary);
  doc["flags"] = {{"items", r.items},
                  {"non_converged", r.non_converged},
                  {"skipped", r.skipped},
                  {"failure_budget", r.config.failure_budget},
                  {"within_budget", r.within_budget()}};
  json tables = json::object();
  for (const auto& t : r.tables) tables[t.name] = table_json(t);
  doc["tables"] = std::move(tables);
  return doc.dump(2) + "\n";
}

void emit(const ReportEnvelope& r, OutputFormat format, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (format == OutputFormat::Report) {
    write_file(target, to_report(r));
    return;
  }
  const fs::path stem = target.parent_path() / target.stem();
  for (std::size_t i = 0; i < r.tables.size(); ++i) {
    const fs::path p = i == 0 ? target : fs::path(stem.string() + "_" + r.tables[i].name + ".csv");
    write_file(p, to_csv(r.tables[i]));
  }
}

std::string summarize(const ReportEnvelope& r) {
  std::ostringstream os;
  os << "kobalab " << r.tool_version << "  " << to_string(r.config.kind) << "  seed "
     << r.config.seed << "\n";
  os << "  probes: " << r.anchor << "\n";
  if (!r.domain.empty()) os << "  domain: " << r.domain << "\n";
  for (const auto& f : r.summary) os << "  " << f.key << " = " << cell_text(f.value) << "\n";
  os << "  items " << r.items << ", non-converged " << r.non_converged << ", skipped "
     << r.skipped << (r.within_budget() ? "" : "  [over failure budget]") << "\n";
  os << "  wall clock " << r.wall_clock_seconds << " s\n";
  return os.str();
}

}  // namespace kobalab
