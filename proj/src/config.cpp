#include "kobalab/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace kobalab {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, ExperimentKind> kKinds = {
    {"metric-check", ExperimentKind::MetricCheck},
    {"distance", ExperimentKind::Distance},
    {"geodesic", ExperimentKind::Geodesic},
    {"certify", ExperimentKind::Certify},
    {"boxing", ExperimentKind::Boxing},
    {"bidisc-witness", ExperimentKind::BidiscWitness},
    {"flat-witness", ExperimentKind::FlatWitness},
    {"ellipsoid-scan", ExperimentKind::EllipsoidScan},
    {"delta-scan", ExperimentKind::DeltaScan},
};

const std::map<std::string, std::set<std::string>> kKeys = {
    {"experiment", {"kind", "seed", "workers", "failure_budget"}},
    {"domain", {"variant", "n", "radius", "p", "discs", "R", "alpha", "beta", "a", "sublevel"}},
    {"parameters",
     {"n", "m_values", "r_values", "r_prime_values", "point_p", "point_q", "x", "b", "z0", "cut",
      "curve", "A", "B", "n_pairs", "depths", "exponent", "side_samples"}},
    {"optimizer", {"initial_nodes", "max_refinements", "max_iterations", "restarts"}},
    {"tolerances", {"tol_geom", "tol_quad", "tol_dist"}},
    {"output", {"path", "format"}},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(trim(item));
  return out;
}

Scalar to_real(const std::string& raw, const std::string& key) {
  const std::string s = trim(raw);
  Scalar v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("invalid number for '" + key + "': '" + raw + "'");
  return v;
}

long to_integer(const std::string& raw, const std::string& key) {
  const std::string s = trim(raw);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("invalid integer for '" + key + "': '" + raw + "'");
  return v;
}

int to_int(const std::string& raw, const std::string& key) {
  const long v = to_integer(raw, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("integer out of range for '" + key + "'");
  return static_cast<int>(v);
}

std::vector<Scalar> to_reals(const std::string& s, const std::string& key) {
  std::vector<Scalar> out;
  for (const auto& item : split_list(s)) out.push_back(to_real(item, key));
  return out;
}

std::vector<int> to_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) out.push_back(to_int(item, key));
  return out;
}

std::vector<Complex> to_complexes(const std::string& s, const std::string& key) {
  std::vector<Complex> out;
  for (const auto& item : split_list(s)) {
    try {
      out.push_back(parse_complex(item));
    } catch (const ConfigError&) {
      throw ConfigError("invalid complex number for '" + key + "': '" + item + "'");
    }
  }
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out;
}

CPoint to_point(const std::vector<Complex>& v) {
  CPoint z(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) z[static_cast<Eigen::Index>(i)] = v[i];
  return z;
}

}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& [name, kind] : kKinds)
    if (kind == k) return name;
  return "unknown";
}

ExperimentKind parse_kind(const std::string& s) {
  const auto it = kKinds.find(trim(s));
  if (it == kKinds.end()) throw ConfigError("unknown experiment kind '" + s + "'");
  return it->second;
}

std::string format_real(Scalar v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_complex(Complex z) {
  if (z.imag() == 0.0 && !std::signbit(z.imag())) return format_real(z.real());
  std::string im = format_real(z.imag());
  if (im.front() != '-') im = "+" + im;
  return format_real(z.real()) + im + "i";
}

Complex parse_complex(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError("empty complex number");
  if (s.back() != 'i') return {to_real(s, "complex"), 0.0};
  const std::string body = s.substr(0, s.size() - 1);
  // Split at the last sign that is not the sign of an exponent.
  std::size_t k = std::string::npos;
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
      k = i;
      break;
    }
  }
  auto imag_part = [](std::string t) -> Scalar {
    if (t.empty() || t == "+") return 1.0;
    if (t == "-") return -1.0;
    if (t.front() == '+') t.erase(0, 1);
    return to_real(t, "complex");
  };
  if (k == std::string::npos) return {0.0, imag_part(body)};
  return {to_real(body.substr(0, k), "complex"), imag_part(body.substr(k))};
}

Domain build_domain(const DomainConfig& c) {
  Domain d;
  const std::string& v = c.variant;
  if (v == "disc") d = make_disc(c.radius);
  else if (v == "polydisc") d = make_polydisc(c.n, c.radius);
  else if (v == "ball") d = make_ball(c.n);
  else if (v == "ellipsoid") d = make_ellipsoid(c.n, c.p);
  else if (v == "box") d = make_box(c.discs, c.R, c.alpha, c.beta);
  else if (v == "flat") d = make_flat(c.a, c.R, c.alpha, c.beta);
  else throw ConfigError("unknown domain variant '" + v + "'");
  if (c.sublevel) d = sublevel_domain(d, *c.sublevel);
  return d;
}

void validate_config(const ExperimentConfig& c) {
  using K = ExperimentKind;
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(!c.output_path.empty(), "missing required key output.path");
  require(c.workers >= 1, "experiment.workers must be >= 1");
  require(c.failure_budget >= 0.0 && c.failure_budget <= 1.0,
          "experiment.failure_budget must lie in [0, 1]");
  require(c.initial_nodes.value_or(2) >= 2 && c.max_refinements.value_or(0) >= 0 &&
              c.max_iterations.value_or(1) >= 1 && c.restarts.value_or(1) >= 1,
          "optimizer settings out of range");
  require(c.tol_geom > 0 && c.tol_quad.value_or(1) > 0 && c.tol_dist.value_or(1) > 0,
          "tolerances must be positive");

  const bool needs_domain = c.kind == K::MetricCheck || c.kind == K::Distance ||
                            c.kind == K::Geodesic || c.kind == K::DeltaScan ||
                            (c.kind == K::Certify && c.curve != "sigma");
  if (needs_domain) require(!c.domain.variant.empty(), "missing required key domain.variant");
  if (!c.domain.variant.empty()) {
    try {
      build_domain(c.domain);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("invalid domain: ") + e.what());
    }
  }

  auto require_point = [&](const std::vector<Complex>& z, const std::string& key) {
    require(!z.empty(), "missing required key parameters." + key);
  };
  switch (c.kind) {
    case K::MetricCheck:
      require(c.n > 0, "parameters.n must be > 0");
      break;
    case K::Distance:
    case K::Geodesic:
      require_point(c.point_p, "point_p");
      require_point(c.point_q, "point_q");
      require(c.point_p.size() == c.point_q.size(), "point_p and point_q differ in dimension");
      break;
    case K::Certify:
      require(c.A >= 1.0 && c.B >= 0.0, "certify needs A >= 1 and B >= 0");
      require(c.n_pairs > 0, "parameters.n_pairs must be > 0");
      if (c.curve == "geodesic") {
        require_point(c.point_p, "point_p");
        require_point(c.point_q, "point_q");
      } else if (c.curve == "boundary-segment") {
        require_point(c.x, "x");
        require_point(c.b, "b");
        require(c.cut > 0.0 && c.cut < 1.0, "parameters.cut must lie in (0, 1)");
      } else if (c.curve == "sigma") {
        require(c.r_values.size() == 1, "certify with curve = sigma needs one value in r_values");
      } else {
        throw ConfigError("unknown curve '" + c.curve + "'");
      }
      break;
    case K::Boxing:
      require(!c.r_values.empty(), "missing required key parameters.r_values");
      require(c.r_values.size() == c.r_prime_values.size(),
              "r_values and r_prime_values must have the same length");
      for (std::size_t i = 0; i < c.r_values.size(); ++i)
        require(c.r_values[i] > 0 && c.r_prime_values[i] > 0, "boxing heights must be positive");
      break;
    case K::BidiscWitness:
      require(!c.m_values.empty(), "missing required key parameters.m_values");
      for (int m : c.m_values) require(m >= 2, "m_values must be >= 2");
      break;
    case K::FlatWitness:
      require(!c.r_values.empty(), "missing required key parameters.r_values");
      for (Scalar r : c.r_values) require(r > 0 && r < 0.5, "r_values must lie in (0, 0.5)");
      require(c.side_samples >= 2, "parameters.side_samples must be >= 2");
      break;
    case K::EllipsoidScan:
    case K::DeltaScan:
      require(c.n >= 0, "parameters.n must be >= 0");
      require(!c.depths.empty(), "missing required key parameters.depths");
      for (Scalar dep : c.depths) require(dep > 0, "depths must be positive");
      if (c.kind == K::EllipsoidScan) require(c.exponent >= 1.0, "parameters.exponent must be >= 1");
      break;
  }
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message());
  }

  ExperimentConfig c;
  bool have_kind = false;
  for (const auto& [section, body] : tree) {
    const auto allowed = kKeys.find(section);
    if (allowed == kKeys.end() || !body.data().empty())
      throw ConfigError("unknown section or top-level key '" + section + "'");
    for (const auto& [key, node] : body) {
      if (!allowed->second.count(key)) throw ConfigError("unknown key '" + section + "." + key + "'");
      const std::string v = trim(node.data());
      const std::string full = section + "." + key;
      if (section == "experiment") {
        if (key == "kind") c.kind = parse_kind(v), have_kind = true;
        else if (key == "seed") {
          const long s = to_integer(v, full);
          if (s < 0 || s > std::numeric_limits<unsigned>::max()) throw ConfigError("seed out of range");
          c.seed = static_cast<unsigned>(s);
        }
        else if (key == "workers") c.workers = to_int(v, full);
        else if (key == "failure_budget") c.failure_budget = to_real(v, full);
      } else if (section == "domain") {
        if (key == "variant") c.domain.variant = v;
        else if (key == "n") c.domain.n = to_int(v, full);
        else if (key == "radius") c.domain.radius = to_real(v, full);
        else if (key == "p") c.domain.p = to_real(v, full);
        else if (key == "discs") c.domain.discs = to_int(v, full);
        else if (key == "R") c.domain.R = to_real(v, full);
        else if (key == "alpha") c.domain.alpha = to_real(v, full);
        else if (key == "beta") c.domain.beta = to_real(v, full);
        else if (key == "a") c.domain.a = to_real(v, full);
        else if (key == "sublevel") c.domain.sublevel = to_real(v, full);
      } else if (section == "parameters") {
        if (key == "n") c.n = to_int(v, full);
        else if (key == "m_values") c.m_values = to_ints(v, full);
        else if (key == "r_values") c.r_values = to_reals(v, full);
        else if (key == "r_prime_values") c.r_prime_values = to_reals(v, full);
        else if (key == "point_p") c.point_p = to_complexes(v, full);
        else if (key == "point_q") c.point_q = to_complexes(v, full);
        else if (key == "x") c.x = to_complexes(v, full);
        else if (key == "b") c.b = to_complexes(v, full);
        else if (key == "z0") c.z0 = to_complexes(v, full);
        else if (key == "cut") c.cut = to_real(v, full);
        else if (key == "curve") c.curve = v;
        else if (key == "A") c.A = to_real(v, full);
        else if (key == "B") c.B = to_real(v, full);
        else if (key == "n_pairs") c.n_pairs = to_int(v, full);
        else if (key == "depths") c.depths = to_reals(v, full);
        else if (key == "exponent") c.exponent = to_real(v, full);
        else if (key == "side_samples") c.side_samples = to_int(v, full);
      } else if (section == "optimizer") {
        if (key == "initial_nodes") c.initial_nodes = to_int(v, full);
        else if (key == "max_refinements") c.max_refinements = to_int(v, full);
        else if (key == "max_iterations") c.max_iterations = to_int(v, full);
        else if (key == "restarts") c.restarts = to_int(v, full);
      } else if (section == "tolerances") {
        if (key == "tol_geom") c.tol_geom = to_real(v, full);
        else if (key == "tol_quad") c.tol_quad = to_real(v, full);
        else if (key == "tol_dist") c.tol_dist = to_real(v, full);
      } else if (section == "output") {
        if (key == "path") c.output_path = v;
        else if (key == "format") {
          if (v == "csv") c.format = OutputFormat::Csv;
          else if (v == "report") c.format = OutputFormat::Report;
          else throw ConfigError("output.format must be csv or report");
        }
      }
    }
  }
  if (!have_kind) throw ConfigError("missing required key experiment.kind");
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  auto reals = [](const std::vector<Scalar>& v) { return join(v, format_real); };
  auto complexes = [](const std::vector<Complex>& v) { return join(v, format_complex); };
  auto ints = [](const std::vector<int>& v) { return join(v, [](int i) { return std::to_string(i); }); };
  const auto& d = c.domain;

  std::ostringstream os;
  os << "[experiment]\n"
     << "kind = " << to_string(c.kind) << "\n"
     << "seed = " << c.seed << "\n"
     << "workers = " << c.workers << "\n"
     << "failure_budget = " << format_real(c.failure_budget) << "\n\n";
  if (!d.variant.empty()) {
    os << "[domain]\n"
       << "variant = " << d.variant << "\n"
       << "n = " << d.n << "\n"
       << "radius = " << format_real(d.radius) << "\n"
       << "p = " << format_real(d.p) << "\n"
       << "discs = " << d.discs << "\n"
       << "R = " << format_real(d.R) << "\n"
       << "alpha = " << format_real(d.alpha) << "\n"
       << "beta = " << format_real(d.beta) << "\n"
       << "a = " << format_real(d.a) << "\n";
    if (d.sublevel) os << "sublevel = " << format_real(*d.sublevel) << "\n";
    os << "\n";
  }
  os << "[parameters]\n"
     << "n = " << c.n << "\n"
     << "m_values = " << ints(c.m_values) << "\n"
     << "r_values = " << reals(c.r_values) << "\n"
     << "r_prime_values = " << reals(c.r_prime_values) << "\n"
     << "point_p = " << complexes(c.point_p) << "\n"
     << "point_q = " << complexes(c.point_q) << "\n"
     << "x = " << complexes(c.x) << "\n"
     << "b = " << complexes(c.b) << "\n"
     << "z0 = " << complexes(c.z0) << "\n"
     << "cut = " << format_real(c.cut) << "\n"
     << "curve = " << c.curve << "\n"
     << "A = " << format_real(c.A) << "\n"
     << "B = " << format_real(c.B) << "\n"
     << "n_pairs = " << c.n_pairs << "\n"
     << "depths = " << reals(c.depths) << "\n"
     << "exponent = " << format_real(c.exponent) << "\n"
     << "side_samples = " << c.side_samples << "\n\n";
  os << "[optimizer]\n";
  if (c.initial_nodes) os << "initial_nodes = " << *c.initial_nodes << "\n";
  if (c.max_refinements) os << "max_refinements = " << *c.max_refinements << "\n";
  if (c.max_iterations) os << "max_iterations = " << *c.max_iterations << "\n";
  if (c.restarts) os << "restarts = " << *c.restarts << "\n";
  os << "\n[tolerances]\n"
     << "tol_geom = " << format_real(c.tol_geom) << "\n";
  if (c.tol_quad) os << "tol_quad = " << format_real(*c.tol_quad) << "\n";
  if (c.tol_dist) os << "tol_dist = " << format_real(*c.tol_dist) << "\n";
  os << "\n";
  os << "[output]\n"
     << "path = " << c.output_path << "\n"
     << "format = " << (c.format == OutputFormat::Csv ? "csv" : "report") << "\n";
  return os.str();
}

CPoint config_point(const std::vector<Complex>& v) { return to_point(v); }

}  // namespace kobalab
