#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "boundary.hpp"
#include "field.hpp"
#include "io.hpp"
#include "potential.hpp"
#include "solver.hpp"

namespace cavlab {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Sectioned key/value configuration. Values are kept as raw strings; the
/// canonical form (sections and keys sorted, one "key = value" per line) is
/// what gets hashed, so parse(serialize(x)) == x.
struct Ini {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static Ini parse(const std::string& text) {
    Ini ini;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash_pos = line.find('#');
      if (hash_pos != std::string::npos) line.erase(hash_pos);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        ini.sections[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      ini.sections[section][key] = value;
    }
    return ini;
  }

  std::string serialize() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& [name, kv] : sections) {
      if (!first) os << '\n';
      first = false;
      os << '[' << name << "]\n";
      for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
    }
    return os.str();
  }

  std::string hash() const { return hex64(fnv1a64(serialize())); }

  bool has(const std::string& s, const std::string& k) const {
    const auto it = sections.find(s);
    return it != sections.end() && it->second.count(k) > 0;
  }

  std::string get(const std::string& s, const std::string& k) const {
    const auto it = sections.find(s);
    if (it == sections.end() || !it->second.count(k))
      throw ConfigError("missing config key [" + s + "] " + k);
    return it->second.at(k);
  }

  std::string get_or(const std::string& s, const std::string& k, const std::string& d) const {
    return has(s, k) ? get(s, k) : d;
  }

  double get_double(const std::string& s, const std::string& k) const {
    return parse_double(get(s, k), s, k);
  }
  double get_double_or(const std::string& s, const std::string& k, double d) const {
    return has(s, k) ? get_double(s, k) : d;
  }
  long get_int(const std::string& s, const std::string& k) const {
    try {
      std::size_t pos = 0;
      const long v = std::stol(get(s, k), &pos);
      if (pos != get(s, k).size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key [" + s + "] " + k + " is not an integer");
    }
  }
  long get_int_or(const std::string& s, const std::string& k, long d) const {
    return has(s, k) ? get_int(s, k) : d;
  }
  std::uint64_t get_u64_or(const std::string& s, const std::string& k, std::uint64_t d) const {
    if (!has(s, k)) return d;
    try {
      return std::stoull(get(s, k));
    } catch (const std::exception&) {
      throw ConfigError("config key [" + s + "] " + k + " is not an unsigned integer");
    }
  }

  std::vector<double> get_list(const std::string& s, const std::string& k) const {
    std::vector<double> out;
    std::istringstream is(get(s, k));
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(parse_double(tok, s, k));
    if (out.empty()) throw ConfigError("config key [" + s + "] " + k + " is an empty list");
    return out;
  }
  std::vector<double> get_list_or(const std::string& s, const std::string& k,
                                  std::vector<double> d) const {
    return has(s, k) ? get_list(s, k) : d;
  }

private:
  static double parse_double(const std::string& raw, const std::string& s, const std::string& k) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(raw, &pos);
      while (pos < raw.size() && (raw[pos] == ' ' || raw[pos] == '\t')) ++pos;
      if (pos != raw.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key [" + s + "] " + k + " is not a number: " + raw);
    }
  }
};

/// Fully resolved experiment description. Construction validates everything
/// that can be validated without running a solver.
struct ExperimentConfig {
  Ini ini;
  Grid grid;
  FieldKind field_kind = FieldKind::Constant;
  FieldParams field_params;
  std::uint64_t field_seed = 0;
  std::string boundary_trace;
  PerturbationProfile profile;
  EpsilonLadder ladder;
  SolveOptions solver;
  std::optional<double> solve_eps;  // for single-eps solves

  // analyze stage
  double analyze_margin = 0.0;       // inset distance of the diagnostic window
  double analyze_r_max = 0.0;        // largest growth-fit radius
  std::vector<double> strip_mus;     // mu halving schedule
  double strip_r = 0.0;

  // two-phase stage
  std::vector<double> slab_sweep{0.2, 0.1, 0.05, 0.025};

  // klip stage
  std::vector<double> klip_scales;
  int klip_samples = 8;
  std::uint64_t klip_seed = 1;

  std::string canonical() const { return ini.serialize(); }
  std::string hash() const { return ini.hash(); }

  CoefficientField make_field() const { return make_field(grid); }
  CoefficientField make_field(const Grid& g) const {
    try {
      return generate_coefficients(g, field_kind, field_params, field_seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[field] ") + e.what());
    }
  }

  BoundaryData make_boundary() const { return make_boundary(grid); }
  BoundaryData make_boundary(const Grid& g) const {
    const std::string& t = boundary_trace;
    try {
      if (t == "zero") return boundary_constant(g, 0.0);
      if (t == "constant") return boundary_constant(g, ini.get_double("boundary", "value"));
      if (t == "endpoints")
        return boundary_endpoints(g, ini.get_double("boundary", "v0"),
                                  ini.get_double("boundary", "v1"));
      if (t == "linear")
        return boundary_linear(g, static_cast<int>(ini.get_int_or("boundary", "axis", 0)),
                               ini.get_double_or("boundary", "amplitude", 1.0));
      if (t == "radial_log")
        return boundary_radial_log(g, ini.get_double_or("boundary", "center_x", g.length / 2),
                                   ini.get_double_or("boundary", "center_y", g.length / 2),
                                   ini.get_double("boundary", "r0"),
                                   ini.get_double_or("boundary", "slope", std::sqrt(2.0)));
      if (t == "tilted_ramp") {
        // data amp * (xi - xi0)^+ in the rotated coordinate xi = (x + 2y)/sqrt(5),
        // transversal to axis-aligned tilings
        const double amp = ini.get_double_or("boundary", "amplitude", 0.5);
        const double xi0 = ini.get_double_or("boundary", "offset", 0.15);
        return boundary_from_function(
            g,
            [amp, xi0](double x, double y) {
              return amp * std::max(0.0, (x + 2.0 * y) / std::sqrt(5.0) - xi0);
            },
            "tilted_ramp");
      }
      if (t == "harmonic_saddle")
        return boundary_harmonic_saddle(g, ini.get_double_or("boundary", "amplitude", 1.0));
      if (t == "random_nonneg")
        return boundary_random_nonneg(g, ini.get_u64_or("boundary", "seed", 1),
                                      ini.get_double_or("boundary", "scale", 1.0));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[boundary] ") + e.what());
    }
    throw ConfigError("[boundary] unknown trace: " + t);
  }

  ProblemSpec make_problem_spec() const {
    ProblemSpec spec;
    spec.field = [this](const Grid& g) { return make_field(g); };
    spec.boundary = [this](const Grid& g) { return make_boundary(g); };
    return spec;
  }

  static ExperimentConfig from_ini(const Ini& ini) {
    ExperimentConfig c;
    c.ini = ini;
    try {
      c.grid = make_grid(static_cast<int>(ini.get_int("grid", "dim")),
                         static_cast<int>(ini.get_int("grid", "nodes")),
                         ini.get_double_or("grid", "length", 1.0));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[grid] ") + e.what());
    }

    c.field_kind = [&] {
      try {
        return field_kind_from_string(ini.get_or("field", "kind", "constant"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[field] ") + e.what());
      }
    }();
    FieldParams& p = c.field_params;
    p.lambda = ini.get_double_or("field", "lambda", 1.0);
    p.Lambda = ini.get_double_or("field", "Lambda", p.lambda);
    if (!(p.lambda > 0.0) || p.lambda > p.Lambda)
      throw ConfigError("[field] requires 0 < lambda <= Lambda");
    p.a11 = ini.get_double_or("field", "a11", 1.0);
    p.a12 = ini.get_double_or("field", "a12", 0.0);
    p.a22 = ini.get_double_or("field", "a22", 1.0);
    p.axis = static_cast<int>(ini.get_int_or("field", "axis", 0));
    p.tile = ini.get_double_or("field", "tile", 0.0);
    if (ini.has("field", "breaks")) p.breaks = ini.get_list("field", "breaks");
    if (ini.has("field", "values")) p.values = ini.get_list("field", "values");
    c.field_seed = ini.get_u64_or("field", "seed", 0);

    c.boundary_trace = ini.get_or("boundary", "trace", "zero");

    try {
      c.profile = profile_from_name(ini.get_or("profile", "name", "indicator"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[profile] ") + e.what());
    }

    c.ladder.eps0 = ini.get_double_or("ladder", "eps0", 0.1);
    c.ladder.ratio = ini.get_double_or("ladder", "ratio", 0.5);
    if (ini.has("ladder", "eps_min"))
      c.ladder = EpsilonLadder::down_to(c.ladder.eps0, c.ladder.ratio,
                                        ini.get_double("ladder", "eps_min"));
    else
      c.ladder.count = static_cast<int>(ini.get_int_or("ladder", "count", 1));

    c.solver.tol = ini.get_double_or("solver", "tol", 1e-8);
    c.solver.max_outer = static_cast<int>(ini.get_int_or("solver", "max_outer", 200));
    c.solver.cg_tol = ini.get_double_or("solver", "cg_tol", 1e-12);
    c.solver.cg_max_iter = ini.get_int_or("solver", "cg_max_iter", 400000);
    c.solver.shrink = ini.get_double_or("solver", "shrink", 0.5);
    c.solver.max_line_search = static_cast<int>(ini.get_int_or("solver", "max_line_search", 50));
    c.solver.multistart_cold = ini.get_int_or("solver", "multistart", 1) != 0;

    if (ini.has("solve", "eps")) c.solve_eps = ini.get_double("solve", "eps");

    const double h = c.grid.h();
    c.analyze_margin = ini.get_double_or("analyze", "margin", 0.15 * c.grid.length);
    c.analyze_r_max = ini.get_double_or("analyze", "r_max", c.grid.length / 8.0);
    const double mu0 = ini.get_double_or("analyze", "strip_mu0", 64.0 * h);
    const int halvings = static_cast<int>(ini.get_int_or("analyze", "strip_halvings", 2));
    for (int j = 0; j <= halvings; ++j) c.strip_mus.push_back(mu0 / std::pow(2.0, j));
    c.strip_r = ini.get_double_or("analyze", "strip_r", c.grid.length / 8.0);

    if (ini.has("twophase", "delta_stars")) c.slab_sweep = ini.get_list("twophase", "delta_stars");

    c.klip_scales = ini.get_list_or("klip", "scales", {c.grid.length / 4.0});
    c.klip_samples = static_cast<int>(ini.get_int_or("klip", "samples", 8));
    c.klip_seed = ini.get_u64_or("klip", "seed", 1);

    try {
      c.solver.validate();
      c.ladder.validate(h);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return c;
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return from_ini(Ini::parse(ss.str()));
  }
};

} // namespace cavlab
