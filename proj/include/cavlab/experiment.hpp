#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "klip.hpp"
#include "solver.hpp"
#include "twophase.hpp"

namespace cavlab {

using nlohmann::json;

enum ExitCode { kOk = 0, kValidationError = 2, kSolverNonConvergence = 3 };

struct StageRecord {
  std::string name;
  std::string status;  // "ok" | "failed"
  double seconds = 0.0;
};

/// Records what a run produced. Checksums pin every artifact; wall-clock
/// timings are carried but excluded from the canonical form so identical
/// reruns compare equal.
struct RunManifest {
  std::string config_hash;
  std::string version = "cavlab-1";
  std::vector<std::pair<std::string, std::string>> seeds;
  std::vector<StageRecord> stages;
  std::vector<std::pair<std::string, std::string>> artifacts;  // relative path, fnv64

  json to_json(bool with_timings = true) const {
    json j;
    j["version"] = version;
    j["config_hash"] = config_hash;
    json js = json::object();
    for (const auto& [k, v] : seeds) js[k] = v;
    j["seeds"] = js;
    json st = json::array();
    for (const StageRecord& s : stages) {
      json e;
      e["name"] = s.name;
      e["status"] = s.status;
      if (with_timings) e["seconds"] = s.seconds;
      st.push_back(e);
    }
    j["stages"] = st;
    json ar = json::object();
    for (const auto& [p, h] : artifacts) ar[p] = h;
    j["artifacts"] = ar;
    return j;
  }

  std::string canonical() const { return to_json(false).dump(2); }

  void save(const std::string& path) const {
    std::ofstream os(path);
    os << to_json(true).dump(2) << '\n';
  }
};

namespace detail_exp {

inline json breakdown_json(const EnergyBreakdown& e) {
  return json{{"dirichlet", e.dirichlet}, {"potential", e.potential}, {"total", e.total()}};
}

inline json solve_report_json(const SolveReport& r) {
  json j;
  j["eps"] = r.eps;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["final_residual"] = r.final_residual;
  j["final_el_residual"] = r.final_el_residual;
  j["min_value"] = r.min_value;
  j["cg_iterations"] = r.cg_iterations_total;
  j["energies"] = r.energies;
  j["residual_norms"] = r.residual_norms;
  j["line_search_steps"] = r.line_search_steps;
  j["final_energy"] = breakdown_json(r.final_energy);
  j["energies_nonincreasing"] = r.energies_nonincreasing();
  return j;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

} // namespace detail_exp

/// Everything the analyze stage measures, plus the summary values the
/// report command prints.
struct AnalyzeSummary {
  long fb_cells = 0;
  long eligible_points = 0;
  bool has_free_boundary = false;
  double exponent_min = 0.0, exponent_max = 0.0;
  double c_minus_min = 0.0, c_plus_max = 0.0;
  double density_theta_min = 0.0;
  double porosity_mu_min = 0.0;
  double box_dimension = 0.0;
  double codimension_est = 0.0;
  double nondegeneracy_min = 0.0;
  double linear_growth_c = 0.0;
  double strip_drift_max = 0.0;            // max ratio drift factor over the mu schedule
  double strip_dirichlet_drift_max = 0.0;
  double flux_form_median = 0.0;

  json to_json() const {
    json j;
    j["fb_cells"] = fb_cells;
    j["eligible_points"] = eligible_points;
    j["has_free_boundary"] = has_free_boundary;
    if (!has_free_boundary) return j;
    j["growth_exponent"] = {{"min", exponent_min}, {"max", exponent_max}};
    j["lipschitz_constants"] = {{"c_minus_min", c_minus_min}, {"c_plus_max", c_plus_max}};
    j["density_theta_min"] = density_theta_min;
    j["porosity_mu_min"] = porosity_mu_min;
    j["box_dimension"] = box_dimension;
    j["codimension_est"] = codimension_est;
    j["nondegeneracy_min"] = nondegeneracy_min;
    j["linear_growth_c"] = linear_growth_c;
    j["strip_drift_max"] = strip_drift_max;
    j["strip_dirichlet_drift_max"] = strip_dirichlet_drift_max;
    j["flux_form_median"] = flux_form_median;
    return j;
  }
};

/// Free-boundary diagnostics of a solution, written as one CSV per family
/// plus summary.json. `eps_level` is the final ladder rung (it sets the
/// positivity threshold and the level set of the linear growth check).
inline AnalyzeSummary analyze_solution(const GridFunction& u, const CoefficientField& field,
                                       double eps_level, const ExperimentConfig& cfg,
                                       const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string hash = cfg.hash();
  const Grid& g = u.grid;
  const double h = g.h();
  const double tau = default_tau(u, 0.0);

  AnalyzeSummary s;
  const FreeBoundarySet fb = free_boundary(u, tau);
  s.fb_cells = static_cast<long>(fb.cells.size());
  s.has_free_boundary = !fb.empty();

  const double r_max = cfg.analyze_r_max;
  const double margin = cfg.analyze_margin;
  auto eligible = [&](double x, double y) {
    const double d = g.dim == 1 ? std::min(x, g.length - x)
                                : std::min({x, y, g.length - x, g.length - y});
    return d >= r_max + margin;
  };

  CsvWriter growth_csv(out_dir + "/growth.csv", hash, "point,x,y,exponent,c_minus,c_plus");
  CsvWriter density_csv(out_dir + "/density.csv", hash, "point,x,y,r,theta");
  CsvWriter porosity_csv(out_dir + "/porosity.csv", hash, "point,x,y,r,mu,dim_bound");
  CsvWriter strip_csv(out_dir + "/strip.csv", hash,
                      "point,x,y,r,mu,measure,measure_ratio,dirichlet,dirichlet_ratio");
  CsvWriter slope_csv(out_dir + "/fb_slope.csv", hash, "point,x,y,gradient,flux_form");
  CsvWriter box_csv(out_dir + "/boxcount.csv", hash, "scale,count");

  if (!fb.empty()) {
    s.exponent_min = 1e300;
    s.exponent_max = -1e300;
    s.c_minus_min = 1e300;
    s.density_theta_min = 1e300;
    s.porosity_mu_min = 1e300;
    s.nondegeneracy_min = 1e300;
    const std::vector<double> dist = positivity_distance(u, tau);
    std::vector<double> flux_forms;
    double strip_lo = 1e300, strip_hi = 0.0, strip_dlo = 1e300, strip_dhi = 0.0;

    FreeBoundarySet fb_window;
    fb_window.grid = g;
    fb_window.tau = tau;

    const bool can_fit = r_max >= 16.0 * 4.0 * h * (1.0 - 1e-12);
    for (std::size_t k = 0; k < fb.cells.size(); ++k) {
      const double x = fb.cell_center_x(k);
      const double y = fb.cell_center_y(k);
      if (!eligible(x, y)) continue;
      fb_window.cells.push_back(fb.cells[k]);
      ++s.eligible_points;
      const long pid = static_cast<long>(k);

      if (can_fit) {
        const GrowthFit fit = growth_exponent(u, x, y, 4.0 * h, r_max);
        s.exponent_min = std::min(s.exponent_min, fit.exponent);
        s.exponent_max = std::max(s.exponent_max, fit.exponent);
        s.c_minus_min = std::min(s.c_minus_min, fit.c_minus);
        s.c_plus_max = std::max(s.c_plus_max, fit.c_plus);
        growth_csv.row(pid, x, y, fit.exponent, fit.c_minus, fit.c_plus);
      }

      std::vector<double> radii;
      for (double r = 8.0 * h; r <= r_max * (1.0 + 1e-12); r *= 2.0) radii.push_back(r);
      for (double r : radii) {
        const double theta = density_ratio(u, x, y, r, tau);
        const double mu = porosity(u, x, y, r, tau, &dist);
        s.density_theta_min = std::min(s.density_theta_min, theta);
        s.porosity_mu_min = std::min(s.porosity_mu_min, mu);
        density_csv.row(pid, x, y, r, theta);
        porosity_csv.row(pid, x, y, r, mu, g.dim - std::pow(mu, g.dim));
      }
      if (!radii.empty())
        s.nondegeneracy_min =
            std::min(s.nondegeneracy_min, nondegeneracy(u, x, y, radii, tau));

      const FbSlope sl = fb_slope(u, field, fb.cells[k], tau);
      flux_forms.push_back(sl.flux_form);
      slope_csv.row(pid, x, y, sl.gradient_norm, sl.flux_form);

      double lo = 1e300, hi = 0.0, dlo = 1e300, dhi = 0.0;
      bool have_strip = false;
      for (double mu : cfg.strip_mus) {
        if (cfg.strip_r + x > g.length || !eligible(x, y)) break;
        const StripEstimate se = strip_estimate(u, x, y, std::min(cfg.strip_r, r_max), mu);
        strip_csv.row(pid, x, y, se.r, mu, se.measure, se.measure_ratio, se.dirichlet,
                      se.dirichlet_ratio);
        if (se.measure_ratio > 0.0) {
          lo = std::min(lo, se.measure_ratio);
          hi = std::max(hi, se.measure_ratio);
          have_strip = true;
        }
        if (se.dirichlet_ratio > 0.0) {
          dlo = std::min(dlo, se.dirichlet_ratio);
          dhi = std::max(dhi, se.dirichlet_ratio);
        }
      }
      if (have_strip) {
        strip_lo = std::min(strip_lo, lo);
        strip_hi = std::max(strip_hi, hi);
        s.strip_drift_max = std::max(s.strip_drift_max, hi / lo);
        if (dhi > 0.0 && dlo < 1e300)
          s.strip_dirichlet_drift_max = std::max(s.strip_dirichlet_drift_max, dhi / dlo);
      }
    }

    if (!fb_window.empty()) {
      try {
        const BoxDimension bd = box_dimension(fb_window);
        s.box_dimension = bd.dimension;
        s.codimension_est = bd.codimension;
        for (std::size_t i = 0; i < bd.scales.size(); ++i) box_csv.row(bd.scales[i], bd.counts[i]);
      } catch (const std::invalid_argument&) {
        s.box_dimension = -1.0;  // too few octaves on this grid
      }
    }

    if (!flux_forms.empty()) {
      std::sort(flux_forms.begin(), flux_forms.end());
      s.flux_form_median = flux_forms[flux_forms.size() / 2];
    }

    auto clear_if_unset = [](double& lo, double cleared = 0.0) {
      if (lo > 1e299) lo = cleared;
    };
    clear_if_unset(s.exponent_min);
    if (s.exponent_max < -1e299) s.exponent_max = 0.0;
    clear_if_unset(s.c_minus_min);
    clear_if_unset(s.density_theta_min);
    clear_if_unset(s.porosity_mu_min);
    clear_if_unset(s.nondegeneracy_min);

    // linear growth of the final rung against its own eps level
    if (eps_level > 0.0) {
      std::vector<long> samples;
      const int stride = std::max(1, g.n / 64);
      for (long id = 0; id < g.node_count(); ++id) {
        const int ix = g.node_x(id), iy = g.node_y(id);
        if (ix % stride != 0 || (g.dim == 2 && iy % stride != 0)) continue;
        const double x = g.coord(ix), y = g.dim == 2 ? g.coord(iy) : 0.0;
        if (!eligible(x, y)) continue;
        if (u.v[id] >= 2.0 * eps_level) samples.push_back(id);
      }
      if (!samples.empty()) {
        const LinearGrowthResult lg = linear_growth_check(u, eps_level, samples);
        s.linear_growth_c = lg.samples.empty() ? 0.0 : lg.c;
      }
    }
  }

  std::ofstream os(out_dir + "/summary.json");
  json j = s.to_json();
  j["config_hash"] = hash;
  j["tau"] = tau;
  os << j.dump(2) << '\n';
  return s;
}

/// Full pipeline: field generation, cascadic continuation with per-rung
/// dumps, diagnostics, manifest. A failed stage leaves the partial directory
/// behind with the manifest marking where it stopped.
inline int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                          bool two_phase = false) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.config_hash = cfg.hash();
  manifest.seeds.emplace_back("field", std::to_string(cfg.field_seed));

  {
    std::ofstream os(out_dir + "/config.ini");
    os << cfg.canonical();
  }
  auto add_artifact = [&](const std::string& rel) {
    manifest.artifacts.emplace_back(rel, hash_file(out_dir + "/" + rel));
  };
  add_artifact("config.ini");

  // field stage
  {
    detail_exp::Timer t;
    try {
      const CoefficientField field = cfg.make_field();
      save_cavfield(out_dir + "/field.cavfield", field);
      add_artifact("field.cavfield");
      manifest.stages.push_back({"field", "ok", t.seconds()});
    } catch (const std::exception& e) {
      manifest.stages.push_back({"field", std::string("failed: ") + e.what(), t.seconds()});
      manifest.save(out_dir + "/manifest.json");
      return kValidationError;
    }
  }

  // continuation stage
  ContinuationResult cont;
  {
    detail_exp::Timer t;
    std::vector<std::string> rung_files;
    const RungSink sink = [&](const GridFunction& u, int j, double) {
      const std::string rel = "rung_" + std::to_string(j) + ".cavgrid";
      save_cavgrid(out_dir + "/" + rel, u);
      rung_files.push_back(rel);
    };
    if (two_phase) {
      auto [u, rep] = minimize_twophase(cfg.make_field(), cfg.make_boundary(), cfg.profile,
                                        cfg.ladder, cfg.solver, cfg.slab_sweep);
      cont.u0 = std::move(u);
      cont.rungs = rep.rungs;
      cont.converged = rep.converged;
      save_cavgrid(out_dir + "/u0.cavgrid", cont.u0);
      add_artifact("u0.cavgrid");

      json tj;
      tj["inf_u"] = rep.inf_u;
      tj["slab_candidate"] = rep.slab_candidate;
      tj["slab_delta_stars"] = rep.slab_delta_stars;
      tj["slab_ok"] = rep.slab_ok;
      json pts = json::array();
      for (const TwoPhasePoint& p : rep.points) {
        json pj;
        pj["x"] = p.x;
        pj["y"] = p.y;
        pj["slope_pos"] = p.control.slope_pos;
        pj["slope_neg"] = p.control.slope_neg;
        pj["ratio"] = p.control.ratio;
        pj["negative_density_radii"] = p.density.radii;
        pj["negative_density_ratios"] = p.density.ratios;
        pts.push_back(pj);
      }
      tj["points"] = pts;
      std::ofstream os(out_dir + "/twophase.json");
      os << tj.dump(2) << '\n';
      add_artifact("twophase.json");
    } else {
      cont = cascade_continuation(cfg.grid.dim, cfg.grid.n, cfg.grid.length,
                                  cfg.make_problem_spec(), cfg.profile, cfg.ladder, cfg.solver,
                                  false, 4, sink);
      save_cavgrid(out_dir + "/u0.cavgrid", cont.u0);
      for (const std::string& rel : rung_files) add_artifact(rel);
      add_artifact("u0.cavgrid");
    }

    json reports = json::array();
    for (const SolveReport& r : cont.rungs) reports.push_back(detail_exp::solve_report_json(r));
    json cj;
    cj["rungs"] = reports;
    cj["converged"] = cont.converged;
    cj["sup_diffs"] = cont.sup_diffs;
    cj["sharp_energies"] = cont.sharp_energies;
    cj["sharpening_monotone"] = cont.sharpening_monotone;
    cj["holder_alpha"] = cont.holder_alpha;
    cj["holder_moduli"] = cont.holder_moduli;
    std::ofstream os(out_dir + "/solve_reports.json");
    os << cj.dump(2) << '\n';
    add_artifact("solve_reports.json");

    if (!cont.converged) {
      manifest.stages.push_back({"continuation", "failed: rung not converged", t.seconds()});
      manifest.save(out_dir + "/manifest.json");
      return kSolverNonConvergence;
    }
    manifest.stages.push_back({"continuation", "ok", t.seconds()});
  }

  // analyze stage
  {
    detail_exp::Timer t;
    const CoefficientField field = cfg.make_field(cont.u0.grid);
    analyze_solution(cont.u0, field, cfg.ladder.final_eps(), cfg, out_dir + "/analysis");
    for (const char* f : {"growth.csv", "density.csv", "porosity.csv", "strip.csv",
                          "fb_slope.csv", "boxcount.csv", "summary.json"})
      add_artifact(std::string("analysis/") + f);
    manifest.stages.push_back({"analyze", "ok", t.seconds()});
  }

  manifest.save(out_dir + "/manifest.json");
  return kOk;
}

/// Human-oriented digest of a finished run directory. Missing artifacts are
/// listed explicitly rather than silently skipped.
inline int report_run(const std::string& run_dir, std::ostream& os) {
  namespace fs = std::filesystem;
  std::vector<std::string> missing;
  auto need = [&](const std::string& rel) {
    if (!fs::exists(run_dir + "/" + rel)) missing.push_back(rel);
    return fs::exists(run_dir + "/" + rel);
  };

  const bool have_manifest = need("manifest.json");
  const bool have_summary = need("analysis/summary.json");
  need("solve_reports.json");
  if (!missing.empty()) {
    os << "incomplete run, missing artifacts:\n";
    for (const std::string& m : missing) os << "  " << m << '\n';
    return kValidationError;
  }
  (void)have_manifest;

  json manifest, summary, solves;
  {
    std::ifstream is(run_dir + "/manifest.json");
    is >> manifest;
  }
  if (have_summary) {
    std::ifstream is(run_dir + "/analysis/summary.json");
    is >> summary;
  }
  {
    std::ifstream is(run_dir + "/solve_reports.json");
    is >> solves;
  }

  os << "run " << run_dir << "  (config " << manifest["config_hash"].get<std::string>() << ")\n";
  for (const auto& st : manifest["stages"])
    os << "  stage " << st["name"].get<std::string>() << ": " << st["status"].get<std::string>()
       << '\n';
  os << "  rungs: " << solves["rungs"].size()
     << "  converged: " << (solves["converged"].get<bool>() ? "yes" : "no") << '\n';

  if (!summary["has_free_boundary"].get<bool>()) {
    os << "  no free boundary\n";
    return kOk;
  }
  os << "  fb cells: " << summary["fb_cells"] << "  eligible points: "
     << summary["eligible_points"] << '\n';
  os << "  growth exponent: [" << summary["growth_exponent"]["min"] << ", "
     << summary["growth_exponent"]["max"] << "]\n";
  os << "  lipschitz constants: c- >= " << summary["lipschitz_constants"]["c_minus_min"]
     << ", c+ <= " << summary["lipschitz_constants"]["c_plus_max"] << '\n';
  os << "  density theta_min: " << summary["density_theta_min"]
     << "  porosity mu_min: " << summary["porosity_mu_min"] << '\n';
  os << "  box dimension: " << summary["box_dimension"] << " (codimension "
     << summary["codimension_est"] << ")\n";
  os << "  nondegeneracy c: " << summary["nondegeneracy_min"]
     << "  linear growth c: " << summary["linear_growth_c"] << '\n';
  os << "  strip drift: x" << summary["strip_drift_max"] << " (dirichlet x"
     << summary["strip_dirichlet_drift_max"] << ")\n";
  os << "  flux form median: " << summary["flux_form_median"] << '\n';
  return kOk;
}

/// Cartesian sweep: every key of the [sweep] section is "section.key" with a
/// comma list of values; each combination runs in its own subdirectory named
/// by the combination's config hash.
inline int run_sweep(const ExperimentConfig& base, const std::string& out_dir) {
  const auto it = base.ini.sections.find("sweep");
  if (it == base.ini.sections.end() || it->second.empty())
    throw ConfigError("[sweep] section with at least one key required");

  std::vector<std::pair<std::pair<std::string, std::string>, std::vector<std::string>>> axes;
  for (const auto& [key, value] : it->second) {
    const auto dot = key.find('.');
    if (dot == std::string::npos)
      throw ConfigError("[sweep] keys must be section.key, got: " + key);
    std::vector<std::string> values;
    std::istringstream is(value);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      const auto e = tok.find_last_not_of(" \t");
      values.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
    }
    axes.push_back({{key.substr(0, dot), key.substr(dot + 1)}, values});
  }

  long total = 1;
  for (const auto& a : axes) total *= static_cast<long>(a.second.size());

  int rc = kOk;
  for (long index = 0; index < total; ++index) {
    Ini ini = base.ini;
    ini.sections.erase("sweep");
    long rest = index;
    for (const auto& [sk, values] : axes) {
      ini.sections[sk.first][sk.second] = values[rest % values.size()];
      rest /= static_cast<long>(values.size());
    }
    const ExperimentConfig cfg = ExperimentConfig::from_ini(ini);
    const int r = run_experiment(cfg, out_dir + "/" + cfg.hash());
    rc = std::max(rc, r);
  }
  return rc;
}

} // namespace cavlab
