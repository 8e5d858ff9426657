// Command-line front end: solve / continue / analyze / klip / twophase /
// report / sweep over structured-text experiment configs.

#include <CLI11.hpp>

#include <iostream>

#include "cavlab/experiment.hpp"

using namespace cavlab;

namespace {

int cmd_solve(const std::string& config_path, const std::string& out_dir) {
  const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (!cfg.solve_eps)
    throw ConfigError("[solve] eps is required for the solve command");
  std::filesystem::create_directories(out_dir);

  auto [u, rep] = minimize_eps(cfg.make_field(), cfg.make_boundary(), cfg.profile,
                               *cfg.solve_eps, cfg.solver);
  save_cavgrid(out_dir + "/solution.cavgrid", u);
  std::ofstream os(out_dir + "/solve_report.json");
  os << detail_exp::solve_report_json(rep).dump(2) << '\n';
  std::cout << (rep.converged ? "converged" : "not converged") << " in " << rep.iterations
            << " iterations, residual " << rep.final_residual << "\n";
  return rep.converged ? kOk : kSolverNonConvergence;
}

int cmd_analyze(const std::string& solution_path, const std::string& field_path,
                const std::string& report_dir, const std::string& config_path, double eps_level,
                double box_length) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = ExperimentConfig::from_file(config_path);
  } else {
    Ini ini;
    const GridFunction probe = load_cavgrid(solution_path, box_length);
    ini.sections["grid"]["dim"] = std::to_string(probe.grid.dim);
    ini.sections["grid"]["nodes"] = std::to_string(probe.grid.n);
    ini.sections["grid"]["length"] = detail::format_double(box_length);
    ini.sections["ladder"]["eps0"] = detail::format_double(std::max(eps_level, probe.grid.h()));
    ini.sections["ladder"]["count"] = "1";
    cfg = ExperimentConfig::from_ini(ini);
  }
  const GridFunction u = load_cavgrid(solution_path, cfg.grid.length);
  const CoefficientField field = load_cavfield(field_path, cfg.grid.length);
  require_same_grid(u.grid, field.grid, "analyze");
  const AnalyzeSummary s = analyze_solution(u, field, eps_level, cfg, report_dir);
  std::cout << (s.has_free_boundary
                    ? "analyzed " + std::to_string(s.eligible_points) + " free boundary points"
                    : std::string("no free boundary"))
            << "\n";
  return kOk;
}

int cmd_klip(const std::string& field_path, const std::string& config_path,
             std::vector<double> scales, int samples, std::uint64_t seed,
             const std::string& out_csv, double box_length) {
  CoefficientField field;
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = ExperimentConfig::from_file(config_path);
    field = cfg.make_field();
    if (scales.empty()) scales = cfg.klip_scales;
    if (samples < 0) samples = cfg.klip_samples;
    if (seed == 0) seed = cfg.klip_seed;
  } else {
    field = load_cavfield(field_path, box_length);
  }
  if (scales.empty()) scales = {field.grid.length / 4.0};
  if (samples < 0) samples = 8;
  if (seed == 0) seed = 1;

  const KLipReport rep = estimate_klip(field, scales, samples, seed);
  if (!out_csv.empty()) {
    CsvWriter csv(out_csv, config_path.empty() ? "none" : cfg.hash(), "scale,label,ratio,solved");
    for (const KLipSample& s : rep.samples) csv.row(s.scale, s.label, s.ratio, s.solved ? 1 : 0);
  }
  std::cout << "K >= " << rep.K << " over " << rep.samples.size() << " samples\n";
  for (const KLipSample& s : rep.samples)
    std::cout << "  d=" << s.scale << "  " << s.label << "  ratio=" << s.ratio << "\n";
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"cavitation free-boundary laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "run", solution_path, field_path, report_dir = "analysis";
  std::string out_csv;
  std::vector<double> scales;
  int samples = -1;
  std::uint64_t seed = 0;
  double eps_level = 0.0, box_length = 1.0;

  CLI::App* solve = app.add_subcommand("solve", "single-eps minimization");
  solve->add_option("--config", config_path)->required();
  solve->add_option("--out", out_dir);

  CLI::App* cont = app.add_subcommand("continue", "eps-continuation pipeline with diagnostics");
  cont->add_option("--config", config_path)->required();
  cont->add_option("--out", out_dir);

  CLI::App* analyze = app.add_subcommand("analyze", "free-boundary diagnostics of saved artifacts");
  analyze->add_option("--solution", solution_path)->required();
  analyze->add_option("--field", field_path)->required();
  analyze->add_option("--report", report_dir);
  analyze->add_option("--config", config_path);
  analyze->add_option("--eps", eps_level);
  analyze->add_option("--length", box_length);

  CLI::App* klip = app.add_subcommand("klip", "interior gradient-bound constant of a medium");
  klip->add_option("--field", field_path);
  klip->add_option("--config", config_path);
  klip->add_option("--scales", scales)->delimiter(',');
  klip->add_option("--samples", samples);
  klip->add_option("--seed", seed);
  klip->add_option("--csv", out_csv);
  klip->add_option("--length", box_length);

  CLI::App* twophase = app.add_subcommand("twophase", "sign-changing minimization pipeline");
  twophase->add_option("--config", config_path)->required();
  twophase->add_option("--out", out_dir);

  CLI::App* report = app.add_subcommand("report", "summarize a finished run directory");
  report->add_option("dir", out_dir)->required();

  CLI::App* sweep = app.add_subcommand("sweep", "cartesian product over [sweep] parameters");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--out", out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(config_path, out_dir);
    if (cont->parsed())
      return run_experiment(ExperimentConfig::from_file(config_path), out_dir);
    if (analyze->parsed())
      return cmd_analyze(solution_path, field_path, report_dir, config_path, eps_level, box_length);
    if (klip->parsed())
      return cmd_klip(field_path, config_path, scales, samples, seed, out_csv, box_length);
    if (twophase->parsed())
      return run_experiment(ExperimentConfig::from_file(config_path), out_dir, true);
    if (report->parsed()) return report_run(out_dir, std::cout);
    if (sweep->parsed()) return run_sweep(ExperimentConfig::from_file(config_path), out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
