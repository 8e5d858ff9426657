#include <catch2/catch_amalgamated.hpp>

#include "cavlab/geometry.hpp"
#include "cavlab/solver.hpp"
#include "oracles.hpp"

using namespace cavlab;

namespace {

CoefficientField identity_field(const Grid& g) {
  return generate_coefficients(g, FieldKind::Constant, FieldParams{}, 0);
}

const PerturbationProfile kIndicator{ProfileTag::Indicator};

/// Interpolated tau-crossing scanned from the right boundary (1D).
double crossing_from_right(const GridFunction& u, double tau) {
  int i = u.grid.n - 1;
  while (i >= 0 && u.v[i] > tau) --i;
  REQUIRE(i >= 0);
  REQUIRE(i < u.grid.n - 1);
  const double du = u.v[i + 1] - u.v[i];
  const double frac = du > 0.0 ? (tau - u.v[i]) / du : 0.0;
  return u.grid.coord(i) + frac * u.grid.h();
}

} // namespace

TEST_CASE("solve_linear reproduces linear profiles exactly", "[solver]") {
  const Grid g = make_grid(2, 33, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_linear(g, 0, 1.0);
  auto [u, info] = solve_harmonic(f, phi);
  REQUIRE(info.converged);
  for (long id = 0; id < g.node_count(); ++id)
    REQUIRE(std::abs(u.v[id] - g.coord(g.node_x(id))) < 1e-10);
}

TEST_CASE("solve_linear on the harmonic saddle", "[solver]") {
  // x1^2 - x2^2 is in the kernel of the discrete operator, so the interior
  // error is set by the solver tolerance rather than O(h^2).
  const Grid g = make_grid(2, 65, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_harmonic_saddle(g, 1.0);
  auto [u, info] = solve_harmonic(f, phi);
  REQUIRE(info.converged);
  double worst = 0.0;
  for (long id = 0; id < g.node_count(); ++id) {
    const double x = g.coord(g.node_x(id)), y = g.coord(g.node_y(id));
    worst = std::max(worst, std::abs(u.v[id] - (x * x - y * y)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("solve_linear obeys the discrete maximum principle", "[solver]") {
  const Grid g = make_grid(2, 49, 1.0);
  FieldParams p;
  p.lambda = 1.0;
  p.Lambda = 10.0;
  p.tile = 1.0 / 16.0;
  const CoefficientField f = generate_coefficients(g, FieldKind::Random, p, 5);
  const BoundaryData phi = boundary_random_nonneg(g, 12);
  REQUIRE(phi.nonneg);
  auto [u, info] = solve_harmonic(f, phi);
  REQUIRE(info.converged);
  CHECK(u.min_value() >= -1e-10);
}

TEST_CASE("solve_linear reports non-convergence with a trace", "[solver]") {
  const Grid g = make_grid(2, 65, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_harmonic_saddle(g, 1.0);
  PcgOptions tight;
  tight.rel_tol = 1e-14;
  tight.max_iter = 3;
  auto [u, info] = solve_harmonic(f, phi, tight);
  CHECK_FALSE(info.converged);
  CHECK(info.iterations == 3);
}

TEST_CASE("zero boundary data minimizes to zero in one iteration", "[solver]") {
  const Grid g = make_grid(2, 33, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_constant(g, 0.0);
  SolveOptions opt;
  auto [u, report] = minimize_eps(f, phi, kIndicator, 0.1, opt);
  CHECK(report.converged);
  CHECK(report.iterations == 1);
  CHECK(u.max_abs() == 0.0);
}

TEST_CASE("1D minimizer matches the exact layer solution", "[solver]") {
  const Grid g = make_grid(1, 1025, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_endpoints(g, 0.0, 1.0);
  SolveOptions opt;
  opt.tol = 1e-6;
  const double eps = 0.02;
  auto [u, report] = minimize_eps(f, phi, kIndicator, eps, opt);
  REQUIRE(report.converged);
  CHECK(report.energies_nonincreasing());

  const oracles::EpsSolution1D oracle(eps, 1.0);
  double worst = 0.0;
  for (int i = 0; i < g.n; ++i) worst = std::max(worst, std::abs(u.v[i] - oracle.u(g.coord(i))));
  CHECK(worst < 4.0 * g.h());
  CHECK(u.min_value() >= -1e-10);
}

TEST_CASE("minimizer agrees with the linear solve when the potential is inactive", "[solver]") {
  // Boundary data 1 + x keeps every cell average above eps, so beta_eps
  // vanishes on the iterate's range.
  const Grid g = make_grid(1, 257, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_endpoints(g, 1.0, 2.0);
  SolveOptions opt;
  auto [u, report] = minimize_eps(f, phi, kIndicator, 0.05, opt);
  REQUIRE(report.converged);
  auto [v, vinfo] = solve_harmonic(f, phi);
  REQUIRE(vinfo.converged);
  double worst = 0.0;
  for (int i = 0; i < g.n; ++i) worst = std::max(worst, std::abs(u.v[i] - v.v[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("steep data has no interior free boundary", "[solver]") {
  // phi(1) = 2 exceeds the sqrt(2) drop threshold: the limit is linear 2x.
  const Grid g = make_grid(1, 1025, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_endpoints(g, 0.0, 2.0);
  SolveOptions opt;
  const EpsilonLadder ladder = EpsilonLadder::down_to(0.1, 0.5, 2e-3);
  const ContinuationResult res = continuation(f, phi, kIndicator, ladder, opt);
  REQUIRE(res.converged);
  double worst = 0.0;
  for (int i = 0; i < g.n; ++i) worst = std::max(worst, std::abs(res.u0.v[i] - 2.0 * g.coord(i)));
  CHECK(worst < 4.0 * (ladder.final_eps() + g.h()));
}

TEST_CASE("1D continuation finds the one-phase free boundary", "[solver]") {
  const Grid g = make_grid(1, 257, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_endpoints(g, 0.0, 1.0);
  SolveOptions opt;
  opt.tol = 1e-6;
  const EpsilonLadder ladder = EpsilonLadder::down_to(0.1, 0.5, 8e-3);
  const ContinuationResult res = continuation(f, phi, kIndicator, ladder, opt);
  REQUIRE(res.converged);

  const oracles::OnePhase1D oracle{1.0};
  const double tau = default_tau(res.u0, 0.0);
  const double x0 = crossing_from_right(res.u0, tau);
  CHECK(std::abs(x0 - oracle.x0()) < 2.0 * g.h() + 2.0 * ladder.final_eps());

  // positive-phase slope from a least-squares fit over the well-resolved range
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int i = 0; i < g.n; ++i) {
    if (res.u0.v[i] < 0.2 || res.u0.v[i] > 0.8) continue;
    sx += g.coord(i); sy += res.u0.v[i]; sxx += g.coord(i) * g.coord(i); sxy += g.coord(i) * res.u0.v[i];
    ++m;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  CHECK(std::abs(slope - oracle.slope()) / oracle.slope() < 0.05);

  // recorded diagnostics
  REQUIRE(res.sup_diffs.size() == static_cast<std::size_t>(ladder.count - 1));
  CHECK(res.sharpening_monotone);
  for (const SolveReport& r : res.rungs) {
    CHECK(r.converged);
    CHECK(r.energies_nonincreasing());
    CHECK(r.min_value >= -1e-10 * std::max(1.0, res.u0.max_abs()));
  }

  // scaled Hoelder modulus stays bounded across the ladder
  REQUIRE(res.holder_moduli.size() == static_cast<std::size_t>(ladder.count));
  double lo = 1e300, hi = 0.0;
  for (double mmod : res.holder_moduli) {
    lo = std::min(lo, mmod);
    hi = std::max(hi, mmod);
  }
  CHECK(hi / lo < 2.0);
}

TEST_CASE("layered continuation places the free boundary by flux matching", "[solver]") {
  const Grid g = make_grid(1, 513, 1.0);
  FieldParams p;
  p.lambda = 1.0;
  p.Lambda = 4.0;
  p.breaks = {0.5};
  p.values = {1.0, 4.0};
  const CoefficientField f = generate_coefficients(g, FieldKind::Layered, p, 0);
  const BoundaryData phi = boundary_endpoints(g, 0.0, 0.2);
  SolveOptions opt;
  opt.tol = 1e-6;
  const EpsilonLadder ladder = EpsilonLadder::down_to(0.05, 0.5, 4e-3);
  const ContinuationResult res = continuation(f, phi, kIndicator, ladder, opt);
  REQUIRE(res.converged);

  const oracles::LayeredDrop1D oracle;
  const double x0 = crossing_from_right(res.u0, default_tau(res.u0, 0.0));
  CHECK(std::abs(x0 - oracle.x0()) < 2.0 * g.h() + 2.0 * ladder.final_eps());
}

TEST_CASE("mesh refinement moves the free boundary at first order", "[solver]") {
  const oracles::OnePhase1D oracle{1.0};
  double prev_err = -1.0;
  for (const int n : {129, 257}) {
    const Grid g = make_grid(1, n, 1.0);
    const CoefficientField f = identity_field(g);
    const BoundaryData phi = boundary_endpoints(g, 0.0, 1.0);
    SolveOptions opt;
    const EpsilonLadder ladder = EpsilonLadder::down_to(0.1, 0.5, 0.02);
    const ContinuationResult res = continuation(f, phi, kIndicator, ladder, opt);
    REQUIRE(res.converged);
    const double x0 = crossing_from_right(res.u0, default_tau(res.u0, 0.0));
    const double err = std::abs(x0 - oracle.x0());
    if (prev_err >= 0.0) CHECK(err <= prev_err + 2.0 * g.h());
    prev_err = err;
  }
}

TEST_CASE("nonnegativity across random elliptic media", "[solver]") {
  for (int trial = 0; trial < 5; ++trial) {
    const Grid g = make_grid(2, 65, 1.0);
    FieldParams p;
    p.lambda = 1.0;
    p.Lambda = trial % 2 == 0 ? 2.0 : 10.0;
    p.tile = 1.0 / 16.0;
    const CoefficientField f = generate_coefficients(g, FieldKind::Random, p, 100 + trial);
    const BoundaryData phi = boundary_random_nonneg(g, 200 + trial);
    REQUIRE(phi.nonneg);
    SolveOptions opt;
    opt.tol = 1e-6;
    const EpsilonLadder ladder{0.1, 0.5, 3};
    const ContinuationResult res = continuation(f, phi, kIndicator, ladder, opt);
    REQUIRE(res.converged);
    for (const SolveReport& r : res.rungs)
      REQUIRE(r.min_value >= -1e-10 * std::max(res.u0.max_abs(), 1e-30));
  }
}

TEST_CASE("ladder and option validation", "[solver]") {
  const Grid g = make_grid(1, 257, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_endpoints(g, 0.0, 1.0);

  EpsilonLadder bad{0.5 * g.h(), 0.5, 3};  // cold start below h
  CHECK_THROWS_AS(continuation(f, phi, kIndicator, bad, SolveOptions{}), std::invalid_argument);

  EpsilonLadder bad2{0.1, 1.5, 3};  // not decreasing
  CHECK_THROWS_AS(continuation(f, phi, kIndicator, bad2, SolveOptions{}), std::invalid_argument);

  SolveOptions bad3;
  bad3.shrink = 1.0;
  CHECK_THROWS_AS(minimize_eps(f, phi, kIndicator, 0.1, bad3), std::invalid_argument);

  CHECK_THROWS_AS(minimize_eps(f, phi, kIndicator, 0.1 * g.h(), SolveOptions{}),
                  std::invalid_argument);
}

TEST_CASE("rescale: identity window", "[solver]") {
  const Grid g = make_grid(2, 33, 1.0);
  const CoefficientField f = identity_field(g);
  GridFunction u(g);
  SplitMix64 rng(7);
  for (double& x : u.v) x = rng.uniform(-1.0, 1.0);
  auto [v, fv, info] = rescale_solution(u, f, 1.0);
  CHECK(info.delta_bar == 1.0);
  CHECK(v.v == u.v);
  CHECK(fv.a11 == f.a11);
}

TEST_CASE("rescale: cone slope halves at delta_bar = 1/4", "[solver]") {
  const Grid g = make_grid(1, 1025, 1.0);
  const CoefficientField f = identity_field(g);
  const double x0 = 0.25;
  GridFunction u(g);
  for (int i = 0; i < g.n; ++i)
    u.v[i] = std::sqrt(2.0) * std::max(0.0, g.coord(i) - x0);
  auto [v, fv, info] = rescale_solution(u, f, 0.25);
  CHECK(info.window_length == Catch::Approx(0.5));
  double worst = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double expected = std::sqrt(2.0) * std::max(0.0, 0.5 * g.coord(i) - x0);
    worst = std::max(worst, std::abs(v.v[i] - expected));
  }
  CHECK(worst < g.h());  // exact off the kink cell, interpolation-limited at it

  CHECK_THROWS_AS(rescale_solution(u, f, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rescale_solution(u, f, 1.5), std::invalid_argument);
}

TEST_CASE("rescale: residual identity with the scaled potential", "[solver]") {
  // Smooth bump profile so the source term is continuous; the cone makes the
  // interpolation exact away from the kink cell. There the zoomed residual
  // against delta * beta_eps must match the pulled-back residual to O(h).
  const Grid g = make_grid(1, 1025, 1.0);
  const CoefficientField f = identity_field(g);
  const PerturbationProfile bump{ProfileTag::Bump};
  const double eps = 0.25, delta_bar = 0.25, x0 = 0.3;
  GridFunction u(g);
  for (int i = 0; i < g.n; ++i)
    u.v[i] = std::sqrt(2.0) * std::max(0.0, g.coord(i) - x0);

  const GridFunction res_u = el_residual(u, f, bump, eps);
  auto [v, fv, info] = rescale_solution(u, f, delta_bar);
  const GridFunction res_v = el_residual(v, fv, bump, eps, delta_bar);

  const double s = std::sqrt(delta_bar);
  double worst = 0.0;
  for (int i = 1; i < g.n - 1; ++i) {
    const double xs = s * g.coord(i);
    if (std::abs(xs - x0) < 3.0 * g.h()) continue;  // kink cell of the cone
    if (xs < g.h() || xs > g.length - g.h()) continue;
    const double pulled = delta_bar * interpolate(res_u, xs);
    worst = std::max(worst, std::abs(res_v.v[i] - pulled));
  }
  // Lipschitz constant of beta_eps at eps = 1/4 is 6/eps^2 = 96, so one grid
  // cell of sampling slack costs up to ~ 96 h * delta_bar.
  CHECK(worst < 100.0 * g.h());
}
