#include <catch2/catch_amalgamated.hpp>

#include "cavlab/twophase.hpp"
#include "oracles.hpp"

using namespace cavlab;

namespace {

CoefficientField identity_field(const Grid& g) {
  return generate_coefficients(g, FieldKind::Constant, FieldParams{}, 0);
}

const PerturbationProfile kIndicator{ProfileTag::Indicator};

double crossing_up(const GridFunction& u) {
  for (int i = 0; i + 1 < u.grid.n; ++i)
    if (u.v[i] <= 0.0 && u.v[i + 1] > 0.0) {
      const double du = u.v[i + 1] - u.v[i];
      return u.grid.coord(i) + (du > 0 ? -u.v[i] / du : 0.0) * u.grid.h();
    }
  return -1.0;
}

} // namespace

TEST_CASE("1D two-phase minimizer matches the parametric oracle", "[twophase]") {
  const Grid g = make_grid(1, 513, 1.0);
  const CoefficientField f = identity_field(g);
  const double s = 0.1, b = 1.0;
  const BoundaryData phi = boundary_endpoints(g, -s, b);
  SolveOptions opt;
  opt.tol = 1e-5;
  const EpsilonLadder ladder = EpsilonLadder::down_to(0.1, 0.5, 4e-3);
  auto [u, rep] = minimize_twophase(f, phi, kIndicator, ladder, opt);
  REQUIRE(rep.converged);
  CHECK(rep.slab_candidate == Catch::Approx(s));
  CHECK(rep.inf_u == Catch::Approx(-s).margin(1e-6));

  const oracles::TwoPhase1D oracle = oracles::TwoPhase1D::solve(s, b, 200000);
  const double x0 = crossing_up(u);
  CHECK(std::abs(x0 - oracle.x0) < 2 * g.h() + 2 * ladder.final_eps());

  REQUIRE(!rep.points.empty());
  const GradientControl& gc = rep.points.front().control;
  CHECK(gc.slope_pos == Catch::Approx(oracle.slope_pos).epsilon(0.10));
  CHECK(gc.slope_neg == Catch::Approx(oracle.slope_neg).epsilon(0.10));
}

TEST_CASE("nonnegative data reduces to the one-phase problem", "[twophase]") {
  const Grid g = make_grid(1, 257, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_endpoints(g, 0.0, 1.0);
  SolveOptions opt;
  opt.tol = 1e-5;
  const EpsilonLadder ladder = EpsilonLadder::down_to(0.1, 0.5, 8e-3);
  auto [u, rep] = minimize_twophase(f, phi, kIndicator, ladder, opt);
  REQUIRE(rep.converged);
  CHECK(rep.inf_u >= -1e-10 * std::max(1.0, u.max_abs()));

  // bitwise-consistent with the one-phase continuation up to solver tolerance
  const ContinuationResult one = continuation(f, phi, kIndicator, ladder, opt);
  double worst = 0.0;
  for (long id = 0; id < g.node_count(); ++id)
    worst = std::max(worst, std::abs(u.v[id] - one.u0.v[id]));
  CHECK(worst < 1e-10);
}

TEST_CASE("slab condition flags follow the sweep", "[twophase]") {
  const Grid g = make_grid(1, 257, 1.0);
  const CoefficientField f = identity_field(g);
  const BoundaryData phi = boundary_endpoints(g, -0.08, 1.0);
  SolveOptions opt;
  opt.tol = 1e-5;
  const EpsilonLadder ladder = EpsilonLadder::down_to(0.1, 0.5, 8e-3);
  auto [u, rep] = minimize_twophase(f, phi, kIndicator, ladder, opt, {0.2, 0.1, 0.05, 0.025});
  REQUIRE(rep.converged);
  REQUIRE(rep.slab_ok.size() == 4);
  CHECK(rep.slab_ok[0]);       // inf u ~ -0.08 >= -0.2
  CHECK(rep.slab_ok[1]);       // >= -0.1
  CHECK_FALSE(rep.slab_ok[2]); // not >= -0.05
  CHECK_FALSE(rep.slab_ok[3]);
}

TEST_CASE("slab value is monotone in the boundary depth", "[twophase]") {
  const Grid g = make_grid(1, 257, 1.0);
  const CoefficientField f = identity_field(g);
  SolveOptions opt;
  opt.tol = 1e-5;
  const EpsilonLadder ladder = EpsilonLadder::down_to(0.1, 0.5, 8e-3);
  double prev = 0.0;
  for (const double s : {0.05, 0.1, 0.2}) {
    const BoundaryData phi = boundary_endpoints(g, -s, 1.0);
    auto [u, rep] = minimize_twophase(f, phi, kIndicator, ladder, opt);
    REQUIRE(rep.converged);
    CHECK(std::abs(rep.inf_u) >= prev - 1e-8);
    prev = std::abs(rep.inf_u);
  }
}

TEST_CASE("negative density of model configurations", "[twophase]") {
  // one-phase: identically zero ratios
  const Grid g1 = make_grid(1, 1025, 1.0);
  GridFunction cone(g1);
  for (int i = 0; i < g1.n; ++i) cone.v[i] = std::max(0.0, g1.coord(i) - 0.5);
  const NegativeDensity nd1 = negative_density(cone, 0.5, 0.0, {0.05, 0.1, 0.2}, 0.0);
  CHECK(nd1.max_ratio == 0.0);

  // planar wedge with a negative sector of opening alpha: sector area over
  // r^2 equals alpha/2 at every radius
  const Grid g2 = make_grid(2, 513, 1.0);
  const double alpha = 3.14159265358979324 / 8.0;
  GridFunction wedge(g2);
  for (long id = 0; id < g2.node_count(); ++id) {
    const double x = g2.coord(g2.node_x(id)) - 0.5, y = g2.coord(g2.node_y(id)) - 0.5;
    const double th = std::atan2(y, x);
    wedge.v[id] = (th >= 0.0 && th < alpha) ? -1.0 : 1.0;
  }
  const std::vector<double> radii{0.05, 0.1, 0.2};
  const NegativeDensity nd2 = negative_density(wedge, 0.5, 0.5, radii, 0.0);
  for (std::size_t k = 0; k < radii.size(); ++k)
    CHECK(nd2.ratios[k] == Catch::Approx(alpha / 2.0).margin(4 * g2.h() / radii[k]));
}

TEST_CASE("gradient control on a symmetric synthetic crossing", "[twophase]") {
  const Grid g = make_grid(2, 257, 1.0);
  GridFunction tilt(g);
  for (long id = 0; id < g.node_count(); ++id)
    tilt.v[id] = g.coord(g.node_x(id)) - 0.5;
  const GradientControl gc = gradient_control(tilt, 0.5, 0.5, 0.0, 0.125);
  CHECK(gc.slope_pos == Catch::Approx(gc.slope_neg).epsilon(1e-9));
  CHECK(gc.ratio == Catch::Approx(1.0).epsilon(1e-6));

  // one-phase point is refused
  GridFunction pos(g);
  for (long id = 0; id < g.node_count(); ++id)
    pos.v[id] = std::max(0.0, g.coord(g.node_x(id)) - 0.5);
  CHECK_THROWS_AS(gradient_control(pos, 0.7, 0.5, 0.0, 0.125), std::invalid_argument);
}
