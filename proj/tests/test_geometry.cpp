#include <catch2/catch_amalgamated.hpp>

#include "cavlab/geometry.hpp"
#include "cavlab/solver.hpp"
#include "oracles.hpp"

using namespace cavlab;

namespace {

CoefficientField identity_field(const Grid& g) {
  return generate_coefficients(g, FieldKind::Constant, FieldParams{}, 0);
}

GridFunction cone_1d(const Grid& g, double x0, double slope = std::sqrt(2.0)) {
  GridFunction u(g);
  for (int i = 0; i < g.n; ++i) u.v[i] = slope * std::max(0.0, g.coord(i) - x0);
  return u;
}

GridFunction half_plane_2d(const Grid& g, double x0 = 0.5) {
  GridFunction u(g);
  for (long id = 0; id < g.node_count(); ++id)
    u.v[id] = std::max(0.0, g.coord(g.node_x(id)) - x0);
  return u;
}

} // namespace

TEST_CASE("positivity set and free boundary basics", "[geometry]") {
  const Grid g = make_grid(1, 65, 1.0);
  const GridFunction zero(g, 0.0);
  CHECK(free_boundary(zero, 0.0).empty());
  const auto mask = positivity_set(zero, 0.0);
  CHECK(std::count(mask.begin(), mask.end(), true) == 0);

  const GridFunction cone = cone_1d(g, 0.25);
  const FreeBoundarySet fb = free_boundary(cone, 0.0);
  REQUIRE(fb.cells.size() == 1);
  // the unique mixed cell contains the vertex
  CHECK(std::abs(fb.cell_center_x(0) - 0.25) <= 0.5 * g.h() + 1e-12);
}

TEST_CASE("free boundary cells touch both phases", "[geometry]") {
  const Grid g = make_grid(2, 65, 1.0);
  GridFunction u(g);
  for (long id = 0; id < g.node_count(); ++id) {
    const double x = g.coord(g.node_x(id)), y = g.coord(g.node_y(id));
    u.v[id] = std::sin(3.0 * x + 1.0) * std::cos(2.0 * y);
  }
  const double tau = 0.1;
  const FreeBoundarySet fb = free_boundary(u, tau);
  REQUIRE(!fb.empty());
  for (long c : fb.cells) {
    const int cx = g.cell_x(c), cy = g.cell_y(c);
    bool pos = false, non = false;
    for (int dx = 0; dx < 2; ++dx)
      for (int dy = 0; dy < 2; ++dy) (u.at(cx + dx, cy + dy) > tau ? pos : non) = true;
    REQUIRE((pos && non));
  }
}

TEST_CASE("growth fit on the exact cone", "[geometry]") {
  const Grid g = make_grid(1, 4097, 1.0);
  const GridFunction u = cone_1d(g, 0.25);
  const double h = g.h();
  const GrowthFit fit = growth_exponent(u, 0.25, 0.0, 4 * h, 0.125);
  CHECK(fit.sups_nondecreasing());
  CHECK(fit.exponent == Catch::Approx(1.0).margin(h / (4 * h) + 0.01));
  CHECK(fit.c_minus == Catch::Approx(std::sqrt(2.0)).margin(0.02));
  CHECK(fit.c_plus == Catch::Approx(std::sqrt(2.0)).margin(0.02));
}

TEST_CASE("growth fit recovers a synthetic power law", "[geometry]") {
  const Grid g = make_grid(2, 513, 1.0);
  GridFunction u(g);
  for (long id = 0; id < g.node_count(); ++id) {
    const double x = g.coord(g.node_x(id)) - 0.5, y = g.coord(g.node_y(id)) - 0.5;
    u.v[id] = std::pow(std::hypot(x, y), 0.7);
  }
  const GrowthFit fit = growth_exponent(u, 0.5, 0.5, 4 * g.h(), 0.25);
  CHECK(fit.exponent == Catch::Approx(0.7).margin(0.02));
}

TEST_CASE("growth fit refuses windows under four octaves", "[geometry]") {
  const Grid g = make_grid(1, 257, 1.0);
  const GridFunction u = cone_1d(g, 0.25);
  CHECK_THROWS_AS(growth_exponent(u, 0.25, 0.0, 4 * g.h(), 8 * 4 * g.h()),
                  std::invalid_argument);
  CHECK_THROWS_AS(growth_exponent(u, 0.25, 0.0, 2 * g.h(), 64 * g.h()), std::invalid_argument);
}

TEST_CASE("linear growth away from the eps level set", "[geometry]") {
  // exact cone: the empirical constant equals the slope
  const Grid g1 = make_grid(1, 1025, 1.0);
  const double eps = 0.05;
  const GridFunction cone = cone_1d(g1, 0.25);
  std::vector<long> samples;  // points beyond the transition layer
  for (int i = 0; i < g1.n; ++i)
    if (cone.v[i] >= 2 * eps && g1.coord(i) < 0.9) samples.push_back(i);
  const LinearGrowthResult res = linear_growth_check(cone, eps, samples);
  CHECK(res.c == Catch::Approx(std::sqrt(2.0)).epsilon(0.05));

  // unit-slope plane with the level set on grid nodes: ratio exactly 1
  const Grid g2 = make_grid(2, 11, 1.0);
  GridFunction plane(g2);
  for (long id = 0; id < g2.node_count(); ++id) plane.v[id] = g2.coord(g2.node_x(id));
  std::vector<long> all;
  for (long id = 0; id < g2.node_count(); ++id) all.push_back(id);
  const LinearGrowthResult res2 = linear_growth_check(plane, 0.1, all);
  CHECK(res2.c == Catch::Approx(1.0).epsilon(1e-12));

  // plateau exactly at the level: every point sits on the set, all skipped
  GridFunction plateau(g2, 0.1);
  const LinearGrowthResult res3 = linear_growth_check(plateau, 0.1, all);
  CHECK(res3.samples.empty());
  CHECK(res3.skipped == g2.node_count());
}

TEST_CASE("nondegeneracy constants", "[geometry]") {
  const Grid g = make_grid(1, 2049, 1.0);
  const GridFunction cone = cone_1d(g, 0.25);
  const double h = g.h();
  const double c = nondegeneracy(cone, 0.25, 0.0, {8 * h, 16 * h, 32 * h, 0.125}, 0.0);
  CHECK(c == Catch::Approx(std::sqrt(2.0)).margin(0.02));

  // interior point of the positive phase keeps a positive constant
  const double ci = nondegeneracy(cone, 0.75, 0.0, {0.125}, 0.0);
  CHECK(ci > std::sqrt(2.0));  // sup includes the value at the center already

  // refused away from the closure of the positivity set
  CHECK_THROWS_AS(nondegeneracy(cone, 0.1, 0.0, {8 * h}, 0.0), std::invalid_argument);
}

TEST_CASE("density ratio of model sets", "[geometry]") {
  const Grid g1 = make_grid(1, 4097, 1.0);
  const GridFunction cone = cone_1d(g1, 0.25);
  CHECK(density_ratio(cone, 0.25, 0.0, 0.125, 0.0) == Catch::Approx(0.5).margin(0.02));

  const Grid g2 = make_grid(2, 257, 1.0);
  const GridFunction hp = half_plane_2d(g2);
  CHECK(density_ratio(hp, 0.5, 0.5, 0.125, 0.0) == Catch::Approx(0.5).margin(0.03));

  CHECK_THROWS_AS(density_ratio(hp, 0.5, 0.5, 4 * g2.h(), 0.0), std::invalid_argument);
}

TEST_CASE("porosity of model sets", "[geometry]") {
  const Grid g1 = make_grid(1, 4097, 1.0);
  const GridFunction cone = cone_1d(g1, 0.25);
  CHECK(porosity(cone, 0.25, 0.0, 0.125, 0.0) == Catch::Approx(0.5).margin(0.03));

  const Grid g2 = make_grid(2, 257, 1.0);
  const GridFunction hp = half_plane_2d(g2);
  CHECK(porosity(hp, 0.5, 0.5, 0.125, 0.0) == Catch::Approx(0.5).margin(0.03));
}

TEST_CASE("density dominates the porosity ball fraction", "[geometry]") {
  // |{u>0} n B_r| >= |B_{mu r}|, so theta >= mu^n / omega_n-normalization.
  const Grid g = make_grid(2, 257, 1.0);
  GridFunction u(g);
  for (long id = 0; id < g.node_count(); ++id) {
    const double x = g.coord(g.node_x(id)), y = g.coord(g.node_y(id));
    u.v[id] = std::max(0.0, std::sin(5 * x + 0.3) * std::sin(3 * y + 1.1) - 0.2);
  }
  const double tau = 0.0;
  const FreeBoundarySet fb = free_boundary(u, tau);
  const auto dist = positivity_distance(u, tau);
  const double r = 0.1;
  int checked = 0;
  for (std::size_t k = 0; k < fb.cells.size(); k += 7) {
    const double x = fb.cell_center_x(k), y = fb.cell_center_y(k);
    if (std::min({x, y, 1 - x, 1 - y}) < r + g.h()) continue;
    const double theta = density_ratio(u, x, y, r, tau);
    const double mu = porosity(u, x, y, r, tau, &dist);
    REQUIRE(theta >= mu * mu / 3.1416);
    ++checked;
  }
  REQUIRE(checked > 10);
}

TEST_CASE("box dimension of constructed sets", "[geometry]") {
  const Grid g = make_grid(2, 513, 1.0);

  // full grid line: exactly one-dimensional across all octaves
  FreeBoundarySet line;
  line.grid = g;
  for (int cx = 0; cx < g.cells_per_axis(); ++cx)
    line.cells.push_back(g.cell_id(cx, g.cells_per_axis() / 2));
  const BoxDimension bd_line = box_dimension(line);
  CHECK(bd_line.dimension == Catch::Approx(1.0).margin(1e-9));
  CHECK(bd_line.fit_residual < 1e-9);

  // single point: zero-dimensional
  const Grid g1 = make_grid(1, 513, 1.0);
  FreeBoundarySet point;
  point.grid = g1;
  point.cells.push_back(100);
  const BoxDimension bd_point = box_dimension(point);
  CHECK(std::abs(bd_point.dimension) < 0.1);

  // circle: dimension 1 within a tenth
  FreeBoundarySet circle;
  circle.grid = g;
  for (long c = 0; c < g.cell_count(); ++c) {
    const double x = g.cell_center(g.cell_x(c)) - 0.5;
    const double y = g.cell_center(g.cell_y(c)) - 0.5;
    const double r = std::hypot(x, y);
    if (std::abs(r - 0.35) < g.h()) circle.cells.push_back(c);
  }
  const BoxDimension bd_circle = box_dimension(circle);
  CHECK(bd_circle.dimension == Catch::Approx(1.0).margin(0.1));
  CHECK(bd_circle.codimension == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("strip measures of model profiles", "[geometry]") {
  // cone: |{0 < u < mu}| = mu / sqrt(2), ratio constant in mu
  const Grid g1 = make_grid(1, 4097, 1.0);
  const GridFunction cone = cone_1d(g1, 0.25);
  for (const double mu : {0.05, 0.025, 0.0125}) {
    const StripEstimate s = strip_estimate(cone, 0.25, 0.0, 0.2, mu);
    CHECK(s.measure == Catch::Approx(mu / std::sqrt(2.0)).margin(3 * g1.h()));
    CHECK(s.measure_ratio == Catch::Approx(1.0 / std::sqrt(2.0)).margin(3 * g1.h() / mu));
  }

  // half-plane slab: measure ~ mu * 2r, ratio ~ 2
  const Grid g2 = make_grid(2, 513, 1.0);
  const GridFunction hp = half_plane_2d(g2);
  const double r = 0.2;
  for (const double mu : {0.1, 0.05}) {
    const StripEstimate s = strip_estimate(hp, 0.5, 0.5, r, mu);
    CHECK(s.measure_ratio == Catch::Approx(2.0).margin(0.15));
    // |grad u| = 1 on the slab, so the Dirichlet ratio matches the measure ratio
    CHECK(s.dirichlet_ratio == Catch::Approx(s.measure_ratio).epsilon(0.05));
  }
}

TEST_CASE("dyadic decay on the exact cone", "[geometry]") {
  const Grid g = make_grid(1, 4097, 1.0);
  const GridFunction cone = cone_1d(g, 0.25);
  const double ds = 1.0 / 16.0;
  const DyadicDecay d = dyadic_decay(cone, 0.25, 0.0, ds, 0.0);
  CHECK(d.max_k_verified == d.k_cap);  // every resolvable scale verified
  CHECK(d.k_cap >= 5);
  CHECK(d.implied_lipschitz == Catch::Approx(8.0));
  CHECK(d.implied_lipschitz >= std::sqrt(2.0));

  CHECK_THROWS_AS(dyadic_decay(cone, 0.25, 0.0, 1.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dyadic_decay(cone, 0.75, 0.0, ds, 0.0), std::invalid_argument);  // not on FB
}

TEST_CASE("dyadic decay fails at the analytic crossover for a Hoelder cusp", "[geometry]") {
  const Grid g = make_grid(1, 4097, 1.0);
  GridFunction u(g);
  const double xi = 0.5;
  for (int i = 0; i < g.n; ++i) u.v[i] = std::pow(std::abs(g.coord(i) - xi), 0.7);
  const double ds = 1.0 / 16.0;
  const DyadicDecay d = dyadic_decay(u, xi, 0.0, ds, 0.0);
  // sup(B_{sqrt(ds)/2^k}) = (sqrt(ds)/2^k)^0.7 <= 2^-k first fails at
  // k > (0.7/0.3) * log2(1/sqrt(ds))
  const double k_star = (0.7 / 0.3) * std::log2(1.0 / std::sqrt(ds));
  REQUIRE(d.max_k_verified >= 0);
  CHECK(d.max_k_verified < d.k_cap);
  CHECK(std::abs((d.max_k_verified + 1) - k_star) <= 1.0);
}

TEST_CASE("free boundary slope and flux form", "[geometry]") {
  // unit medium cone: slope sqrt(2), flux form 2
  const Grid g = make_grid(1, 2049, 1.0);
  const CoefficientField f = identity_field(g);
  const GridFunction cone = cone_1d(g, 0.25);
  const FreeBoundarySet fb = free_boundary(cone, 0.0);
  REQUIRE(fb.cells.size() == 1);
  const FbSlope s = fb_slope(cone, f, fb.cells[0], 0.0);
  CHECK(s.gradient_norm == Catch::Approx(std::sqrt(2.0)).epsilon(1e-10));
  CHECK(s.flux_form == Catch::Approx(2.0).epsilon(1e-10));

  // layered medium with the vertex inside the a = 4 layer: slope sqrt(1/2)
  FieldParams p;
  p.lambda = 1.0;
  p.Lambda = 4.0;
  p.breaks = {0.5};
  p.values = {1.0, 4.0};
  const CoefficientField lay = generate_coefficients(g, FieldKind::Layered, p, 0);
  const GridFunction drop = cone_1d(g, 0.75, std::sqrt(0.5));
  const FreeBoundarySet fb2 = free_boundary(drop, 0.0);
  REQUIRE(fb2.cells.size() == 1);
  const FbSlope s2 = fb_slope(drop, lay, fb2.cells[0], 0.0);
  CHECK(s2.gradient_norm == Catch::Approx(std::sqrt(0.5)).epsilon(1e-10));
  CHECK(s2.flux_form == Catch::Approx(2.0).epsilon(1e-10));

  // synthetic slope 3 in the unit medium: pure evaluation, flux form 9
  const GridFunction steep = cone_1d(g, 0.25, 3.0);
  const FbSlope s3 = fb_slope(steep, f, free_boundary(steep, 0.0).cells[0], 0.0);
  CHECK(s3.flux_form == Catch::Approx(9.0).epsilon(1e-10));
}

TEST_CASE("default positivity threshold", "[geometry]") {
  const Grid g = make_grid(1, 65, 1.0);
  GridFunction u(g, 0.0);
  u.v[30] = 2.0;
  CHECK(default_tau(u, 0.05) == 0.05);                  // eps-solutions threshold at eps
  CHECK(default_tau(u, 0.0) == Catch::Approx(2e-12));   // dust floor for limits
}
