#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"
#include "rng.hpp"

namespace cavlab {

/// Dirichlet trace: nodal values on the boundary of the grid. Interior
/// entries of `values` are kept at zero and never read.
struct BoundaryData {
  Grid grid;
  std::vector<double> values;
  bool nonneg = false;
  std::string trace = "custom";

  double at(long node) const { return values[node]; }
};

inline BoundaryData boundary_from_function(const Grid& g,
                                           const std::function<double(double, double)>& phi,
                                           const std::string& name = "custom") {
  BoundaryData b;
  b.grid = g;
  b.trace = name;
  b.values.assign(g.node_count(), 0.0);
  bool nonneg = true;
  if (g.dim == 1) {
    b.values[0] = phi(0.0, 0.0);
    b.values[g.n - 1] = phi(g.length, 0.0);
    nonneg = b.values[0] >= 0.0 && b.values[g.n - 1] >= 0.0;
  } else {
    for (int ix = 0; ix < g.n; ++ix)
      for (int iy = 0; iy < g.n; ++iy) {
        if (!g.on_boundary(ix, iy)) continue;
        const double v = phi(g.coord(ix), g.coord(iy));
        b.values[g.node_id(ix, iy)] = v;
        if (v < 0.0) nonneg = false;
      }
  }
  b.nonneg = nonneg;
  return b;
}

/// phi(0) = v0, phi(L) = v1 (1D only).
inline BoundaryData boundary_endpoints(const Grid& g, double v0, double v1) {
  if (g.dim != 1) throw std::invalid_argument("boundary_endpoints: 1D only");
  return boundary_from_function(
      g, [&](double x, double) { return x == 0.0 ? v0 : v1; }, "endpoints");
}

inline BoundaryData boundary_constant(const Grid& g, double c) {
  return boundary_from_function(g, [&](double, double) { return c; }, "constant");
}

inline BoundaryData boundary_linear(const Grid& g, int axis, double amplitude) {
  return boundary_from_function(
      g, [&](double x, double y) { return amplitude * (axis == 0 ? x : y); }, "linear");
}

/// Trace of the radially symmetric profile that vanishes on the circle of
/// radius r0 and grows like slope * r0 * log(rho / r0) outside it. The
/// default slope sqrt(2) matches the drop condition of the unit medium;
/// rougher media want slope ~ sqrt(2 / a_effective).
inline BoundaryData boundary_radial_log(const Grid& g, double cx, double cy, double r0,
                                        double slope = std::sqrt(2.0)) {
  if (g.dim != 2) throw std::invalid_argument("boundary_radial_log: 2D only");
  if (!(r0 > 0.0)) throw std::invalid_argument("boundary_radial_log: r0 must be positive");
  const double A = slope * r0;
  return boundary_from_function(
      g,
      [&](double x, double y) {
        const double rho = std::hypot(x - cx, y - cy);
        return rho <= r0 ? 0.0 : A * std::log(rho / r0);
      },
      "radial_log");
}

inline BoundaryData boundary_harmonic_saddle(const Grid& g, double amplitude) {
  if (g.dim != 2) throw std::invalid_argument("boundary_harmonic_saddle: 2D only");
  return boundary_from_function(
      g, [&](double x, double y) { return amplitude * (x * x - y * y); }, "harmonic_saddle");
}

/// Random nonnegative trace: mixture of nonnegative basis bumps with
/// seed-determined weights. Used by the randomized solver checks.
inline BoundaryData boundary_random_nonneg(const Grid& g, std::uint64_t seed, double scale = 1.0) {
  SplitMix64 rng(seed);
  const double c0 = rng.uniform(0.0, 0.5);
  const double c1 = rng.uniform(0.0, 1.0);
  const double c2 = rng.uniform(0.0, 1.0);
  const double c3 = rng.uniform(0.0, 0.5);
  const int k = 1 + static_cast<int>(rng.next() % 3);
  BoundaryData b = boundary_from_function(
      g,
      [&](double x, double y) {
        const double s = std::sin(3.14159265358979324 * k * (x + y) / g.length);
        return scale * (c0 + c1 * x / g.length + c2 * (g.dim == 2 ? y / g.length : 0.0) + c3 * s * s);
      },
      "random_nonneg");
  return b;
}

} // namespace cavlab
