#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "boundary.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "potential.hpp"

namespace cavlab {

/// Nodal scalar field. Boundary nodes are Dirichlet: they carry the trace
/// values exactly and are never treated as unknowns.
struct GridFunction {
  Grid grid;
  std::vector<double> v;

  GridFunction() = default;
  explicit GridFunction(const Grid& g, double fill = 0.0) : grid(g), v(g.node_count(), fill) {}

  double& at(long id) { return v[id]; }
  double at(long id) const { return v[id]; }
  double& at(int ix, int iy) { return v[grid.node_id(ix, iy)]; }
  double at(int ix, int iy) const { return v[grid.node_id(ix, iy)]; }

  double max_abs() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  double min_value() const {
    double m = v.empty() ? 0.0 : v[0];
    for (double x : v) m = std::min(m, x);
    return m;
  }

  void apply_boundary(const BoundaryData& b) {
    require_same_grid(grid, b.grid, "apply_boundary");
    for (long id = 0; id < grid.node_count(); ++id)
      if (grid.node_on_boundary(id)) v[id] = b.values[id];
  }

  /// Mean of the corner values of a cell (midpoint-rule sample).
  double cell_average(long c) const {
    if (grid.dim == 1) {
      const int cx = static_cast<int>(c);
      return 0.5 * (v[cx] + v[cx + 1]);
    }
    const int cx = grid.cell_x(c), cy = grid.cell_y(c);
    return 0.25 * (at(cx, cy) + at(cx + 1, cy) + at(cx, cy + 1) + at(cx + 1, cy + 1));
  }
};

inline GridFunction from_boundary(const BoundaryData& b, double interior_fill = 0.0) {
  GridFunction u(b.grid, interior_fill);
  u.apply_boundary(b);
  return u;
}

struct EnergyBreakdown {
  double dirichlet = 0.0;
  double potential = 0.0;
  double total() const { return dirichlet + potential; }
};

namespace detail {

/// Neumaier compensated accumulator. Energy sums feed central-difference
/// gradient checks at delta = 1e-6, which naive summation noise would swamp.
struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

/// Visit every node-to-node edge once: f(axis, ix, iy, id_from, id_to, quad_weight).
/// The quadrature weight is the dual volume h^dim, halved for edges lying on
/// the domain boundary so that each direction partitions the box exactly.
template <typename F>
inline void for_each_edge(const Grid& g, F&& f) {
  const double h = g.h();
  if (g.dim == 1) {
    for (int ix = 0; ix < g.n - 1; ++ix) f(0, ix, 0, static_cast<long>(ix), static_cast<long>(ix + 1), h);
    return;
  }
  const double full = h * h;
  for (int ix = 0; ix < g.n - 1; ++ix)
    for (int iy = 0; iy < g.n; ++iy) {
      const double w = (iy == 0 || iy == g.n - 1) ? 0.5 * full : full;
      f(0, ix, iy, g.node_id(ix, iy), g.node_id(ix + 1, iy), w);
    }
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n - 1; ++iy) {
      const double w = (ix == 0 || ix == g.n - 1) ? 0.5 * full : full;
      f(1, ix, iy, g.node_id(ix, iy), g.node_id(ix, iy + 1), w);
    }
}

inline double cell_volume(const Grid& g) {
  const double h = g.h();
  return g.dim == 1 ? h : h * h;
}

} // namespace detail

/// 1/2 <a grad u, grad u> assembled from edge differences with the harmonic
/// flux coefficients.
inline double dirichlet_energy(const GridFunction& u, const CoefficientField& field) {
  require_same_grid(u.grid, field.grid, "dirichlet_energy");
  const double h = u.grid.h();
  detail::Accumulator e;
  detail::for_each_edge(u.grid, [&](int axis, int ix, int iy, long a, long b, double w) {
    const double ae = edge_coefficient(field, axis, ix, iy);
    const double d = (u.v[b] - u.v[a]) / h;
    e.add(0.5 * ae * d * d * w);
  });
  return e.value();
}

/// F_eps(u): Dirichlet part plus midpoint-rule potential sum of B_eps(u).
inline EnergyBreakdown energy_eps(const GridFunction& u, const CoefficientField& field,
                                  const PerturbationProfile& profile, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("energy_eps: eps must be positive");
  require_same_grid(u.grid, field.grid, "energy_eps");
  EnergyBreakdown e;
  e.dirichlet = dirichlet_energy(u, field);
  const double vol = detail::cell_volume(u.grid);
  detail::Accumulator pot;
  for (long c = 0; c < u.grid.cell_count(); ++c) pot.add(bigB_eps(profile, eps, u.cell_average(c)));
  e.potential = pot.value() * vol;
  return e;
}

/// Sharp-interface energy: Dirichlet part plus the Lebesgue measure of the
/// discrete positivity set {u > tau}, cells sampled at their midpoint.
inline EnergyBreakdown energy_ac(const GridFunction& u, const CoefficientField& field, double tau) {
  if (tau < 0.0) throw std::invalid_argument("energy_ac: tau must be nonnegative");
  require_same_grid(u.grid, field.grid, "energy_ac");
  EnergyBreakdown e;
  e.dirichlet = dirichlet_energy(u, field);
  const double vol = detail::cell_volume(u.grid);
  long count = 0;
  for (long c = 0; c < u.grid.cell_count(); ++c)
    if (u.cell_average(c) > tau) ++count;
  e.potential = static_cast<double>(count) * vol;
  return e;
}

/// Chain-rule weight of the midpoint potential at a node: the average of
/// beta_eps over the cell midpoints adjacent to the node.
inline double beta_tilde_at(const GridFunction& u, const PerturbationProfile& profile, double eps,
                            int ix, int iy) {
  const Grid& g = u.grid;
  if (g.dim == 1) {
    return 0.5 * (beta_eps(profile, eps, u.cell_average(ix - 1)) +
                  beta_eps(profile, eps, u.cell_average(ix)));
  }
  double s = 0.0;
  for (int cx = ix - 1; cx <= ix; ++cx)
    for (int cy = iy - 1; cy <= iy; ++cy)
      s += beta_eps(profile, eps, u.cell_average(g.cell_id(cx, cy)));
  return 0.25 * s;
}

/// Discrete divergence of the edge fluxes at an interior node.
inline double discrete_divergence_at(const GridFunction& u, const CoefficientField& field,
                                     int ix, int iy) {
  const Grid& g = u.grid;
  const double h2 = g.h() * g.h();
  if (g.dim == 1) {
    const double aw = edge_coefficient(field, 0, ix - 1);
    const double ae = edge_coefficient(field, 0, ix);
    return (ae * (u.v[ix + 1] - u.v[ix]) - aw * (u.v[ix] - u.v[ix - 1])) / h2;
  }
  const double aw = edge_coefficient(field, 0, ix - 1, iy);
  const double ae = edge_coefficient(field, 0, ix, iy);
  const double as = edge_coefficient(field, 1, ix, iy - 1);
  const double an = edge_coefficient(field, 1, ix, iy);
  return (ae * (u.at(ix + 1, iy) - u.at(ix, iy)) - aw * (u.at(ix, iy) - u.at(ix - 1, iy)) +
          an * (u.at(ix, iy + 1) - u.at(ix, iy)) - as * (u.at(ix, iy) - u.at(ix, iy - 1))) / h2;
}

/// Euler-Lagrange residual div(a grad u) - beta_scale * beta_eps(u) at
/// interior nodes (zero on the Dirichlet layer). Equals minus the energy
/// gradient divided by the cell volume.
inline GridFunction el_residual(const GridFunction& u, const CoefficientField& field,
                                const PerturbationProfile& profile, double eps,
                                double beta_scale = 1.0) {
  if (!(eps > 0.0)) throw std::invalid_argument("el_residual: eps must be positive");
  require_same_grid(u.grid, field.grid, "el_residual");
  const Grid& g = u.grid;
  GridFunction r(g, 0.0);
  if (g.dim == 1) {
    for (int ix = 1; ix < g.n - 1; ++ix)
      r.v[ix] = discrete_divergence_at(u, field, ix, 0) -
                beta_scale * beta_tilde_at(u, profile, eps, ix, 0);
  } else {
    for (int ix = 1; ix < g.n - 1; ++ix)
      for (int iy = 1; iy < g.n - 1; ++iy)
        r.at(ix, iy) = discrete_divergence_at(u, field, ix, iy) -
                       beta_scale * beta_tilde_at(u, profile, eps, ix, iy);
  }
  return r;
}

/// First variation of energy_eps with respect to interior nodal values;
/// zero at Dirichlet nodes. energy_gradient = -el_residual * h^dim.
inline GridFunction energy_gradient(const GridFunction& u, const CoefficientField& field,
                                    const PerturbationProfile& profile, double eps) {
  GridFunction r = el_residual(u, field, profile, eps);
  const double vol = detail::cell_volume(u.grid);
  for (double& x : r.v) x = -x * vol;
  return r;
}

inline double residual_inf_norm(const GridFunction& r) { return r.max_abs(); }

} // namespace cavlab
