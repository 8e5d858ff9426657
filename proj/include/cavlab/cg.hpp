#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "boundary.hpp"
#include "energy.hpp"
#include "field.hpp"
#include "grid.hpp"

namespace cavlab {

struct PcgOptions {
  double rel_tol = 1e-10;    // on ||r||_2 relative to ||b||_2
  double abs_inf_tol = 0.0;  // optional additional stop on ||r||_inf
  long max_iter = 200000;
};

struct LinearSolveInfo {
  bool converged = false;
  long iterations = 0;
  double relative_residual = 0.0;
  double residual_inf = 0.0;
  std::vector<double> trace;  // ||r||_2 every few iterations, for failure reports
};

namespace detail {

/// Stencil of the SPD operator A = -div(a grad .) restricted to an active
/// node set. Fixed (non-active) neighbor values enter through `fixed_rhs`.
struct ActiveSystem {
  std::vector<double> diag;
  std::vector<long> nbr_index;   // 4 (2 in 1D) slots per row, -1 if fixed/absent
  std::vector<double> nbr_coef;  // matching off-diagonal coefficients (positive)
  std::vector<double> fixed_rhs;
  int stencil = 2;

  static ActiveSystem build(const CoefficientField& field, const std::vector<long>& active,
                            const std::vector<std::int64_t>& active_of_node,
                            const GridFunction& fixed_values) {
    const Grid& g = field.grid;
    const double inv_h2 = 1.0 / (g.h() * g.h());
    ActiveSystem s;
    s.stencil = g.dim == 1 ? 2 : 4;
    const std::size_t m = active.size();
    s.diag.assign(m, 0.0);
    s.nbr_index.assign(m * s.stencil, -1);
    s.nbr_coef.assign(m * s.stencil, 0.0);
    s.fixed_rhs.assign(m, 0.0);

    for (std::size_t k = 0; k < m; ++k) {
      const long id = active[k];
      const int ix = g.node_x(id), iy = g.node_y(id);
      int slot = 0;
      auto add = [&](long nid, double coef) {
        s.diag[k] += coef;
        const std::int64_t ak = active_of_node[nid];
        if (ak >= 0) {
          s.nbr_index[k * s.stencil + slot] = ak;
          s.nbr_coef[k * s.stencil + slot] = coef;
        } else {
          s.fixed_rhs[k] += coef * fixed_values.v[nid];
        }
        ++slot;
      };
      if (g.dim == 1) {
        add(id - 1, edge_coefficient(field, 0, ix - 1) * inv_h2);
        add(id + 1, edge_coefficient(field, 0, ix) * inv_h2);
      } else {
        add(g.node_id(ix - 1, iy), edge_coefficient(field, 0, ix - 1, iy) * inv_h2);
        add(g.node_id(ix + 1, iy), edge_coefficient(field, 0, ix, iy) * inv_h2);
        add(g.node_id(ix, iy - 1), edge_coefficient(field, 1, ix, iy - 1) * inv_h2);
        add(g.node_id(ix, iy + 1), edge_coefficient(field, 1, ix, iy) * inv_h2);
      }
    }
    return s;
  }

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    const std::size_t m = diag.size();
    for (std::size_t k = 0; k < m; ++k) {
      double v = diag[k] * x[k];
      for (int t = 0; t < stencil; ++t) {
        const long j = nbr_index[k * stencil + t];
        if (j >= 0) v -= nbr_coef[k * stencil + t] * x[j];
      }
      y[k] = v;
    }
  }

  /// Symmetric Gauss-Seidel preconditioner: z = (D+U)^-1 D (D+L)^-1 r.
  /// Off-diagonal entries are negative of nbr_coef; lower/upper split by the
  /// active index order, which the sweeps follow deterministically.
  void precondition(const std::vector<double>& r, std::vector<double>& z) const {
    const std::size_t m = diag.size();
    for (std::size_t k = 0; k < m; ++k) {
      double v = r[k];
      for (int t = 0; t < stencil; ++t) {
        const long j = nbr_index[k * stencil + t];
        if (j >= 0 && j < static_cast<long>(k)) v += nbr_coef[k * stencil + t] * z[j];
      }
      z[k] = v / diag[k];
    }
    for (std::size_t kk = m; kk-- > 0;) {
      double v = z[kk] * diag[kk];
      for (int t = 0; t < stencil; ++t) {
        const long j = nbr_index[kk * stencil + t];
        if (j >= 0 && j > static_cast<long>(kk)) v += nbr_coef[kk * stencil + t] * z[j];
      }
      z[kk] = v / diag[kk];
    }
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s = std::max(s, std::abs(x));
  return s;
}

} // namespace detail

/// Jacobi-preconditioned conjugate gradients on the active node set.
/// `u` carries the fixed values on non-active nodes and the initial guess on
/// active ones; on return the active entries hold the solution.
/// `rhs` is indexed like `active` and excludes the fixed-value coupling.
inline LinearSolveInfo pcg_solve(const CoefficientField& field, const std::vector<long>& active,
                                 const std::vector<std::int64_t>& active_of_node,
                                 const std::vector<double>& rhs, GridFunction& u,
                                 const PcgOptions& opt = {}) {
  const detail::ActiveSystem sys =
      detail::ActiveSystem::build(field, active, active_of_node, u);
  const std::size_t m = active.size();

  std::vector<double> x(m), b(m), r(m), z(m), p(m), ap(m);
  for (std::size_t k = 0; k < m; ++k) x[k] = u.v[active[k]];
  for (std::size_t k = 0; k < m; ++k) b[k] = rhs[k] + sys.fixed_rhs[k];

  sys.apply(x, ap);
  for (std::size_t k = 0; k < m; ++k) r[k] = b[k] - ap[k];

  const double bnorm = std::sqrt(detail::dot(b, b));
  const double stop2 = opt.rel_tol * (bnorm > 0.0 ? bnorm : 1.0);

  LinearSolveInfo info;
  double rn2 = std::sqrt(detail::dot(r, r));
  double rho_prev = 0.0;
  long it = 0;
  while (it < opt.max_iter) {
    const double rinf = detail::inf_norm(r);
    if (rn2 <= stop2 || (opt.abs_inf_tol > 0.0 && rinf <= opt.abs_inf_tol)) {
      info.converged = true;
      break;
    }
    sys.precondition(r, z);
    const double rho = detail::dot(r, z);
    if (it == 0) {
      p = z;
    } else {
      const double beta = rho / rho_prev;
      for (std::size_t k = 0; k < m; ++k) p[k] = z[k] + beta * p[k];
    }
    sys.apply(p, ap);
    const double alpha = rho / detail::dot(p, ap);
    for (std::size_t k = 0; k < m; ++k) x[k] += alpha * p[k];
    for (std::size_t k = 0; k < m; ++k) r[k] -= alpha * ap[k];
    rho_prev = rho;
    rn2 = std::sqrt(detail::dot(r, r));
    ++it;
    if (it % 50 == 0) info.trace.push_back(rn2);
  }
  if (m == 0) info.converged = true;

  info.iterations = it;
  info.relative_residual = bnorm > 0.0 ? rn2 / bnorm : rn2;
  info.residual_inf = detail::inf_norm(r);
  for (std::size_t k = 0; k < m; ++k) u.v[active[k]] = x[k];
  return info;
}

inline void interior_active_set(const Grid& g, std::vector<long>* active,
                                std::vector<std::int64_t>* active_of_node) {
  active->clear();
  active_of_node->assign(g.node_count(), -1);
  for (long id = 0; id < g.node_count(); ++id) {
    if (!g.node_on_boundary(id)) {
      (*active_of_node)[id] = static_cast<std::int64_t>(active->size());
      active->push_back(id);
    }
  }
}

/// Solve div(a grad u) = rhs in the interior with Dirichlet data on the
/// domain boundary. rhs may be empty (treated as zero), giving a-harmonic
/// extensions. Non-convergence is reported through the returned info, which
/// carries the residual trace.
inline std::pair<GridFunction, LinearSolveInfo> solve_linear(const CoefficientField& field,
                                                             const GridFunction* rhs,
                                                             const BoundaryData& boundary,
                                                             const PcgOptions& opt = {}) {
  require_same_grid(field.grid, boundary.grid, "solve_linear");
  if (rhs) require_same_grid(field.grid, rhs->grid, "solve_linear");
  GridFunction u = from_boundary(boundary);

  std::vector<long> active;
  std::vector<std::int64_t> index;
  interior_active_set(field.grid, &active, &index);

  std::vector<double> b(active.size(), 0.0);
  if (rhs)
    for (std::size_t k = 0; k < active.size(); ++k) b[k] = -rhs->v[active[k]];

  LinearSolveInfo info = pcg_solve(field, active, index, b, u, opt);
  return {std::move(u), info};
}

inline std::pair<GridFunction, LinearSolveInfo> solve_harmonic(const CoefficientField& field,
                                                               const BoundaryData& boundary,
                                                               const PcgOptions& opt = {}) {
  return solve_linear(field, nullptr, boundary, opt);
}

} // namespace cavlab
