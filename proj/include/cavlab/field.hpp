#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"
#include "rng.hpp"

namespace cavlab {

enum class FieldKind { Constant, Layered, Checkerboard, Random, Smooth };

inline const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::Constant: return "constant";
    case FieldKind::Layered: return "layered";
    case FieldKind::Checkerboard: return "checkerboard";
    case FieldKind::Random: return "random";
    case FieldKind::Smooth: return "smooth";
  }
  return "?";
}

inline FieldKind field_kind_from_string(const std::string& s) {
  if (s == "constant") return FieldKind::Constant;
  if (s == "layered") return FieldKind::Layered;
  if (s == "checkerboard") return FieldKind::Checkerboard;
  if (s == "random") return FieldKind::Random;
  if (s == "smooth") return FieldKind::Smooth;
  throw std::invalid_argument("unknown field kind: " + s);
}

/// Generator parameters. Only the members relevant to the chosen kind are read.
struct FieldParams {
  double lambda = 1.0;  // lower ellipticity bound
  double Lambda = 1.0;  // upper ellipticity bound

  // constant kind: full symmetric matrix (a12 ignored in 1D)
  double a11 = 1.0, a12 = 0.0, a22 = 1.0;

  // layered kind
  int axis = 0;
  std::vector<double> breaks;  // physical coordinates, must be node-aligned
  std::vector<double> values;  // one more entry than breaks

  // checkerboard / random kinds
  double tile = 0.0;  // physical tile size, must be a whole number of cells
};

/// Cell-centered symmetric coefficient matrix with certified eigenvalue
/// bounds. Immutable after generation; concurrent reads are safe.
struct CoefficientField {
  Grid grid;
  std::vector<double> a11;
  std::vector<double> a12;  // empty in 1D
  std::vector<double> a22;  // empty in 1D
  double lambda = 1.0;
  double Lambda = 1.0;
  FieldKind kind = FieldKind::Constant;
  std::uint64_t seed = 0;

  bool isotropic_cell(long c, double* value) const {
    if (grid.dim == 1) { *value = a11[c]; return true; }
    if (a12[c] == 0.0 && a11[c] == a22[c]) { *value = a11[c]; return true; }
    return false;
  }

  /// Eigenvalue range of the cell matrix.
  void cell_eigs(long c, double* emin, double* emax) const {
    if (grid.dim == 1) { *emin = *emax = a11[c]; return; }
    const double tr2 = 0.5 * (a11[c] + a22[c]);
    const double d = std::sqrt(0.25 * (a11[c] - a22[c]) * (a11[c] - a22[c]) + a12[c] * a12[c]);
    *emin = tr2 - d;
    *emax = tr2 + d;
  }
};

/// Exhaustive per-cell eigenvalue audit against [lambda, Lambda].
/// `slack` absorbs the rounding of the eigenvalue computation itself.
inline bool audit_ellipticity(const CoefficientField& f, double slack = 1e-12) {
  const double lo = f.lambda * (1.0 - slack) - slack;
  const double hi = f.Lambda * (1.0 + slack) + slack;
  for (long c = 0; c < f.grid.cell_count(); ++c) {
    double emin, emax;
    f.cell_eigs(c, &emin, &emax);
    if (emin < lo || emax > hi) return false;
  }
  return true;
}

namespace detail {

inline int cells_for(double physical, double h, const char* what) {
  const double q = physical / h;
  const double r = std::round(q);
  if (r < 1.0 || std::abs(q - r) > 1e-9)
    throw std::invalid_argument(std::string(what) + " must be a whole number of grid cells");
  return static_cast<int>(r);
}

} // namespace detail

/// Build a coefficient field of the requested kind. The same
/// (kind, params, seed) triple always produces a bit-identical field.
inline CoefficientField generate_coefficients(const Grid& grid, FieldKind kind,
                                              const FieldParams& p, std::uint64_t seed) {
  if (!(p.lambda > 0.0) || !(p.lambda <= p.Lambda))
    throw std::invalid_argument("generate_coefficients: need 0 < lambda <= Lambda");

  CoefficientField f;
  f.grid = grid;
  f.lambda = p.lambda;
  f.Lambda = p.Lambda;
  f.kind = kind;
  f.seed = seed;
  const long nc = grid.cell_count();
  f.a11.assign(nc, 0.0);
  if (grid.dim == 2) {
    f.a12.assign(nc, 0.0);
    f.a22.assign(nc, 0.0);
  }

  auto set_scalar = [&](long c, double v) {
    f.a11[c] = v;
    if (grid.dim == 2) { f.a12[c] = 0.0; f.a22[c] = v; }
  };

  switch (kind) {
    case FieldKind::Constant: {
      for (long c = 0; c < nc; ++c) {
        f.a11[c] = p.a11;
        if (grid.dim == 2) { f.a12[c] = p.a12; f.a22[c] = p.a22; }
      }
      break;
    }
    case FieldKind::Layered: {
      if (p.values.size() != p.breaks.size() + 1)
        throw std::invalid_argument("layered field: need one more value than breaks");
      if (grid.dim == 2 && (p.axis < 0 || p.axis > 1))
        throw std::invalid_argument("layered field: axis must be 0 or 1");
      for (double b : p.breaks) detail::cells_for(b, grid.h(), "layer break");
      for (long c = 0; c < nc; ++c) {
        const int ci = (grid.dim == 1 || p.axis == 0) ? grid.cell_x(c) : grid.cell_y(c);
        const double x = grid.cell_center(ci);
        std::size_t layer = 0;
        while (layer < p.breaks.size() && x > p.breaks[layer]) ++layer;
        set_scalar(c, p.values[layer]);
      }
      break;
    }
    case FieldKind::Checkerboard: {
      const int tc = detail::cells_for(p.tile, grid.h(), "checkerboard tile");
      for (long c = 0; c < nc; ++c) {
        const int tx = grid.cell_x(c) / tc;
        const int ty = grid.cell_y(c) / tc;
        set_scalar(c, ((tx + ty) % 2 == 0) ? p.lambda : p.Lambda);
      }
      break;
    }
    case FieldKind::Random: {
      const int tc = detail::cells_for(p.tile, grid.h(), "random tile");
      const long tiles_per_axis = (grid.cells_per_axis() + tc - 1) / tc;
      for (long c = 0; c < nc; ++c) {
        const long tx = grid.cell_x(c) / tc;
        const long ty = grid.cell_y(c) / tc;
        const std::uint64_t tile_index = static_cast<std::uint64_t>(tx * tiles_per_axis + ty);
        SplitMix64 g(hash_combine(seed, tile_index));
        set_scalar(c, g.uniform(p.lambda, p.Lambda));
      }
      break;
    }
    case FieldKind::Smooth: {
      // Trigonometric blend; values hit the bounds exactly and the field has a
      // classical (Dini) modulus of continuity.
      SplitMix64 g(seed);
      const double f1 = 1.0 + static_cast<double>(g.next() % 3);
      const double f2 = 1.0 + static_cast<double>(g.next() % 3);
      const double p1 = g.uniform(0.0, 6.283185307179586);
      const double p2 = g.uniform(0.0, 6.283185307179586);
      for (long c = 0; c < nc; ++c) {
        const double x = grid.cell_center(grid.cell_x(c));
        const double y = grid.dim == 2 ? grid.cell_center(grid.cell_y(c)) : 0.0;
        const double s = std::sin(6.283185307179586 * (f1 * x + f2 * y) + p1) *
                         std::cos(6.283185307179586 * (f1 * x - f2 * y) + p2);
        set_scalar(c, p.lambda + (p.Lambda - p.lambda) * 0.5 * (s + 1.0));
      }
      break;
    }
  }

  if (!audit_ellipticity(f))
    throw std::invalid_argument("generate_coefficients: parameters violate ellipticity bounds");
  return f;
}

/// Flux coefficient of the edge leaving node (ix, iy) in direction `axis`.
/// Harmonic mean of the normal-direction entries of the two flanking cells;
/// edges on the domain boundary see a single cell and use its value directly.
inline double edge_coefficient(const CoefficientField& f, int axis, int ix, int iy = 0) {
  const Grid& g = f.grid;
  const int nc = g.cells_per_axis();
  if (g.dim == 1) {
    if (ix < 0 || ix >= nc) throw std::invalid_argument("edge_coefficient: edge out of range");
    return f.a11[ix];
  }
  auto harmonic = [](double a, double b) { return 2.0 * a * b / (a + b); };
  if (axis == 0) {
    if (ix < 0 || ix >= nc || iy < 0 || iy > nc)
      throw std::invalid_argument("edge_coefficient: edge out of range");
    const bool lo = iy > 0, hi = iy < nc;
    const double alo = lo ? f.a11[g.cell_id(ix, iy - 1)] : 0.0;
    const double ahi = hi ? f.a11[g.cell_id(ix, iy)] : 0.0;
    if (lo && hi) return harmonic(alo, ahi);
    return lo ? alo : ahi;
  }
  if (axis != 1 || iy < 0 || iy >= nc || ix < 0 || ix > nc)
    throw std::invalid_argument("edge_coefficient: edge out of range");
  const bool lo = ix > 0, hi = ix < nc;
  const double alo = lo ? f.a22[g.cell_id(ix - 1, iy)] : 0.0;
  const double ahi = hi ? f.a22[g.cell_id(ix, iy)] : 0.0;
  if (lo && hi) return harmonic(alo, ahi);
  return lo ? alo : ahi;
}

} // namespace cavlab
