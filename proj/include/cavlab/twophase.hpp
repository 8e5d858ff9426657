#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "geometry.hpp"
#include "solver.hpp"

namespace cavlab {

struct NegativeDensity {
  std::vector<double> radii;
  std::vector<double> ratios;  // |{u < -tau} n B_r| / r^n
  double max_ratio = 0.0;
};

/// Scale-invariant density of the negative phase around X0.
inline NegativeDensity negative_density(const GridFunction& u, double cx, double cy,
                                        const std::vector<double>& radii, double tau) {
  const Grid& g = u.grid;
  const double h = g.h();
  const int ix = static_cast<int>(std::lround(cx / h));
  const int iy = g.dim == 2 ? static_cast<int>(std::lround(cy / h)) : 0;
  NegativeDensity out;
  for (double r : radii) {
    if (r < 8.0 * h * (1.0 - 1e-12))
      throw std::invalid_argument("negative_density: radius below 8h");
    const BallStencil ball = BallStencil::make(g, r);
    if (!ball.fits_inside(g, ix, iy))
      throw std::invalid_argument("negative_density: ball leaves the domain");
    long count = 0;
    for (const auto& [dx, dy] : ball.offsets)
      if (u.v[g.node_id(ix + dx, g.dim == 2 ? iy + dy : 0)] < -tau) ++count;
    const double vol = count * (g.dim == 1 ? h : h * h);
    const double ratio = vol / std::pow(r, g.dim);
    out.radii.push_back(r);
    out.ratios.push_back(ratio);
    out.max_ratio = std::max(out.max_ratio, ratio);
  }
  return out;
}

struct GradientControl {
  double slope_pos = 0.0;  // |grad u+| from dyadic sup fit
  double slope_neg = 0.0;  // |grad u-|
  double ratio = 0.0;      // slope_pos / max(slope_neg, floor)
};

/// One-sided slopes at a two-phase free boundary point via least-squares fits
/// of sup_{B_r} u+/- against r over dyadic radii. Refuses one-phase points:
/// both phases must be present within B_{8h}(X0).
inline GradientControl gradient_control(const GridFunction& u, double cx, double cy, double tau,
                                        double r_max) {
  const Grid& g = u.grid;
  const double h = g.h();
  const int ix = static_cast<int>(std::lround(cx / h));
  const int iy = g.dim == 2 ? static_cast<int>(std::lround(cy / h)) : 0;

  bool pos = false, neg = false;
  const BallStencil probe = BallStencil::make(g, 8.0 * h);
  if (!probe.fits_inside(g, ix, iy))
    throw std::invalid_argument("gradient_control: point too close to the domain boundary");
  for (const auto& [dx, dy] : probe.offsets) {
    const double v = u.v[g.node_id(ix + dx, g.dim == 2 ? iy + dy : 0)];
    pos |= v > tau;
    neg |= v < -tau;
  }
  if (!pos || !neg)
    throw std::invalid_argument("gradient_control: not a two-phase free boundary point");

  double spr = 0.0, snr = 0.0, srr = 0.0;
  for (double r = 4.0 * h; r <= r_max * (1.0 + 1e-12); r *= 2.0) {
    const BallStencil ball = BallStencil::make(g, r);
    if (!ball.fits_inside(g, ix, iy)) break;
    double sp = 0.0, sn = 0.0;
    for (const auto& [dx, dy] : ball.offsets) {
      const double v = u.v[g.node_id(ix + dx, g.dim == 2 ? iy + dy : 0)];
      sp = std::max(sp, v);
      sn = std::max(sn, -v);
    }
    spr += sp * r;
    snr += sn * r;
    srr += r * r;
  }
  if (srr == 0.0) throw std::invalid_argument("gradient_control: no admissible radii");

  GradientControl out;
  out.slope_pos = spr / srr;
  out.slope_neg = snr / srr;
  out.ratio = out.slope_pos / std::max(out.slope_neg, h);
  return out;
}

struct TwoPhasePoint {
  double x = 0.0, y = 0.0;
  GradientControl control;
  NegativeDensity density;
};

struct TwoPhaseReport {
  double inf_u = 0.0;
  double slab_candidate = 0.0;  // |inf phi| recorded from the data
  std::vector<double> slab_delta_stars;
  std::vector<bool> slab_ok;  // inf u >= -delta_star
  std::vector<TwoPhasePoint> points;
  std::vector<SolveReport> rungs;
  bool converged = false;
};

/// Sign-changing minimization: the one-phase continuation pipeline run with
/// signed boundary data (the nonnegativity post-condition is waived), followed
/// by slab, negative-density and gradient-control diagnostics.
inline std::pair<GridFunction, TwoPhaseReport> minimize_twophase(
    const CoefficientField& field, const BoundaryData& boundary,
    const PerturbationProfile& profile, const EpsilonLadder& ladder, const SolveOptions& options,
    const std::vector<double>& slab_delta_stars = {0.2, 0.1, 0.05, 0.025}) {
  TwoPhaseReport report;
  double inf_phi = 0.0;
  for (long id = 0; id < boundary.grid.node_count(); ++id)
    if (boundary.grid.node_on_boundary(id)) inf_phi = std::min(inf_phi, boundary.values[id]);
  report.slab_candidate = std::abs(inf_phi);

  ContinuationResult cont = continuation(field, boundary, profile, ladder, options, true);
  report.rungs = std::move(cont.rungs);
  report.converged = cont.converged;
  GridFunction u = std::move(cont.u0);

  report.inf_u = u.min_value();
  report.slab_delta_stars = slab_delta_stars;
  for (double ds : slab_delta_stars) report.slab_ok.push_back(report.inf_u >= -ds);

  const double tau = default_tau(u, 0.0);
  const FreeBoundarySet fb = free_boundary(u, tau);
  const Grid& g = u.grid;
  const double h = g.h();
  std::vector<double> radii;
  for (double r = 8.0 * h; r <= 32.0 * h * (1.0 + 1e-12) && r < g.length / 4.0; r *= 2.0)
    radii.push_back(r);

  for (std::size_t k = 0; k < fb.cells.size(); ++k) {
    const double x = fb.cell_center_x(k);
    const double y = fb.cell_center_y(k);
    TwoPhasePoint pt;
    pt.x = x;
    pt.y = y;
    try {
      pt.control = gradient_control(u, x, y, tau, g.length / 8.0);
    } catch (const std::invalid_argument&) {
      continue;  // one-phase point or too close to the boundary
    }
    if (!radii.empty()) {
      try {
        pt.density = negative_density(u, x, y, radii, tau);
      } catch (const std::invalid_argument&) {
      }
    }
    report.points.push_back(std::move(pt));
  }
  return {std::move(u), std::move(report)};
}

} // namespace cavlab
