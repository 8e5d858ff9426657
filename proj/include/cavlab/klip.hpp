#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cg.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace cavlab {

struct KLipSample {
  double scale = 0.0;     // ball diameter parameter d
  std::string label;
  double ratio = 0.0;     // d * ||grad h||_inf(B_{d/2}) / ||h||_inf(B_d)
  bool solved = true;
};

/// Sampled lower estimate of the interior gradient-bound constant of a medium:
/// K >= max over a-harmonic samples of d ||grad h|| / ||h||. The true constant
/// is a supremum over all a-harmonic functions, so the report carries
/// "K at least this" semantics plus the raw per-sample ratios.
struct KLipReport {
  std::vector<KLipSample> samples;
  double K = 0.0;
};

namespace detail {

struct BallProblem {
  std::vector<long> active;
  std::vector<std::int64_t> index;
  std::vector<long> ring;  // ball nodes with a neighbor outside the ball
};

inline BallProblem ball_problem(const Grid& g, int cx_i, int cy_i, double d) {
  const BallStencil ball = BallStencil::make(g, d);
  if (!ball.fits_inside(g, cx_i, cy_i))
    throw std::invalid_argument("estimate_klip: ball leaves the domain");
  std::vector<bool> inside(g.node_count(), false);
  for (const auto& [dx, dy] : ball.offsets)
    inside[g.node_id(cx_i + dx, g.dim == 2 ? cy_i + dy : 0)] = true;

  BallProblem p;
  p.index.assign(g.node_count(), -1);
  for (const auto& [dx, dy] : ball.offsets) {
    const int ix = cx_i + dx, iy = g.dim == 2 ? cy_i + dy : 0;
    const long id = g.node_id(ix, iy);
    bool interior = ix > 0 && ix < g.n - 1 && (g.dim == 1 || (iy > 0 && iy < g.n - 1));
    if (interior) {
      interior = inside[g.node_id(ix - 1, iy)] && inside[g.node_id(ix + 1, iy)];
      if (g.dim == 2)
        interior = interior && inside[g.node_id(ix, iy - 1)] && inside[g.node_id(ix, iy + 1)];
    }
    if (interior) {
      p.index[id] = static_cast<std::int64_t>(p.active.size());
      p.active.push_back(id);
    } else {
      p.ring.push_back(id);
    }
  }
  return p;
}

} // namespace detail

/// Estimate the (K-Lip) ratio of a medium by solving the homogeneous equation
/// on balls B_d around the domain center with deterministic probes (x1, x2,
/// x1^2 - x2^2) plus seeded band-limited random traces, alternating signed and
/// nonnegative. Gradients are centered differences one cell inside B_{d/2}.
inline KLipReport estimate_klip(const CoefficientField& field, const std::vector<double>& scales,
                                int random_samples, std::uint64_t seed,
                                const PcgOptions& copt = {}) {
  const Grid& g = field.grid;
  const double h = g.h();
  const int ci = (g.n - 1) / 2;
  const double cx = g.coord(ci), cy = g.dim == 2 ? g.coord(ci) : 0.0;

  KLipReport report;
  for (double d : scales) {
    if (!(d > 4.0 * h)) throw std::invalid_argument("estimate_klip: scale too small for the grid");
    detail::BallProblem prob = detail::ball_problem(g, ci, g.dim == 2 ? ci : 0, d);

    struct Trace {
      std::string label;
      std::function<double(double, double)> f;
    };
    std::vector<Trace> traces;
    traces.push_back({"probe_x1", [&](double x, double) { return x - cx; }});
    if (g.dim == 2) {
      traces.push_back({"probe_x2", [&](double, double y) { return y - cy; }});
      traces.push_back({"probe_saddle", [&](double x, double y) {
                          return (x - cx) * (x - cx) - (y - cy) * (y - cy);
                        }});
    }
    for (int s = 0; s < random_samples; ++s) {
      SplitMix64 rng(hash_combine(seed, static_cast<std::uint64_t>(s) * 1000 +
                                            static_cast<std::uint64_t>(d * 1e6)));
      double a[5], b[5];
      for (int k = 0; k < 5; ++k) { a[k] = rng.uniform(-1.0, 1.0); b[k] = rng.uniform(-1.0, 1.0); }
      const bool nonneg = s % 2 == 1;
      double shift = 0.0;
      if (nonneg) {
        double mn = 0.0;
        for (int k = 0; k < 5; ++k) mn -= std::abs(a[k]) + std::abs(b[k]);
        shift = -mn;  // guarantees the trace is nonnegative
      }
      traces.push_back({nonneg ? "random_nonneg" : "random_signed", [=](double x, double y) {
                          const double th = std::atan2(y - cy, x - cx);
                          double v = shift;
                          for (int k = 0; k < 5; ++k) v += a[k] * std::cos(k * th) + b[k] * std::sin(k * th);
                          return v;
                        }});
    }

    for (const auto& trace : traces) {
      GridFunction hh(g, 0.0);
      for (long id : prob.ring)
        hh.v[id] = trace.f(g.coord(g.node_x(id)), g.dim == 2 ? g.coord(g.node_y(id)) : 0.0);

      std::vector<double> rhs(prob.active.size(), 0.0);
      const LinearSolveInfo info = pcg_solve(field, prob.active, prob.index, rhs, hh, copt);

      KLipSample sample;
      sample.scale = d;
      sample.label = trace.label;
      sample.solved = info.converged;

      double sup_h = 0.0;
      const BallStencil ball = BallStencil::make(g, d);
      for (const auto& [dx, dy] : ball.offsets)
        sup_h = std::max(sup_h, std::abs(hh.v[g.node_id(ci + dx, g.dim == 2 ? ci + dy : 0)]));

      double sup_grad = 0.0;
      const BallStencil half = BallStencil::make(g, d / 2.0 - h);
      for (const auto& [dx, dy] : half.offsets) {
        const int ix = ci + dx, iy = g.dim == 2 ? ci + dy : 0;
        const double gx = (hh.at(ix + 1, iy) - hh.at(ix - 1, iy)) / (2.0 * h);
        const double gy = g.dim == 2 ? (hh.at(ix, iy + 1) - hh.at(ix, iy - 1)) / (2.0 * h) : 0.0;
        sup_grad = std::max(sup_grad, std::sqrt(gx * gx + gy * gy));
      }

      sample.ratio = sup_h > 0.0 ? d * sup_grad / sup_h : 0.0;
      report.K = std::max(report.K, sample.ratio);
      report.samples.push_back(std::move(sample));
    }
  }
  return report;
}

struct GradientBoundCheck {
  double max_gradient = 0.0;
  double bound = 0.0;  // 4 * C_lip * K * (1 + slack)
  long checked = 0;
  long violations = 0;
};

/// Check |grad u| <= 4 C_lip K (1 + slack) at positive-phase nodes within
/// `multiple` * h of the free boundary. C_lip comes from a growth fit (C+),
/// K from estimate_klip.
inline GradientBoundCheck gradient_up_to_fb(const GridFunction& u, const CoefficientField& field,
                                            double K, double C_lip, double tau,
                                            double slack = 0.25, int multiple = 4) {
  require_same_grid(u.grid, field.grid, "gradient_up_to_fb");
  const Grid& g = u.grid;
  const double h = g.h();
  const std::vector<double> dist = positivity_distance(u, tau);

  GradientBoundCheck out;
  out.bound = 4.0 * C_lip * K * (1.0 + slack);
  for (long id = 0; id < g.node_count(); ++id) {
    if (g.node_on_boundary(id)) continue;
    if (!(u.v[id] > tau)) continue;
    if (dist[id] <= 0.0 || dist[id] > multiple * h) continue;
    const int ix = g.node_x(id), iy = g.node_y(id);
    const double gx = (u.at(ix + 1, iy) - u.at(ix - 1, iy)) / (2.0 * h);
    const double gy = g.dim == 2 ? (u.at(ix, iy + 1) - u.at(ix, iy - 1)) / (2.0 * h) : 0.0;
    const double gn = std::sqrt(gx * gx + gy * gy);
    ++out.checked;
    out.max_gradient = std::max(out.max_gradient, gn);
    if (gn > out.bound) ++out.violations;
  }
  return out;
}

} // namespace cavlab
