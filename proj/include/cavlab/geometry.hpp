#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "energy.hpp"
#include "field.hpp"
#include "grid.hpp"

namespace cavlab {

/// Positivity threshold rule: eps for eps-solutions, floating-point dust
/// floor for continuation limits.
inline double default_tau(const GridFunction& u, double eps_or_zero) {
  if (eps_or_zero > 0.0) return eps_or_zero;
  return std::max(1e-12 * u.max_abs(), 0.0);
}

/// Cells whose corner nodes all exceed tau.
inline std::vector<bool> positivity_set(const GridFunction& u, double tau) {
  if (tau < 0.0) throw std::invalid_argument("positivity_set: tau must be nonnegative");
  const Grid& g = u.grid;
  std::vector<bool> mask(g.cell_count(), false);
  for (long c = 0; c < g.cell_count(); ++c) {
    if (g.dim == 1) {
      const int cx = static_cast<int>(c);
      mask[c] = u.v[cx] > tau && u.v[cx + 1] > tau;
    } else {
      const int cx = g.cell_x(c), cy = g.cell_y(c);
      mask[c] = u.at(cx, cy) > tau && u.at(cx + 1, cy) > tau && u.at(cx, cy + 1) > tau &&
                u.at(cx + 1, cy + 1) > tau;
    }
  }
  return mask;
}

/// Mixed cells separating {u > tau} from {u <= tau}, in row-major order.
struct FreeBoundarySet {
  Grid grid;
  double tau = 0.0;
  std::vector<long> cells;

  bool empty() const { return cells.empty(); }

  double cell_center_x(std::size_t k) const { return grid.cell_center(grid.cell_x(cells[k])); }
  double cell_center_y(std::size_t k) const {
    return grid.dim == 2 ? grid.cell_center(grid.cell_y(cells[k])) : 0.0;
  }
};

inline FreeBoundarySet free_boundary(const GridFunction& u, double tau) {
  if (tau < 0.0) throw std::invalid_argument("free_boundary: tau must be nonnegative");
  const Grid& g = u.grid;
  FreeBoundarySet fb;
  fb.grid = g;
  fb.tau = tau;
  for (long c = 0; c < g.cell_count(); ++c) {
    bool pos = false, non = false;
    if (g.dim == 1) {
      const int cx = static_cast<int>(c);
      for (int k = 0; k < 2; ++k) (u.v[cx + k] > tau ? pos : non) = true;
    } else {
      const int cx = g.cell_x(c), cy = g.cell_y(c);
      for (int dx = 0; dx < 2; ++dx)
        for (int dy = 0; dy < 2; ++dy) (u.at(cx + dx, cy + dy) > tau ? pos : non) = true;
    }
    if (pos && non) fb.cells.push_back(c);
  }
  return fb;
}

/// sup of u over the discrete ball |X - center| <= r. The ball must lie
/// inside the domain.
inline double sup_ball(const GridFunction& u, double cx, double cy, double r) {
  const Grid& g = u.grid;
  const double h = g.h();
  const int ix = static_cast<int>(std::lround(cx / h));
  const int iy = g.dim == 2 ? static_cast<int>(std::lround(cy / h)) : 0;
  const BallStencil ball = BallStencil::make(g, r);
  if (!ball.fits_inside(g, ix, iy)) throw std::invalid_argument("sup_ball: ball leaves the domain");
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& [dx, dy] : ball.offsets) {
    const double x = g.coord(ix + dx) - cx;
    const double y = g.dim == 2 ? g.coord(iy + dy) - cy : 0.0;
    if (x * x + y * y > r * r * (1.0 + 1e-14)) continue;
    s = std::max(s, u.v[g.node_id(ix + dx, g.dim == 2 ? iy + dy : 0)]);
  }
  return s;
}

/// Least-squares fit of log sup_{B_r} u against log r over dyadic radii.
struct GrowthFit {
  double center_x = 0.0, center_y = 0.0;
  std::vector<double> radii;
  std::vector<double> sups;
  double exponent = 0.0;
  double c_minus = 0.0;  // min_r S(r)/r
  double c_plus = 0.0;   // max_r S(r)/r

  bool sups_nondecreasing() const {
    for (std::size_t i = 1; i < sups.size(); ++i)
      if (sups[i] < sups[i - 1] - 1e-14) return false;
    return true;
  }
};

inline GrowthFit growth_exponent(const GridFunction& u, double cx, double cy, double r_min,
                                 double r_max) {
  const Grid& g = u.grid;
  if (r_min < 4.0 * g.h() * (1.0 - 1e-12))
    throw std::invalid_argument("growth_exponent: r_min must be at least 4h");
  if (r_max < 16.0 * r_min * (1.0 - 1e-12))
    throw std::invalid_argument("growth_exponent: need at least 4 octaves of radii");

  GrowthFit fit;
  fit.center_x = cx;
  fit.center_y = cy;
  for (double r = r_min; r <= r_max * (1.0 + 1e-12); r *= 2.0) {
    fit.radii.push_back(r);
    fit.sups.push_back(sup_ball(u, cx, cy, r));
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  fit.c_minus = std::numeric_limits<double>::infinity();
  fit.c_plus = 0.0;
  for (std::size_t k = 0; k < fit.radii.size(); ++k) {
    const double ratio = fit.sups[k] / fit.radii[k];
    fit.c_minus = std::min(fit.c_minus, ratio);
    fit.c_plus = std::max(fit.c_plus, ratio);
    if (fit.sups[k] <= 0.0) continue;
    const double lx = std::log(fit.radii[k]), ly = std::log(fit.sups[k]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    ++m;
  }
  if (m >= 2) {
    const double denom = m * sxx - sx * sx;
    fit.exponent = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
  }
  return fit;
}

namespace detail {

/// Multi-source breadth-first sweep: number of 4-neighbor steps from each
/// node to the nearest seed node, or -1 where unreachable.
inline std::vector<int> bfs_steps(const Grid& g, const std::vector<bool>& seed) {
  std::vector<int> steps(g.node_count(), -1);
  std::deque<long> queue;
  for (long id = 0; id < g.node_count(); ++id)
    if (seed[id]) {
      steps[id] = 0;
      queue.push_back(id);
    }
  while (!queue.empty()) {
    const long id = queue.front();
    queue.pop_front();
    const int ix = g.node_x(id), iy = g.node_y(id);
    auto visit = [&](int jx, int jy) {
      if (jx < 0 || jx >= g.n || (g.dim == 2 && (jy < 0 || jy >= g.n))) return;
      const long jd = g.node_id(jx, jy);
      if (steps[jd] < 0) {
        steps[jd] = steps[id] + 1;
        queue.push_back(jd);
      }
    };
    visit(ix - 1, iy);
    visit(ix + 1, iy);
    if (g.dim == 2) {
      visit(ix, iy - 1);
      visit(ix, iy + 1);
    }
  }
  return steps;
}

/// Exact squared Euclidean distance transform (two-pass lower-envelope
/// method). Input: 0 at seed nodes, large elsewhere; output in node units^2.
inline void edt_1d(std::vector<double>& f) {
  const int n = static_cast<int>(f.size());
  std::vector<double> d(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
  f = std::move(d);
}

inline std::vector<double> euclidean_distance(const Grid& g, const std::vector<bool>& seed) {
  const double INF = 1e18;
  std::vector<double> f(g.node_count());
  for (long id = 0; id < g.node_count(); ++id) f[id] = seed[id] ? 0.0 : INF;
  if (g.dim == 1) {
    edt_1d(f);
  } else {
    std::vector<double> col(g.n);
    for (int ix = 0; ix < g.n; ++ix) {
      for (int iy = 0; iy < g.n; ++iy) col[iy] = f[g.node_id(ix, iy)];
      edt_1d(col);
      for (int iy = 0; iy < g.n; ++iy) f[g.node_id(ix, iy)] = col[iy];
    }
    std::vector<double> row(g.n);
    for (int iy = 0; iy < g.n; ++iy) {
      for (int ix = 0; ix < g.n; ++ix) row[ix] = f[g.node_id(ix, iy)];
      edt_1d(row);
      for (int ix = 0; ix < g.n; ++ix) f[g.node_id(ix, iy)] = row[ix];
    }
  }
  for (double& x : f) x = std::sqrt(x) * g.h();
  return f;
}

} // namespace detail

struct LinearGrowthSample {
  long node = 0;
  double value = 0.0;
  double distance = 0.0;
  double ratio = 0.0;
};

struct LinearGrowthResult {
  double c = std::numeric_limits<double>::infinity();  // min over admissible samples
  std::vector<LinearGrowthSample> samples;
  long skipped = 0;  // samples on the level set (zero distance)
};

/// Empirical growth rate away from the eps level set: for sample points in
/// {u >= eps}, the quotient (u(X0) - eps) / dist(X0, {u <= eps}) with the
/// distance measured by a breadth-first sweep from the sub-level nodes.
/// Points at zero distance are skipped.
inline LinearGrowthResult linear_growth_check(const GridFunction& u, double eps,
                                              const std::vector<long>& sample_nodes) {
  const Grid& g = u.grid;
  std::vector<bool> seed(g.node_count(), false);
  bool any_seed = false, any_super = false;
  for (long id = 0; id < g.node_count(); ++id) {
    seed[id] = u.v[id] <= eps;
    any_seed |= seed[id];
    any_super |= u.v[id] >= eps;
  }
  if (!any_super) throw std::invalid_argument("linear_growth_check: empty super-level set");

  LinearGrowthResult out;
  if (!any_seed) throw std::invalid_argument("linear_growth_check: no level-set nodes to measure from");
  const std::vector<int> steps = detail::bfs_steps(g, seed);
  for (long id : sample_nodes) {
    if (u.v[id] < eps) continue;
    const double d = steps[id] * g.h();
    if (steps[id] <= 0) {
      ++out.skipped;
      continue;
    }
    LinearGrowthSample s;
    s.node = id;
    s.value = u.v[id];
    s.distance = d;
    s.ratio = (u.v[id] - eps) / d;
    out.c = std::min(out.c, s.ratio);
    out.samples.push_back(s);
  }
  return out;
}

/// Empirical nondegeneracy constant min_r sup_{B_r(Y)} u / r. Y must lie in
/// the closure of {u > tau} and every ball must fit inside the domain.
inline double nondegeneracy(const GridFunction& u, double yx, double yy,
                            const std::vector<double>& radii, double tau) {
  const Grid& g = u.grid;
  const double h = g.h();
  const int ix = static_cast<int>(std::lround(yx / h));
  const int iy = g.dim == 2 ? static_cast<int>(std::lround(yy / h)) : 0;
  bool in_closure = false;
  for (int dx = -1; dx <= 1 && !in_closure; ++dx)
    for (int dy = (g.dim == 2 ? -1 : 0); dy <= (g.dim == 2 ? 1 : 0); ++dy) {
      const int jx = ix + dx, jy = iy + dy;
      if (jx < 0 || jx >= g.n || jy < 0 || jy >= g.n) continue;
      if (u.v[g.node_id(jx, jy)] > tau) { in_closure = true; break; }
    }
  if (!in_closure)
    throw std::invalid_argument("nondegeneracy: point not in the closure of the positivity set");

  double c = std::numeric_limits<double>::infinity();
  for (double r : radii) c = std::min(c, sup_ball(u, yx, yy, r) / r);
  return c;
}

/// |{u > tau} n B_r(X0)| / (omega_n r^n), node-counting measure.
inline double density_ratio(const GridFunction& u, double cx, double cy, double r, double tau) {
  const Grid& g = u.grid;
  const double h = g.h();
  if (r < 8.0 * h * (1.0 - 1e-12)) throw std::invalid_argument("density_ratio: radius below 8h");
  const int ix = static_cast<int>(std::lround(cx / h));
  const int iy = g.dim == 2 ? static_cast<int>(std::lround(cy / h)) : 0;
  const BallStencil ball = BallStencil::make(g, r);
  if (!ball.fits_inside(g, ix, iy)) throw std::invalid_argument("density_ratio: ball leaves the domain");
  long count = 0;
  for (const auto& [dx, dy] : ball.offsets)
    if (u.v[g.node_id(ix + dx, g.dim == 2 ? iy + dy : 0)] > tau) ++count;
  const double vol = count * (g.dim == 1 ? h : h * h);
  const double omega = g.dim == 1 ? 2.0 : 3.14159265358979324;
  return vol / (omega * std::pow(r, g.dim));
}

/// Largest mu such that some ball B_{mu r}(xi) fits inside {u > tau} n B_r(X0),
/// found from the Euclidean distance transform of the positivity mask.
/// The caller may pass a precomputed transform to amortize it across points.
inline double porosity(const GridFunction& u, double cx, double cy, double r, double tau,
                       const std::vector<double>* precomputed_distance = nullptr) {
  const Grid& g = u.grid;
  const double h = g.h();
  if (r < 8.0 * h * (1.0 - 1e-12)) throw std::invalid_argument("porosity: radius below 8h");
  const int ix = static_cast<int>(std::lround(cx / h));
  const int iy = g.dim == 2 ? static_cast<int>(std::lround(cy / h)) : 0;
  const BallStencil ball = BallStencil::make(g, r);
  if (!ball.fits_inside(g, ix, iy)) throw std::invalid_argument("porosity: ball leaves the domain");

  std::vector<double> local;
  const std::vector<double>* dist = precomputed_distance;
  if (!dist) {
    std::vector<bool> seed(g.node_count(), false);
    for (long id = 0; id < g.node_count(); ++id) seed[id] = u.v[id] <= tau;
    local = detail::euclidean_distance(g, seed);
    dist = &local;
  }

  double best = 0.0;
  for (const auto& [dx, dy] : ball.offsets) {
    const long id = g.node_id(ix + dx, g.dim == 2 ? iy + dy : 0);
    const double x = g.coord(ix + dx) - cx;
    const double y = g.dim == 2 ? g.coord(iy + dy) - cy : 0.0;
    const double to_center = std::sqrt(x * x + y * y);
    best = std::max(best, std::min((*dist)[id], r - to_center));
  }
  return best / r;
}

inline std::vector<double> positivity_distance(const GridFunction& u, double tau) {
  std::vector<bool> seed(u.grid.node_count(), false);
  for (long id = 0; id < u.grid.node_count(); ++id) seed[id] = u.v[id] <= tau;
  return detail::euclidean_distance(u.grid, seed);
}

struct BoxDimension {
  std::vector<double> scales;  // box side lengths
  std::vector<long> counts;
  double dimension = 0.0;
  double fit_residual = 0.0;
  double codimension = 0.0;  // grid dimension minus the estimate
};

/// Box counting over dyadic boxes from 4h up to the domain size; least-squares
/// slope of log N against log(1/delta). Needs at least 4 octaves of scales.
inline BoxDimension box_dimension(const FreeBoundarySet& fb) {
  const Grid& g = fb.grid;
  const int nc = g.cells_per_axis();
  BoxDimension out;
  std::vector<double> lx, ly;
  for (int b = 4; b <= nc / 2; b *= 2) {
    std::vector<bool> hit((nc / b + 1) * (g.dim == 2 ? nc / b + 1 : 1), false);
    long count = 0;
    const int per_axis = nc / b + 1;
    for (long c : fb.cells) {
      const int bx = g.cell_x(c) / b;
      const int by = g.dim == 2 ? g.cell_y(c) / b : 0;
      const long k = static_cast<long>(bx) * (g.dim == 2 ? per_axis : 1) + by;
      if (!hit[k]) {
        hit[k] = true;
        ++count;
      }
    }
    out.scales.push_back(b * g.h());
    out.counts.push_back(count);
    if (count > 0) {
      lx.push_back(std::log(1.0 / (b * g.h())));
      ly.push_back(std::log(static_cast<double>(count)));
    }
  }
  if (out.scales.size() < 4)
    throw std::invalid_argument("box_dimension: fewer than 4 octaves of scales");

  const int m = static_cast<int>(lx.size());
  if (m >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < m; ++k) { sx += lx[k]; sy += ly[k]; sxx += lx[k] * lx[k]; sxy += lx[k] * ly[k]; }
    const double denom = m * sxx - sx * sx;
    out.dimension = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
    double ss = 0.0;
    const double b0 = (sy - out.dimension * sx) / m;
    for (int k = 0; k < m; ++k) {
      const double e = ly[k] - (out.dimension * lx[k] + b0);
      ss += e * e;
    }
    out.fit_residual = std::sqrt(ss / m);
  }
  out.codimension = g.dim - out.dimension;
  return out;
}

struct StripEstimate {
  double mu = 0.0;
  double r = 0.0;
  double measure = 0.0;          // |{0 < u < mu} n B_r|
  double measure_ratio = 0.0;    // measure / (mu r^{n-1})
  double dirichlet = 0.0;        // integral of |grad u|^2 over the strip
  double dirichlet_ratio = 0.0;  // dirichlet / (mu r^{n-1})
};

/// Level-strip measure and Dirichlet mass around X0. The strip must be grid
/// resolved: mu at least a few local slopes times h.
inline StripEstimate strip_estimate(const GridFunction& u, double cx, double cy, double r,
                                    double mu) {
  const Grid& g = u.grid;
  const double h = g.h();
  if (!(mu > 0.0)) throw std::invalid_argument("strip_estimate: mu must be positive");
  const int ix = static_cast<int>(std::lround(cx / h));
  const int iy = g.dim == 2 ? static_cast<int>(std::lround(cy / h)) : 0;
  const BallStencil ball = BallStencil::make(g, r);
  if (!ball.fits_inside(g, ix, iy)) throw std::invalid_argument("strip_estimate: ball leaves the domain");

  const double vol = g.dim == 1 ? h : h * h;
  StripEstimate out;
  out.mu = mu;
  out.r = r;
  long count = 0;
  double dir = 0.0;
  for (const auto& [dx, dy] : ball.offsets) {
    const int jx = ix + dx, jy = g.dim == 2 ? iy + dy : 0;
    const long id = g.node_id(jx, jy);
    const double val = u.v[id];
    if (!(val > 0.0 && val < mu)) continue;
    ++count;
    double gx = 0.0, gy = 0.0;
    if (jx > 0 && jx < g.n - 1) gx = (u.v[g.node_id(jx + 1, jy)] - u.v[g.node_id(jx - 1, jy)]) / (2.0 * h);
    if (g.dim == 2 && jy > 0 && jy < g.n - 1)
      gy = (u.v[g.node_id(jx, jy + 1)] - u.v[g.node_id(jx, jy - 1)]) / (2.0 * h);
    dir += (gx * gx + gy * gy) * vol;
  }
  out.measure = count * vol;
  out.dirichlet = dir;
  const double denom = mu * std::pow(r, g.dim - 1);
  out.measure_ratio = out.measure / denom;
  out.dirichlet_ratio = out.dirichlet / denom;
  return out;
}

struct DyadicDecay {
  int max_k_verified = -1;   // largest K with sup_{B(sqrt(ds)/2^k)} u <= 2^-k for all k <= K
  int k_cap = 0;             // last k resolvable on the grid
  double implied_lipschitz = 0.0;  // 2 / sqrt(delta_star)
  std::vector<double> sups;  // sup at each k = 0 .. k_cap
};

/// Verify the geometric decay sup_{B_{sqrt(ds)/2^k}(xi)} u <= 2^-k. The input
/// must already be normalized to sup <= 1 on the reference ball, and xi must
/// sit on the free boundary for the given tau.
inline DyadicDecay dyadic_decay(const GridFunction& u, double xix, double xiy, double delta_star,
                                double tau) {
  if (!(delta_star > 0.0 && delta_star <= 1.0))
    throw std::invalid_argument("dyadic_decay: delta_star must lie in (0, 1]");
  const Grid& g = u.grid;
  const double h = g.h();
  const int ix = static_cast<int>(std::lround(xix / h));
  const int iy = g.dim == 2 ? static_cast<int>(std::lround(xiy / h)) : 0;

  // xi must touch both phases within one cell ring.
  bool pos = false, non = false;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = (g.dim == 2 ? -1 : 0); dy <= (g.dim == 2 ? 1 : 0); ++dy) {
      const int jx = ix + dx, jy = iy + dy;
      if (jx < 0 || jx >= g.n || jy < 0 || jy >= g.n) continue;
      (u.v[g.node_id(jx, jy)] > tau ? pos : non) = true;
    }
  if (!(pos && non)) throw std::invalid_argument("dyadic_decay: xi is not a free boundary point");

  const double ref = std::sqrt(delta_star);
  if (sup_ball(u, xix, xiy, ref) > 1.0 + 1e-12)
    throw std::invalid_argument("dyadic_decay: u is not normalized to <= 1 on the reference ball");

  DyadicDecay out;
  out.implied_lipschitz = 2.0 / ref;
  bool chain = true;
  for (int k = 0;; ++k) {
    const double r = ref / std::pow(2.0, k);
    if (r < 4.0 * h) break;
    out.k_cap = k;
    const double s = sup_ball(u, xix, xiy, r);
    out.sups.push_back(s);
    if (chain && s <= std::pow(2.0, -k) * (1.0 + 1e-12)) {
      out.max_k_verified = k;
    } else {
      chain = false;
    }
  }
  return out;
}

struct FbSlope {
  double gradient_norm = 0.0;  // one-sided |grad u| from the positive side
  double flux_form = 0.0;      // <a grad u, grad u> with the local cell matrix
  long sample_node = 0;
};

/// One-sided gradient one cell into {u > tau} at a free boundary cell, and
/// the quadratic flux form evaluated with the coefficients of the sampled cell.
inline FbSlope fb_slope(const GridFunction& u, const CoefficientField& field, long fb_cell,
                        double tau) {
  require_same_grid(u.grid, field.grid, "fb_slope");
  const Grid& g = u.grid;
  const double h = g.h();
  const int cx = g.cell_x(fb_cell), cy = g.cell_y(fb_cell);

  // Corner with the largest value marks the positive side.
  int bx = cx, by = cy;
  double best = -std::numeric_limits<double>::infinity();
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < (g.dim == 2 ? 2 : 1); ++dy) {
      const double val = u.v[g.node_id(cx + dx, g.dim == 2 ? cy + dy : 0)];
      if (val > best) { best = val; bx = cx + dx; by = g.dim == 2 ? cy + dy : 0; }
    }
  if (!(best > tau)) throw std::invalid_argument("fb_slope: cell has no positive corner");

  auto val = [&](int jx, int jy) {
    jx = std::clamp(jx, 0, g.n - 1);
    jy = g.dim == 2 ? std::clamp(jy, 0, g.n - 1) : 0;
    return u.v[g.node_id(jx, jy)];
  };

  // Step one more cell inward along each axis, following increasing u, then
  // take the one-sided difference pointing back toward the boundary cell.
  int sxd = val(bx + 1, by) >= val(bx - 1, by) ? 1 : -1;
  int syd = g.dim == 2 ? (val(bx, by + 1) >= val(bx, by - 1) ? 1 : -1) : 0;
  const int px = std::clamp(bx + sxd, 1, g.n - 2);
  const int py = g.dim == 2 ? std::clamp(by + syd, 1, g.n - 2) : 0;

  const double gx = (val(px + sxd, py) - val(px, py)) / h * sxd;
  const double gy = g.dim == 2 ? (val(px, py + syd) - val(px, py)) / h * syd : 0.0;

  // Coefficients of the cell on the positive side of the sample node.
  const int ccx = std::clamp(sxd > 0 ? px : px - 1, 0, g.cells_per_axis() - 1);
  const int ccy = g.dim == 2 ? std::clamp(syd > 0 ? py : py - 1, 0, g.cells_per_axis() - 1) : 0;
  const long cell = g.dim == 1 ? ccx : g.cell_id(ccx, ccy);

  FbSlope out;
  out.sample_node = g.node_id(px, py);
  out.gradient_norm = std::sqrt(gx * gx + gy * gy);
  if (g.dim == 1) {
    out.flux_form = field.a11[cell] * gx * gx;
  } else {
    out.flux_form = field.a11[cell] * gx * gx + 2.0 * field.a12[cell] * gx * gy +
                    field.a22[cell] * gy * gy;
  }
  return out;
}

} // namespace cavlab
