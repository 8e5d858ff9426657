#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cavlab {

/// Uniform node-centered grid on the box [0, length]^dim, dim in {1, 2}.
/// Node coordinates are i * h with h = length / (n - 1), so they are
/// reproducible bit-exactly from (length, n).
struct Grid {
  int dim = 1;
  int n = 0;          // nodes per axis
  double length = 1.0;

  double h() const { return length / static_cast<double>(n - 1); }
  int nodes_per_axis() const { return n; }
  int cells_per_axis() const { return n - 1; }
  long node_count() const { return dim == 1 ? n : static_cast<long>(n) * n; }
  long cell_count() const {
    long c = n - 1;
    return dim == 1 ? c : c * c;
  }

  double coord(int i) const { return static_cast<double>(i) * h(); }

  long node_id(int ix, int iy = 0) const {
    return dim == 1 ? ix : static_cast<long>(ix) * n + iy;
  }
  int node_x(long id) const { return dim == 1 ? static_cast<int>(id) : static_cast<int>(id / n); }
  int node_y(long id) const { return dim == 1 ? 0 : static_cast<int>(id % n); }

  long cell_id(int cx, int cy = 0) const {
    return dim == 1 ? cx : static_cast<long>(cx) * (n - 1) + cy;
  }
  int cell_x(long c) const { return dim == 1 ? static_cast<int>(c) : static_cast<int>(c / (n - 1)); }
  int cell_y(long c) const { return dim == 1 ? 0 : static_cast<int>(c % (n - 1)); }

  bool on_boundary(int ix, int iy = 0) const {
    if (ix == 0 || ix == n - 1) return true;
    return dim == 2 && (iy == 0 || iy == n - 1);
  }
  bool node_on_boundary(long id) const { return on_boundary(node_x(id), node_y(id)); }

  /// Center coordinate of a cell along one axis.
  double cell_center(int c) const { return (static_cast<double>(c) + 0.5) * h(); }

  bool operator==(const Grid& o) const {
    return dim == o.dim && n == o.n && length == o.length;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

inline Grid make_grid(int dim, int nodes_per_axis, double box_length) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("make_grid: dim must be 1 or 2");
  if (nodes_per_axis < 3) throw std::invalid_argument("make_grid: need at least 3 nodes per axis");
  if (!(box_length > 0.0) || !std::isfinite(box_length))
    throw std::invalid_argument("make_grid: box length must be positive and finite");
  return Grid{dim, nodes_per_axis, box_length};
}

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

/// Node offsets of the discrete Euclidean ball |X - center| <= r, precomputed
/// once per radius and shared across all center points.
struct BallStencil {
  double radius = 0.0;
  std::vector<std::pair<int, int>> offsets; // (dx, dy); dy == 0 in 1D

  static BallStencil make(const Grid& g, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("BallStencil: radius must be positive");
    BallStencil s;
    s.radius = r;
    const double h = g.h();
    const int k = static_cast<int>(std::floor(r / h + 1e-12));
    const double r2 = r * r;
    if (g.dim == 1) {
      for (int dx = -k; dx <= k; ++dx)
        if (static_cast<double>(dx) * dx * h * h <= r2 * (1.0 + 1e-14)) s.offsets.emplace_back(dx, 0);
    } else {
      for (int dx = -k; dx <= k; ++dx)
        for (int dy = -k; dy <= k; ++dy) {
          const double d2 = (static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) * h * h;
          if (d2 <= r2 * (1.0 + 1e-14)) s.offsets.emplace_back(dx, dy);
        }
    }
    return s;
  }

  bool fits_inside(const Grid& g, int ix, int iy = 0) const {
    const int k = static_cast<int>(std::floor(radius / g.h() + 1e-12));
    if (ix - k < 0 || ix + k > g.n - 1) return false;
    if (g.dim == 2 && (iy - k < 0 || iy + k > g.n - 1)) return false;
    return true;
  }
};

} // namespace cavlab
