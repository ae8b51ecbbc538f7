#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace stredalab {

enum class Backend { continuum, tightbinding };
enum class Boundary { dirichlet, torus };

/// Square grid of sites covering the box (-L, L]^2. Site (i, j) sits at
/// (x0 + i*h, y0 + j*h). For the torus, index arithmetic wraps with
/// magnetic boundary phases supplied by the operator builders.
struct Geometry {
  int nx = 0;
  int ny = 0;
  double h = 1.0;
  double x0 = 0.0;
  double y0 = 0.0;
  Boundary boundary = Boundary::dirichlet;

  int n_sites() const { return nx * ny; }
  int index(int i, int j) const { return j * nx + i; }
  double x(int site) const { return x0 + (site % nx) * h; }
  double y(int site) const { return y0 + (site / nx) * h; }
  double cell_area() const { return h * h; }
  // torus periods
  double period_x() const { return nx * h; }
  double period_y() const { return ny * h; }

  bool operator==(const Geometry&) const = default;
};

/// Central bulk window used by the trace per unit volume. Holds the site
/// list, its area, and the distance to the sample boundary.
struct BulkWindow {
  std::vector<int> sites;
  double area = 0.0;
  double buffer_distance = 0.0;
};

/// Axis-aligned window of half-side `half_extent` (in length units) centered
/// at the grid center. Refuses windows that run into the boundary buffer.
inline BulkWindow make_central_window(const Geometry& g, double half_extent,
                                      double min_buffer = 1.0) {
  if (half_extent <= 0.0) throw std::invalid_argument("window: half_extent must be > 0");
  const double cx = g.x0 + 0.5 * (g.nx - 1) * g.h;
  const double cy = g.y0 + 0.5 * (g.ny - 1) * g.h;
  BulkWindow w;
  for (int s = 0; s < g.n_sites(); ++s) {
    if (std::abs(g.x(s) - cx) <= half_extent + 1e-12 &&
        std::abs(g.y(s) - cy) <= half_extent + 1e-12)
      w.sites.push_back(s);
  }
  if (w.sites.empty()) throw std::invalid_argument("window: no sites inside");
  w.area = static_cast<double>(w.sites.size()) * g.cell_area();
  const double bx = 0.5 * g.nx * g.h - half_extent;
  const double by = 0.5 * g.ny * g.h - half_extent;
  w.buffer_distance = std::min(bx, by);
  if (g.boundary == Boundary::dirichlet && w.buffer_distance < min_buffer)
    throw std::invalid_argument("window: buffer to boundary below minimum");
  return w;
}

}  // namespace stredalab
