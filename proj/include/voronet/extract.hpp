#ifndef VORONET_EXTRACT_HPP
#define VORONET_EXTRACT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "voronet/common.hpp"
#include "voronet/delaunay.hpp"
#include "voronet/fields.hpp"
#include "voronet/voronoi.hpp"

namespace voronet {

/// Hard occupancy of an arbitrary labeled point set at every cell center.
/// Unlike SiteSet, no label-balance constraint is imposed.
inline GridOccupancy rasterize_labeled(std::span<const Point> points,
                                       std::span<const std::uint8_t> labels, int dim,
                                       std::size_t resolution) {
  if (points.empty() || points.size() != labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, "points/labels");
  }
  GridOccupancy g(dim, {resolution, resolution, dim == 3 ? resolution : 1});
  auto values = g.values();
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    values[idx] = labels[nearest_index(g.cell_center(idx), points, dim)];
  }
  return g;
}

inline GridOccupancy rasterize_hard(const SiteSet& sites, std::size_t resolution) {
  return rasterize_labeled(sites.points(), sites.labels(), sites.dim(), resolution);
}

struct CrustSegment {
  Point a;
  Point b;
  std::uint32_t inside;   // index of the 1-labeled site
  std::uint32_t outside;  // index of the 0-labeled site
};

using CrustSegments = std::vector<CrustSegment>;

namespace detail {

inline Point circumcenter(const Point& a, const Point& b, const Point& c) {
  const double bx = b[0] - a[0], by = b[1] - a[1];
  const double cx = c[0] - a[0], cy = c[1] - a[1];
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return {a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d, 0.0};
}

/// Clips origin + t * dir, t in [t0, t1], to the unit square (Liang-Barsky).
inline std::optional<std::pair<Point, Point>> clip_to_unit(const Point& origin,
                                                           const Point& dir, double t0,
                                                           double t1) {
  for (int d = 0; d < 2; ++d) {
    const double p = dir[d];
    const double lo = -origin[d];       // origin + t p >= 0
    const double hi = 1.0 - origin[d];  // origin + t p <= 1
    if (p == 0.0) {
      if (lo > 0.0 || hi < 0.0) return std::nullopt;
      continue;
    }
    double ta = lo / p, tb = hi / p;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  Point a{origin[0] + t0 * dir[0], origin[1] + t0 * dir[1], 0.0};
  Point b{origin[0] + t1 * dir[0], origin[1] + t1 * dir[1], 0.0};
  return std::make_pair(a, b);
}

}  // namespace detail

/// Voronoi edges separating inside- from outside-labeled cells, clipped to
/// the unit square and sorted by (min site index, max site index).
inline CrustSegments crust2d(const SiteSet& sites) {
  if (sites.dim() != 2) throw Error(ErrorKind::kDimMismatch, "crust is 2D only");
  const std::vector<Point> pts = jitter_duplicates(sites.points());
  const Triangulation tri = triangulate(pts);

  std::map<Edge, std::vector<std::uint32_t>> edge_faces;
  for (std::uint32_t t = 0; t < tri.triangles.size(); ++t) {
    const auto& f = tri.triangles[t];
    for (int i = 0; i < 3; ++i) {
      std::uint32_t u = f[i], w = f[(i + 1) % 3];
      if (u > w) std::swap(u, w);
      edge_faces[{u, w}].push_back(t);
    }
  }
  std::vector<Point> centers;
  centers.reserve(tri.triangles.size());
  for (const auto& f : tri.triangles) {
    centers.push_back(detail::circumcenter(pts[f[0]], pts[f[1]], pts[f[2]]));
  }

  CrustSegments out;
  for (const auto& [edge, faces] : edge_faces) {
    const auto [i, j] = edge;
    if (sites.label(i) == sites.label(j)) continue;
    std::optional<std::pair<Point, Point>> seg;
    if (faces.size() == 2) {
      const Point& c0 = centers[faces[0]];
      const Point& c1 = centers[faces[1]];
      seg = detail::clip_to_unit(c0, {c1[0] - c0[0], c1[1] - c0[1], 0.0}, 0.0, 1.0);
    } else {
      // Hull edge: ray from the circumcenter away from the opposite vertex.
      const auto& f = tri.triangles[faces[0]];
      std::uint32_t k = f[0];
      for (std::uint32_t v : f) {
        if (v != i && v != j) k = v;
      }
      Point n{-(pts[j][1] - pts[i][1]), pts[j][0] - pts[i][0], 0.0};
      if (n[0] * (pts[k][0] - pts[i][0]) + n[1] * (pts[k][1] - pts[i][1]) > 0.0) {
        n = {-n[0], -n[1], 0.0};
      }
      seg = detail::clip_to_unit(centers[faces[0]], n, 0.0,
                                 std::numeric_limits<double>::infinity());
    }
    if (!seg) continue;
    if (distance(seg->first, seg->second, 2) < 1e-12) continue;
    const bool i_inside = sites.label(i) == 1;
    out.push_back({seg->first, seg->second, i_inside ? i : j, i_inside ? j : i});
  }
  std::sort(out.begin(), out.end(), [](const CrustSegment& x, const CrustSegment& y) {
    const auto kx = std::minmax(x.inside, x.outside);
    const auto ky = std::minmax(y.inside, y.outside);
    return kx < ky;
  });
  return out;
}

/// Chains segments that share endpoints into polylines.
inline std::vector<std::vector<Point>> chain_segments(const CrustSegments& segs,
                                                      double tol = 1e-9) {
  const std::size_t n = segs.size();
  std::vector<bool> used(n, false);
  auto close = [tol](const Point& a, const Point& b) { return distance(a, b, 2) <= tol; };
  std::vector<std::vector<Point>> lines;
  for (std::size_t s = 0; s < n; ++s) {
    if (used[s]) continue;
    used[s] = true;
    std::vector<Point> line{segs[s].a, segs[s].b};
    for (bool grew = true; grew;) {
      grew = false;
      for (std::size_t t = 0; t < n; ++t) {
        if (used[t]) continue;
        const Point& a = segs[t].a;
        const Point& b = segs[t].b;
        if (close(line.back(), a)) {
          line.push_back(b);
        } else if (close(line.back(), b)) {
          line.push_back(a);
        } else if (close(line.front(), b)) {
          line.insert(line.begin(), a);
        } else if (close(line.front(), a)) {
          line.insert(line.begin(), b);
        } else {
          continue;
        }
        used[t] = true;
        grew = true;
      }
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

/// Midpoints of all faces shared by a 0-cell and a 1-cell.
inline std::vector<Point> boundary_points(const GridOccupancy& grid) {
  const std::size_t ones = grid.count();
  if (ones == 0 || ones == grid.size()) {
    throw Error(ErrorKind::kEmptyPhase, "grid has a single phase");
  }
  std::vector<Point> out;
  const auto& res = grid.resolution();
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const auto c = grid.coords(idx);
    for (int d = 0; d < grid.dim(); ++d) {
      if (c[d] + 1 >= res[d]) continue;
      auto nb = c;
      nb[d] += 1;
      const std::size_t jdx = grid.index(nb[0], nb[1], nb[2]);
      if (grid.values()[idx] == grid.values()[jdx]) continue;
      const Point a = grid.cell_center(idx);
      const Point b = grid.cell_center(jdx);
      out.push_back({0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])});
    }
  }
  return out;
}

namespace detail {

/// Uniform bucket grid over a point set for nearest-neighbor queries.
class BucketGrid {
 public:
  BucketGrid(std::span<const Point> pts, int dim) : pts_(pts), dim_(dim) {
    lo_ = {0.0, 0.0, 0.0};
    Point hi{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) {
      lo_[d] = std::numeric_limits<double>::infinity();
      hi[d] = -std::numeric_limits<double>::infinity();
      for (const Point& p : pts) {
        lo_[d] = std::min(lo_[d], p[d]);
        hi[d] = std::max(hi[d], p[d]);
      }
    }
    const double per_axis =
        std::max(1.0, std::ceil(std::pow(static_cast<double>(pts.size()), 1.0 / dim)));
    double extent = 0.0;
    for (int d = 0; d < dim; ++d) extent = std::max(extent, hi[d] - lo_[d]);
    cell_ = extent > 0.0 ? extent / per_axis : 1.0;
    for (int d = 0; d < 3; ++d) {
      n_[d] = d < dim ? static_cast<std::size_t>(std::floor((hi[d] - lo_[d]) / cell_)) + 1 : 1;
    }
    start_.assign(n_[0] * n_[1] * n_[2] + 1, 0);
    std::vector<std::size_t> cell_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cell_of[i] = flat(cell_coords(pts[i]));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(pts.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) items_[fill[cell_of[i]]++] = i;
  }

  /// Squared distance from q to the nearest stored point.
  double nearest_squared(const Point& q) const {
    const auto c = cell_coords(q);
    double best = std::numeric_limits<double>::infinity();
    const std::size_t max_ring = std::max({n_[0], n_[1], n_[2]});
    for (std::size_t r = 0; r <= max_ring; ++r) {
      visit_ring(c, r, [&](std::size_t cell) {
        for (std::size_t k = start_[cell]; k < start_[cell + 1]; ++k) {
          best = std::min(best, squared_distance(q, pts_[items_[k]], dim_));
        }
      });
      const double reach = static_cast<double>(r) * cell_;
      if (best <= reach * reach) break;
    }
    return best;
  }

 private:
  std::array<std::size_t, 3> cell_coords(const Point& p) const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (int d = 0; d < dim_; ++d) {
      double f = std::floor((p[d] - lo_[d]) / cell_);
      f = std::clamp(f, 0.0, static_cast<double>(n_[d] - 1));
      c[d] = static_cast<std::size_t>(f);
    }
    return c;
  }

  std::size_t flat(const std::array<std::size_t, 3>& c) const {
    return c[0] + n_[0] * (c[1] + n_[1] * c[2]);
  }

  template <class Fn>
  void visit_ring(const std::array<std::size_t, 3>& c, std::size_t r, Fn&& fn) const {
    const long rr = static_cast<long>(r);
    const long zr = dim_ == 3 ? rr : 0;
    for (long dz = -zr; dz <= zr; ++dz) {
      for (long dy = -rr; dy <= rr; ++dy) {
        for (long dx = -rr; dx <= rr; ++dx) {
          const long m = std::max({std::labs(dx), std::labs(dy), std::labs(dz)});
          if (m != rr) continue;
          const long x = static_cast<long>(c[0]) + dx;
          const long y = static_cast<long>(c[1]) + dy;
          const long z = static_cast<long>(c[2]) + dz;
          if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(n_[0]) ||
              y >= static_cast<long>(n_[1]) || z >= static_cast<long>(n_[2])) {
            continue;
          }
          fn(flat({static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                   static_cast<std::size_t>(z)}));
        }
      }
    }
  }

  std::span<const Point> pts_;
  int dim_;
  Point lo_;
  double cell_ = 1.0;
  std::array<std::size_t, 3> n_{1, 1, 1};
  std::vector<std::size_t> start_;
  std::vector<std::size_t> items_;
};

inline double directed_hausdorff_squared(std::span<const Point> from,
                                         const BucketGrid& to) {
  double worst = 0.0;
  for (const Point& p : from) worst = std::max(worst, to.nearest_squared(p));
  return worst;
}

}  // namespace detail

/// Symmetric Hausdorff distance between two finite point sets.
inline double hausdorff(std::span<const Point> a, std::span<const Point> b, int dim) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::kEmptySet, "hausdorff of empty set");
  const detail::BucketGrid ga(a, dim), gb(b, dim);
  return std::sqrt(std::max(detail::directed_hausdorff_squared(a, gb),
                            detail::directed_hausdorff_squared(b, ga)));
}

inline void check_same_shape(const GridOccupancy& a, const GridOccupancy& b) {
  if (a.dim() != b.dim() || a.resolution() != b.resolution()) {
    throw Error(ErrorKind::kShapeMismatch, "grids differ in shape");
  }
}

/// Intersection over union; two empty grids score 1.
inline double iou(const GridOccupancy& a, const GridOccupancy& b) {
  check_same_shape(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.values()[i] & b.values()[i];
    uni += a.values()[i] | b.values()[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double pixel_accuracy(const GridOccupancy& a, const GridOccupancy& b) {
  check_same_shape(a, b);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) agree += a.values()[i] == b.values()[i];
  return static_cast<double>(agree) / static_cast<double>(a.size());
}

/// Hausdorff distance between the phase boundaries of two rasters.
inline double boundary_hausdorff(const GridOccupancy& a, const GridOccupancy& b) {
  const std::vector<Point> pa = boundary_points(a);
  const std::vector<Point> pb = boundary_points(b);
  return hausdorff(pa, pb, a.dim());
}

}  // namespace voronet

#endif  // VORONET_EXTRACT_HPP
