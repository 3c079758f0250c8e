#ifndef VORONET_DELAUNAY_HPP
#define VORONET_DELAUNAY_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "voronet/common.hpp"
#include "voronet/predicates.hpp"
#include "voronet/voronoi.hpp"

namespace voronet {

using Edge = std::pair<std::uint32_t, std::uint32_t>;  // first < second

struct Triangulation {
  std::vector<Point> vertices;
  /// Counter-clockwise index triples.
  std::vector<std::array<std::uint32_t, 3>> triangles;
  /// Sorted neighbor indices per vertex.
  std::vector<std::vector<std::uint32_t>> adjacency;

  /// Undirected edges, sorted, each as (lo, hi).
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::uint32_t i = 0; i < adjacency.size(); ++i) {
      for (std::uint32_t j : adjacency[i]) {
        if (i < j) out.emplace_back(i, j);
      }
    }
    return out;
  }
};

/// Minimum separation between input points accepted by triangulate().
inline constexpr double kMinSeparation = 1e-9;

namespace detail {

inline constexpr std::uint32_t kGhost = 0xFFFFFFFFu;

struct Face {
  std::array<std::uint32_t, 3> v;
  // n[i] is the face across the edge opposite v[i].
  std::array<std::int32_t, 3> n{-1, -1, -1};
  bool alive = true;
};

class BowyerWatson {
 public:
  explicit BowyerWatson(std::span<const Point> pts) : pts_(pts) {}

  std::vector<Face> run() {
    seed();
    for (std::uint32_t i = 0; i < pts_.size(); ++i) {
      if (i == s0_ || i == s1_ || i == s2_) continue;
      insert(i);
    }
    return std::move(faces_);
  }

 private:
  // Picks three non-collinear points and builds the first face plus the
  // three ghost faces around it.
  void seed() {
    s0_ = 0;
    s1_ = 1;
    s2_ = kGhost;
    for (std::uint32_t i = 2; i < pts_.size(); ++i) {
      if (predicates::orient2d(pts_[s0_], pts_[s1_], pts_[i]) != 0) {
        s2_ = i;
        break;
      }
    }
    if (s2_ == kGhost) {
      throw Error(ErrorKind::kDegenerateInput, "all points are collinear");
    }
    if (predicates::orient2d(pts_[s0_], pts_[s1_], pts_[s2_]) < 0) {
      std::swap(s1_, s2_);
    }
    const std::uint32_t a = s0_, b = s1_, c = s2_;
    faces_.push_back({{a, b, c}});
    faces_.push_back({{b, a, kGhost}});
    faces_.push_back({{c, b, kGhost}});
    faces_.push_back({{a, c, kGhost}});
    // Face 0 edges: opposite a is (b,c) -> ghost 2; opposite b is (c,a) ->
    // ghost 3; opposite c is (a,b) -> ghost 1.
    faces_[0].n = {2, 3, 1};
    link_ghosts_by_search();
  }

  // Generic neighbor assignment for the initial four faces.
  void link_ghosts_by_search() {
    for (std::size_t f = 1; f < faces_.size(); ++f) {
      for (int i = 0; i < 3; ++i) {
        const std::uint32_t u = faces_[f].v[(i + 1) % 3];
        const std::uint32_t w = faces_[f].v[(i + 2) % 3];
        for (std::size_t g = 0; g < faces_.size(); ++g) {
          if (g == f) continue;
          for (int j = 0; j < 3; ++j) {
            if (faces_[g].v[(j + 1) % 3] == w && faces_[g].v[(j + 2) % 3] == u) {
              faces_[f].n[i] = static_cast<std::int32_t>(g);
            }
          }
        }
      }
    }
  }

  bool in_conflict(const Face& f, std::uint32_t p) const {
    const Point& q = pts_[p];
    for (int i = 0; i < 3; ++i) {
      if (f.v[i] == kGhost) {
        // Ghost face (u, w, ghost): the open half-plane left of u->w plus the
        // open segment uw.
        const Point& u = pts_[f.v[(i + 1) % 3]];
        const Point& w = pts_[f.v[(i + 2) % 3]];
        const int o = predicates::orient2d(u, w, q);
        if (o > 0) return true;
        if (o < 0) return false;
        const double t1 = (q[0] - u[0]) * (w[0] - u[0]) + (q[1] - u[1]) * (w[1] - u[1]);
        const double t2 = (q[0] - w[0]) * (u[0] - w[0]) + (q[1] - w[1]) * (u[1] - w[1]);
        return t1 > 0.0 && t2 > 0.0;
      }
    }
    return predicates::incircle(pts_[f.v[0]], pts_[f.v[1]], pts_[f.v[2]], q) > 0;
  }

  void insert(std::uint32_t p) {
    std::int32_t start = -1;
    for (std::size_t f = faces_.size(); f-- > 0;) {
      if (faces_[f].alive && in_conflict(faces_[f], p)) {
        start = static_cast<std::int32_t>(f);
        break;
      }
    }
    if (start < 0) {
      throw Error(ErrorKind::kDegenerateInput, "point not located");
    }

    struct BoundaryEdge {
      std::uint32_t a, b;
      std::int32_t outside;
    };
    std::vector<BoundaryEdge> boundary;
    std::vector<std::int32_t> stack{start};
    std::vector<std::int32_t> cavity;
    faces_[start].alive = false;
    while (!stack.empty()) {
      const std::int32_t f = stack.back();
      stack.pop_back();
      cavity.push_back(f);
      for (int i = 0; i < 3; ++i) {
        const std::int32_t g = faces_[f].n[i];
        if (!faces_[g].alive) continue;
        if (in_conflict(faces_[g], p)) {
          faces_[g].alive = false;
          stack.push_back(g);
        } else {
          boundary.push_back(
              {faces_[f].v[(i + 1) % 3], faces_[f].v[(i + 2) % 3], g});
        }
      }
    }
    std::vector<std::int32_t> created;
    created.reserve(boundary.size());
    for (const BoundaryEdge& e : boundary) {
      // New face (a, b, p); rotate so a ghost, if any, sits in slot 2.
      Face nf;
      if (e.a == kGhost) {
        nf.v = {e.b, p, kGhost};
        nf.n = {-1, e.outside, -1};
      } else if (e.b == kGhost) {
        nf.v = {p, e.a, kGhost};
        nf.n = {e.outside, -1, -1};
      } else {
        nf.v = {e.a, e.b, p};
        nf.n = {-1, -1, e.outside};
      }
      const std::int32_t idx = allocate(nf);
      created.push_back(idx);
      // Repoint the outside face at the new face.
      Face& out = faces_[e.outside];
      for (int j = 0; j < 3; ++j) {
        if (out.v[(j + 1) % 3] == e.b && out.v[(j + 2) % 3] == e.a) out.n[j] = idx;
      }
    }
    // Link new faces to each other across the spokes (x, p).
    for (std::int32_t idx : created) {
      Face& f = faces_[idx];
      for (int i = 0; i < 3; ++i) {
        if (f.n[i] >= 0) continue;
        // Edge opposite v[i] runs u -> w; its twin runs w -> u.
        const std::uint32_t u = f.v[(i + 1) % 3];
        const std::uint32_t w = f.v[(i + 2) % 3];
        for (std::int32_t jdx : created) {
          if (jdx == idx) continue;
          const Face& g = faces_[jdx];
          for (int j = 0; j < 3; ++j) {
            if (g.v[(j + 1) % 3] == w && g.v[(j + 2) % 3] == u) {
              f.n[i] = jdx;
            }
          }
        }
      }
    }
    for (std::int32_t f : cavity) free_.push_back(f);
  }

  std::int32_t allocate(const Face& f) {
    if (!free_.empty()) {
      const std::int32_t idx = free_.back();
      free_.pop_back();
      faces_[idx] = f;
      return idx;
    }
    faces_.push_back(f);
    return static_cast<std::int32_t>(faces_.size() - 1);
  }

  std::span<const Point> pts_;
  std::vector<Face> faces_;
  std::vector<std::int32_t> free_;
  std::uint32_t s0_ = 0, s1_ = 0, s2_ = 0;
};

inline void check_separation(std::span<const Point> pts) {
  std::vector<std::uint32_t> order(pts.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return pts[a][0] < pts[b][0];
  });
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const Point& a = pts[order[i]];
      const Point& b = pts[order[j]];
      if (b[0] - a[0] >= kMinSeparation) break;
      if (distance(a, b, 2) < kMinSeparation) {
        throw Error(ErrorKind::kDuplicatePoints,
                    "points " + std::to_string(order[i]) + " and " +
                        std::to_string(order[j]) + " coincide");
      }
    }
  }
}

}  // namespace detail

/// Delaunay triangulation of the convex hull of `points` by incremental
/// Bowyer-Watson insertion. Hull edges are closed off by ghost faces sharing
/// one vertex at infinity, which plays the role of an unbounded enclosing
/// triangle.
inline Triangulation triangulate(std::span<const Point> points) {
  if (points.size() < 3) {
    throw Error(ErrorKind::kDegenerateInput, "need at least 3 points");
  }
  for (const Point& p : points) {
    if (!is_finite(p)) {
      throw Error(ErrorKind::kInvalidArgument, "non-finite point");
    }
  }
  detail::check_separation(points);
  std::vector<Point> pts(points.begin(), points.end());
  for (Point& p : pts) p[2] = 0.0;
  std::vector<detail::Face> faces = detail::BowyerWatson(pts).run();

  Triangulation tri;
  tri.vertices = std::move(pts);
  tri.adjacency.resize(tri.vertices.size());
  for (const detail::Face& f : faces) {
    if (!f.alive) continue;
    if (f.v[0] == detail::kGhost || f.v[1] == detail::kGhost ||
        f.v[2] == detail::kGhost) {
      continue;
    }
    tri.triangles.push_back(f.v);
    for (int i = 0; i < 3; ++i) {
      tri.adjacency[f.v[i]].push_back(f.v[(i + 1) % 3]);
      tri.adjacency[f.v[(i + 1) % 3]].push_back(f.v[i]);
    }
  }
  for (auto& nbrs : tri.adjacency) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  std::sort(tri.triangles.begin(), tri.triangles.end());
  return tri;
}

/// Moves points that sit closer than kMinSeparation to an earlier point by a
/// small deterministic offset, so coincident sites never abort training.
inline std::vector<Point> jitter_duplicates(std::span<const Point> points) {
  std::vector<Point> out(points.begin(), points.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    for (int attempt = 1;; ++attempt) {
      bool clash = false;
      for (std::size_t j = 0; j < i; ++j) {
        if (distance(out[i], out[j], 2) < kMinSeparation) {
          clash = true;
          break;
        }
      }
      if (!clash) break;
      // Direction from a splitmix hash of (index, attempt).
      std::uint64_t z = (i * 0x9E3779B97F4A7C15ull) ^ (attempt * 0xD1B54A32D192ED03ull);
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      z ^= z >> 31;
      const double theta = static_cast<double>(z >> 11) * 0x1.0p-53 * 6.283185307179586;
      const double r = 2.0 * kMinSeparation * attempt;
      out[i][0] += r * std::cos(theta);
      out[i][1] += r * std::sin(theta);
    }
  }
  return out;
}

struct AugmentedSites {
  std::vector<Point> points;
  std::vector<std::uint8_t> labels;
  /// 1 for appended boundary points (never moved), 0 for the original sites.
  std::vector<std::uint8_t> fixed_mask;
};

/// Number of boundary points appended for m sites: ceil(sqrt(m)).
inline std::size_t boundary_count(std::size_t m) {
  std::size_t r = static_cast<std::size_t>(std::sqrt(static_cast<double>(m)));
  while (r * r > m) --r;
  while (r * r < m) ++r;
  return r;
}

/// Appends ceil(sqrt(K)) outside-labeled points spaced evenly along the
/// perimeter of the unit square, starting at the origin and walking
/// counter-clockwise.
inline AugmentedSites boundary_augment(const SiteSet& sites) {
  if (sites.dim() != 2) {
    throw Error(ErrorKind::kDimMismatch, "boundary augmentation is 2D only");
  }
  if (sites.size() < 4) {
    throw Error(ErrorKind::kInvalidArgument, "boundary augmentation needs K >= 4");
  }
  AugmentedSites out;
  out.points.assign(sites.points().begin(), sites.points().end());
  out.labels.assign(sites.labels().begin(), sites.labels().end());
  out.fixed_mask.assign(sites.size(), 0);
  const std::size_t n = boundary_count(sites.size());
  for (std::size_t j = 0; j < n; ++j) {
    const double s = 4.0 * static_cast<double>(j) / static_cast<double>(n);
    Point p{0.0, 0.0, 0.0};
    if (s < 1.0) {
      p = {s, 0.0, 0.0};
    } else if (s < 2.0) {
      p = {1.0, s - 1.0, 0.0};
    } else if (s < 3.0) {
      p = {3.0 - s, 1.0, 0.0};
    } else {
      p = {0.0, 4.0 - s, 0.0};
    }
    out.points.push_back(p);
    out.labels.push_back(0);
    out.fixed_mask.push_back(1);
  }
  return out;
}

/// Uniform (umbrella) Laplacian of the Delaunay graph: row i is
/// e_i - (1/deg i) * sum of neighbor indicators.
struct GraphLaplacian {
  std::size_t size = 0;
  std::vector<std::vector<std::uint32_t>> neighbors;
  std::vector<std::uint8_t> fixed_mask;

  double weight(std::size_t row) const {
    return neighbors[row].empty() ? 0.0 : 1.0 / static_cast<double>(neighbors[row].size());
  }

  /// (L p)_i for every row.
  std::vector<Point> apply(std::span<const Point> p) const {
    std::vector<Point> out(size, Point{0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < size; ++i) {
      const double w = weight(i);
      Point mean{0.0, 0.0, 0.0};
      for (std::uint32_t j : neighbors[i]) {
        for (int d = 0; d < 2; ++d) mean[d] += p[j][d];
      }
      for (int d = 0; d < 2; ++d) out[i][d] = p[i][d] - w * mean[d];
    }
    return out;
  }

  /// Dense row i (for tests and debugging).
  std::vector<double> row(std::size_t i) const {
    std::vector<double> r(size, 0.0);
    r[i] = 1.0;
    for (std::uint32_t j : neighbors[i]) r[j] -= weight(i);
    return r;
  }
};

inline GraphLaplacian laplacian(const Triangulation& tri,
                                std::span<const std::uint8_t> fixed_mask) {
  if (fixed_mask.size() != tri.vertices.size()) {
    throw Error(ErrorKind::kShapeMismatch, "fixed mask size");
  }
  GraphLaplacian lap;
  lap.size = tri.vertices.size();
  lap.neighbors = tri.adjacency;
  lap.fixed_mask.assign(fixed_mask.begin(), fixed_mask.end());
  return lap;
}

/// Writes the triangulation as an OFF file (z = 0).
inline void write_off(const std::string& path, const Triangulation& tri) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path);
  out << "OFF\n"
      << tri.vertices.size() << ' ' << tri.triangles.size() << " 0\n";
  out << std::setprecision(17);
  for (const Point& p : tri.vertices) out << p[0] << ' ' << p[1] << " 0\n";
  for (const auto& t : tri.triangles) {
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
}

}  // namespace voronet

#endif  // VORONET_DELAUNAY_HPP
