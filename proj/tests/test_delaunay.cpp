#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "voronet/delaunay.hpp"
#include "voronet/gradcheck.hpp"

using namespace voronet;
using boost::multiprecision::cpp_rational;

namespace {

cpp_rational q(double v) { return cpp_rational(v); }

int exact_orient(const Point& a, const Point& b, const Point& c) {
  const cpp_rational det = (q(a[0]) - q(c[0])) * (q(b[1]) - q(c[1])) -
                           (q(a[1]) - q(c[1])) * (q(b[0]) - q(c[0]));
  return det.sign();
}

int exact_incircle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const cpp_rational adx = q(a[0]) - q(d[0]), ady = q(a[1]) - q(d[1]);
  const cpp_rational bdx = q(b[0]) - q(d[0]), bdy = q(b[1]) - q(d[1]);
  const cpp_rational cdx = q(c[0]) - q(d[0]), cdy = q(c[1]) - q(d[1]);
  const cpp_rational det = (adx * adx + ady * ady) * (bdx * cdy - bdy * cdx) +
                           (bdx * bdx + bdy * bdy) * (cdx * ady - cdy * adx) +
                           (cdx * cdx + cdy * cdy) * (adx * bdy - ady * bdx);
  return det.sign();
}

std::vector<Point> random_points(Rng& rng, std::size_t n) {
  std::vector<Point> pts(n);
  for (Point& p : pts) p = {rng.uniform(), rng.uniform(), 0.0};
  return pts;
}

std::set<Edge> edge_set(const Triangulation& t, std::span<const std::size_t> label_of = {}) {
  std::set<Edge> out;
  for (auto [a, b] : t.edges()) {
    if (!label_of.empty()) {
      a = static_cast<std::uint32_t>(label_of[a]);
      b = static_cast<std::uint32_t>(label_of[b]);
    }
    out.insert({std::min(a, b), std::max(a, b)});
  }
  return out;
}

// Every triangle is CCW and no vertex lies strictly inside its circumcircle.
void expect_delaunay(const Triangulation& t) {
  for (const auto& tri : t.triangles) {
    const Point& a = t.vertices[tri[0]];
    const Point& b = t.vertices[tri[1]];
    const Point& c = t.vertices[tri[2]];
    ASSERT_EQ(exact_orient(a, b, c), 1);
    for (std::size_t v = 0; v < t.vertices.size(); ++v) {
      ASSERT_LE(exact_incircle(a, b, c, t.vertices[v]), 0);
    }
  }
}

std::size_t hull_size(const std::vector<Point>& pts) {
  std::vector<Point> p = pts;
  std::sort(p.begin(), p.end());
  std::vector<Point> h;
  for (int pass = 0; pass < 2; ++pass) {
    const std::size_t start = h.size();
    for (const Point& x : p) {
      while (h.size() >= start + 2 && exact_orient(h[h.size() - 2], h.back(), x) <= 0) {
        h.pop_back();
      }
      h.push_back(x);
    }
    h.pop_back();
    std::reverse(p.begin(), p.end());
  }
  return h.size();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

}  // namespace

TEST(Predicates, MatchExactRationalOnRandomInputs) {
  Rng rng(31);
  for (int t = 0; t < 20000; ++t) {
    Point a{rng.uniform(), rng.uniform(), 0}, b{rng.uniform(), rng.uniform(), 0};
    Point c{rng.uniform(), rng.uniform(), 0}, d{rng.uniform(), rng.uniform(), 0};
    ASSERT_EQ(predicates::orient2d(a, b, c), exact_orient(a, b, c));
    if (exact_orient(a, b, c) > 0) {
      ASSERT_EQ(predicates::incircle(a, b, c, d), exact_incircle(a, b, c, d));
    }
  }
}

TEST(Predicates, MatchExactRationalOnNearDegenerateInputs) {
  // Points a few ulps off a line or a circle, where the naive determinant
  // routinely gets the sign wrong.
  Rng rng(32);
  for (int t = 0; t < 20000; ++t) {
    const double s = rng.uniform();
    Point a{0.5, 0.5, 0}, b{12.0, 12.0, 0}, c{24.0, 24.0, 0};
    c[0] = std::nextafter(0.5 + s * 24.0, t % 2 ? 1e9 : -1e9);
    c[1] = 0.5 + s * 24.0;
    ASSERT_EQ(predicates::orient2d(a, b, c), exact_orient(a, b, c));

    const double th = rng.uniform(0.0, 6.283185307179586);
    Point p0{1, 0, 0}, p1{0, 1, 0}, p2{-1, 0, 0};
    Point d{std::cos(th), std::sin(th), 0};
    d[0] = std::nextafter(d[0], t % 3 ? 2.0 : -2.0);
    ASSERT_EQ(predicates::incircle(p0, p1, p2, d), exact_incircle(p0, p1, p2, d));
  }
}

TEST(Predicates, ExactZeroCases) {
  EXPECT_EQ(predicates::orient2d({0, 0, 0}, {1, 1, 0}, {2, 2, 0}), 0);
  EXPECT_EQ(predicates::incircle({1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}), 0);
  EXPECT_EQ(predicates::orient2d({0, 0, 0}, {1, 0, 0}, {0, 1, 0}), 1);
}

TEST(Triangulate, UnitSquare) {
  const std::vector<Point> sq{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  const Triangulation t = triangulate(sq);
  EXPECT_EQ(t.triangles.size(), 2u);
  EXPECT_EQ(t.edges().size(), 5u);
}

TEST(Triangulate, SingleTriangleIsCcw) {
  const std::vector<Point> pts{{0, 0, 0}, {0, 1, 0}, {1, 0, 0}};
  const Triangulation t = triangulate(pts);
  ASSERT_EQ(t.triangles.size(), 1u);
  const auto& tri = t.triangles[0];
  EXPECT_EQ(exact_orient(pts[tri[0]], pts[tri[1]], pts[tri[2]]), 1);
}

TEST(Triangulate, EmptyCircumcircleAgainstBruteForce) {
  Rng rng(33);
  for (int t = 0; t < 30; ++t) {
    const auto pts = random_points(rng, 50);
    expect_delaunay(triangulate(pts));
  }
}

TEST(Triangulate, EulerAndHullCount) {
  Rng rng(34);
  for (std::size_t n : {3u, 4u, 10u, 50u, 200u}) {
    const auto pts = random_points(rng, n);
    const Triangulation t = triangulate(pts);
    const long m = static_cast<long>(n);
    const long e = static_cast<long>(t.edges().size());
    const long f = static_cast<long>(t.triangles.size());
    EXPECT_EQ(m - e + f, 1);
    EXPECT_EQ(e, 3 * m - 3 - static_cast<long>(hull_size(pts)));
  }
}

TEST(Triangulate, ConvexPositionOnCircle) {
  Rng rng(35);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 4 + rng.index(20);
    std::vector<Point> pts;
    for (std::size_t i = 0; i < n; ++i) {
      const double th = rng.uniform(0.0, 6.283185307179586);
      pts.push_back({0.5 + 0.4 * std::cos(th), 0.5 + 0.4 * std::sin(th), 0});
    }
    const Triangulation tri = triangulate(pts);
    const std::size_t h = hull_size(pts);
    EXPECT_EQ(tri.edges().size(), 3 * n - 3 - h);
    expect_delaunay(tri);
  }
}

TEST(Triangulate, PermutationInvariantEdgeSet) {
  Rng rng(36);
  for (int t = 0; t < 20; ++t) {
    const auto pts = random_points(rng, 60);
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    std::vector<Point> shuffled;
    for (std::size_t i : perm) shuffled.push_back(pts[i]);
    EXPECT_EQ(edge_set(triangulate(pts)), edge_set(triangulate(shuffled), perm));
  }
}

TEST(Triangulate, LatticeWithCocircularQuads) {
  std::vector<Point> pts;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) pts.push_back({i * 0.125, j * 0.125, 0});
  }
  const Triangulation t = triangulate(pts);
  EXPECT_EQ(t.triangles.size(), 2u * 7 * 7);
  expect_delaunay(t);
}

TEST(Triangulate, Errors) {
  EXPECT_EQ(kind_of([] {
              std::vector<Point> line{{0, 0, 0}, {0.5, 0.5, 0}, {1, 1, 0}, {0.25, 0.25, 0}};
              triangulate(line);
            }),
            ErrorKind::kDegenerateInput);
  EXPECT_EQ(kind_of([] {
              std::vector<Point> dup{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 5e-10, 0}};
              triangulate(dup);
            }),
            ErrorKind::kDuplicatePoints);
  EXPECT_EQ(kind_of([] {
              std::vector<Point> two{{0, 0, 0}, {1, 0, 0}};
              triangulate(two);
            }),
            ErrorKind::kDegenerateInput);
}

TEST(JitterDuplicates, SeparatesCoincidentPointsDeterministically) {
  std::vector<Point> pts{{0.3, 0.3, 0}, {0.3, 0.3, 0}, {0.3, 0.3, 0}, {0.7, 0.2, 0}};
  const auto a = jitter_duplicates(pts);
  EXPECT_EQ(a, jitter_duplicates(pts));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      EXPECT_GE(distance(a[i], a[j], 2), kMinSeparation);
    }
    EXPECT_LT(distance(a[i], pts[i], 2), 1e-7);
  }
  EXPECT_NO_THROW(triangulate(a));
}

TEST(BoundaryAugment, SixteenSites) {
  Rng rng(37);
  const SiteSet s = gradcheck::random_sites(rng, 16, 2, 0.0, 1.0);
  const AugmentedSites a = boundary_augment(s);
  ASSERT_EQ(a.points.size(), 20u);
  const std::vector<Point> expected{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(a.points[16 + j], expected[j]);
    EXPECT_EQ(a.labels[16 + j], 0);
    EXPECT_EQ(a.fixed_mask[16 + j], 1);
  }
  for (std::size_t k = 0; k < 16; ++k) {
    EXPECT_EQ(a.points[k], s.point(k));
    EXPECT_EQ(a.labels[k], s.label(k));
    EXPECT_EQ(a.fixed_mask[k], 0);
  }
}

TEST(BoundaryAugment, CountsAndSpacing) {
  Rng rng(38);
  for (std::size_t m : {4u, 6u, 10u, 16u, 18u, 128u}) {
    const SiteSet s = gradcheck::random_sites(rng, m, 2, 0.0, 1.0);
    const AugmentedSites a = boundary_augment(s);
    const auto n = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
    ASSERT_EQ(a.points.size(), m + n) << m;
    for (std::size_t j = 0; j < n; ++j) {
      // Arclength walk oracle.
      const double arc = 4.0 * static_cast<double>(j) / static_cast<double>(n);
      const Point& p = a.points[m + j];
      double got = 0.0;
      if (p[1] == 0.0 && p[0] < 1.0) got = p[0];
      else if (p[0] == 1.0 && p[1] < 1.0) got = 1.0 + p[1];
      else if (p[1] == 1.0 && p[0] > 0.0) got = 3.0 - p[0];
      else got = 4.0 - p[1];
      EXPECT_NEAR(got, arc, 1e-12);
      EXPECT_EQ(a.labels[m + j], 0);
    }
  }
  const AugmentedSites four = boundary_augment(gradcheck::random_sites(rng, 4, 2, 0.2, 0.8));
  EXPECT_EQ(four.points[4], (Point{0, 0, 0}));
  EXPECT_EQ(four.points[5], (Point{1, 1, 0}));
}

TEST(BoundaryAugment, Errors) {
  SiteSet two(2, {{0.2, 0.2, 0}, {0.8, 0.8, 0}});
  EXPECT_EQ(kind_of([&] { boundary_augment(two); }), ErrorKind::kInvalidArgument);
  SiteSet three_d(3, {{0.2, 0.2, 0.2}, {0.8, 0.8, 0.8}, {0.1, 0.5, 0.5}, {0.6, 0.3, 0.9}});
  EXPECT_EQ(kind_of([&] { boundary_augment(three_d); }), ErrorKind::kDimMismatch);
}

TEST(Laplacian, SingleTriangle) {
  const std::vector<Point> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const std::vector<std::uint8_t> mask(3, 0);
  const GraphLaplacian lap = laplacian(triangulate(pts), mask);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto r = lap.row(i);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(r[j], i == j ? 1.0 : -0.5);
  }
}

TEST(Laplacian, HexagonCenter) {
  std::vector<Point> pts{{0.5, 0.5, 0}};
  for (int i = 0; i < 6; ++i) {
    const double th = i * 3.141592653589793 / 3.0;
    pts.push_back({0.5 + 0.3 * std::cos(th), 0.5 + 0.3 * std::sin(th), 0});
  }
  const GraphLaplacian lap = laplacian(triangulate(pts), std::vector<std::uint8_t>(7, 0));
  const auto r = lap.row(0);
  EXPECT_DOUBLE_EQ(r[0], 1.0);
  for (std::size_t j = 1; j < 7; ++j) EXPECT_DOUBLE_EQ(r[j], -1.0 / 6.0);
}

TEST(Laplacian, RowsSumToZeroAndMatchEdges) {
  Rng rng(39);
  for (int t = 0; t < 10; ++t) {
    const auto pts = random_points(rng, 80);
    const Triangulation tri = triangulate(pts);
    const GraphLaplacian lap = laplacian(tri, std::vector<std::uint8_t>(80, 0));
    std::vector<Point> ones(80, Point{1.0, 1.0, 0.0});
    for (const Point& v : lap.apply(ones)) {
      EXPECT_NEAR(v[0], 0.0, 1e-12);
      EXPECT_NEAR(v[1], 0.0, 1e-12);
    }
    std::set<Edge> from_rows;
    for (std::uint32_t i = 0; i < 80; ++i) {
      const auto r = lap.row(i);
      for (std::uint32_t j = 0; j < 80; ++j) {
        if (j != i && r[j] != 0.0) from_rows.insert({std::min(i, j), std::max(i, j)});
      }
    }
    EXPECT_EQ(from_rows, edge_set(tri));
  }
}

TEST(Laplacian, VanishesWhereVerticesAreNeighborMeans) {
  // Regular triangular lattice: every interior vertex is the mean of its six
  // neighbors. Boundary rows are fixed and masked.
  std::vector<Point> pts;
  std::vector<std::uint8_t> mask;
  const int n = 9;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      pts.push_back({0.1 * i + 0.05 * (j % 2), 0.1 * std::sqrt(0.75) * j, 0});
      mask.push_back(i == 0 || j == 0 || i == n - 1 || j == n - 1);
    }
  }
  const GraphLaplacian lap = laplacian(triangulate(pts), mask);
  const auto lp = lap.apply(pts);
  std::size_t movable = 0;
  for (std::size_t v = 0; v < pts.size(); ++v) {
    if (mask[v]) continue;
    ++movable;
    EXPECT_EQ(lap.neighbors[v].size(), 6u);
    EXPECT_NEAR(lp[v][0], 0.0, 1e-12);
    EXPECT_NEAR(lp[v][1], 0.0, 1e-12);
  }
  EXPECT_EQ(movable, 49u);
}
