#ifndef VORONET_FIELDS_HPP
#define VORONET_FIELDS_HPP

#include <array>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "voronet/common.hpp"

namespace voronet {

/// Ball or axis-aligned box inside the unit cube.
class AnalyticShape {
 public:
  enum class Kind { kBall, kBox };

  static AnalyticShape ball(int dim, const Point& center, double radius) {
    check_dim(dim);
    if (!(radius > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "ball radius must be > 0");
    }
    for (int d = 0; d < dim; ++d) {
      if (center[d] - radius < 0.0 || center[d] + radius > 1.0) {
        throw Error(ErrorKind::kInvalidArgument, "ball leaves the unit box");
      }
    }
    AnalyticShape s(Kind::kBall, dim);
    s.a_ = center;
    s.radius_ = radius;
    return s;
  }

  static AnalyticShape box(int dim, const Point& lo, const Point& hi) {
    check_dim(dim);
    for (int d = 0; d < dim; ++d) {
      if (!(lo[d] < hi[d]) || lo[d] < 0.0 || hi[d] > 1.0) {
        throw Error(ErrorKind::kInvalidArgument, "box bounds invalid");
      }
    }
    AnalyticShape s(Kind::kBox, dim);
    s.a_ = lo;
    s.b_ = hi;
    return s;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Point& center() const { return a_; }
  double radius() const { return radius_; }

  /// Membership without a domain check.
  bool contains(const Point& x) const {
    if (kind_ == Kind::kBall) {
      return squared_distance(x, a_, dim_) <= radius_ * radius_;
    }
    for (int d = 0; d < dim_; ++d) {
      if (x[d] < a_[d] || x[d] > b_[d]) return false;
    }
    return true;
  }

 private:
  AnalyticShape(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  int dim_;
  Point a_{0.0, 0.0, 0.0};
  Point b_{0.0, 0.0, 0.0};
  double radius_ = 0.0;
};

/// Binary occupancy on a cell-centered grid over [0,1]^D. Cell (i, j, k) has
/// its center at ((i+.5)/Rx, (j+.5)/Ry, (k+.5)/Rz); storage is x-fastest and
/// j = 0 is the bottom (y = 0) row.
class GridOccupancy {
 public:
  GridOccupancy(int dim, std::array<std::size_t, 3> res)
      : dim_(dim), res_(res) {
    check_dim(dim);
    if (dim == 2) res_[2] = 1;
    for (int d = 0; d < dim; ++d) {
      if (res_[d] < 2) {
        throw Error(ErrorKind::kInvalidArgument, "grid resolution must be >= 2");
      }
    }
    values_.assign(res_[0] * res_[1] * res_[2], 0);
  }

  GridOccupancy(int dim, std::array<std::size_t, 3> res,
                std::vector<std::uint8_t> values)
      : GridOccupancy(dim, res) {
    if (values.size() != values_.size()) {
      throw Error(ErrorKind::kShapeMismatch, "grid value count");
    }
    for (std::uint8_t v : values) {
      if (v > 1) throw Error(ErrorKind::kInvalidArgument, "grid values must be 0/1");
    }
    values_ = std::move(values);
  }

  /// Square/cubic grid sampled from any oracle at cell centers.
  template <class Oracle>
  static GridOccupancy rasterize(const Oracle& oracle, std::size_t resolution) {
    const int dim = oracle.dim();
    GridOccupancy g(dim, {resolution, resolution, dim == 3 ? resolution : 1});
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
      g.values_[idx] = oracle.contains(g.cell_center(idx)) ? 1 : 0;
    }
    return g;
  }

  int dim() const { return dim_; }
  const std::array<std::size_t, 3>& resolution() const { return res_; }
  std::size_t size() const { return values_.size(); }
  std::span<const std::uint8_t> values() const { return values_; }
  std::span<std::uint8_t> values() { return values_; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k = 0) const {
    return i + res_[0] * (j + res_[1] * k);
  }

  std::array<std::size_t, 3> coords(std::size_t idx) const {
    return {idx % res_[0], (idx / res_[0]) % res_[1], idx / (res_[0] * res_[1])};
  }

  std::uint8_t at(std::size_t i, std::size_t j, std::size_t k = 0) const {
    return values_[index(i, j, k)];
  }
  void set(std::size_t i, std::size_t j, std::size_t k, std::uint8_t v) {
    values_[index(i, j, k)] = v;
  }

  Point cell_center(std::size_t idx) const {
    const auto c = coords(idx);
    Point p{0.0, 0.0, 0.0};
    for (int d = 0; d < dim_; ++d) {
      p[d] = (static_cast<double>(c[d]) + 0.5) / static_cast<double>(res_[d]);
    }
    return p;
  }

  /// Index of the cell containing x; coordinates outside [0,1] clamp to the
  /// border cells.
  std::size_t cell_of(const Point& x) const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (int d = 0; d < dim_; ++d) {
      const double r = static_cast<double>(res_[d]);
      double f = std::floor(x[d] * r);
      f = std::clamp(f, 0.0, r - 1.0);
      c[d] = static_cast<std::size_t>(f);
    }
    return index(c[0], c[1], c[2]);
  }

  bool contains(const Point& x) const { return values_[cell_of(x)] != 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t v : values_) n += v;
    return n;
  }

  GridOccupancy complement() const {
    GridOccupancy g = *this;
    for (std::uint8_t& v : g.values_) v = 1 - v;
    return g;
  }

  friend bool operator==(const GridOccupancy&, const GridOccupancy&) = default;

 private:
  int dim_;
  std::array<std::size_t, 3> res_;
  std::vector<std::uint8_t> values_;
};

template <class T>
concept OccupancyOracle = requires(const T& o, const Point& x) {
  { o.dim() } -> std::convertible_to<int>;
  { o.contains(x) } -> std::convertible_to<bool>;
};

inline bool in_unit_domain(const Point& x, int dim) {
  for (int d = 0; d < dim; ++d) {
    if (!(x[d] >= 0.0 && x[d] <= 1.0)) return false;
  }
  return true;
}

template <OccupancyOracle Oracle>
std::uint8_t occupancy_at(const Oracle& oracle, const Point& x) {
  if (!in_unit_domain(x, oracle.dim())) {
    throw Error(ErrorKind::kOutOfDomain, "query point outside [0,1]^D");
  }
  return oracle.contains(x) ? 1 : 0;
}

/// phi_plus: distance to the occupied set; phi_minus: distance to its
/// complement. Both measured between cell centers, in domain units.
struct DistanceFieldPair {
  GridOccupancy grid;
  std::vector<double> phi_plus;
  std::vector<double> phi_minus;

  /// Field value at the cell containing x (clamped to the grid).
  double plus_at(const Point& x) const { return phi_plus[grid.cell_of(x)]; }
  double minus_at(const Point& x) const { return phi_minus[grid.cell_of(x)]; }

  /// Central-difference gradient of a field at the cell containing x;
  /// one-sided at the grid border.
  Point gradient(std::span<const double> field, const Point& x) const {
    const std::size_t idx = grid.cell_of(x);
    const auto c = grid.coords(idx);
    const auto& res = grid.resolution();
    Point g{0.0, 0.0, 0.0};
    for (int d = 0; d < grid.dim(); ++d) {
      const double h = 1.0 / static_cast<double>(res[d]);
      auto lo = c, hi = c;
      if (c[d] > 0) lo[d] -= 1;
      if (c[d] + 1 < res[d]) hi[d] += 1;
      const double span = static_cast<double>(hi[d] - lo[d]) * h;
      g[d] = (field[grid.index(hi[0], hi[1], hi[2])] -
              field[grid.index(lo[0], lo[1], lo[2])]) /
             span;
    }
    return g;
  }
};

namespace detail {

inline constexpr double kEdtInf = std::numeric_limits<double>::infinity();

/// One separable pass: out[q] = min_v weight (q - v)^2 + f[v] over the
/// finite entries of f (lower envelope of parabolas).
inline void edt_1d(std::span<const double> f, double weight, std::span<double> out,
                   std::vector<std::size_t>& v, std::vector<double>& z) {
  const std::size_t n = f.size();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::ptrdiff_t k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kEdtInf) continue;
    const double fq = f[q] + weight * static_cast<double>(q) * static_cast<double>(q);
    while (k >= 0) {
      const std::size_t vk = v[k];
      const double fv = f[vk] + weight * static_cast<double>(vk) * static_cast<double>(vk);
      const double s = (fq - fv) / (2.0 * weight * static_cast<double>(q - vk));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kEdtInf : 0.0;
    if (k > 0) {
      const std::size_t vp = v[k - 1];
      const double fv = f[vp] + weight * static_cast<double>(vp) * static_cast<double>(vp);
      z[k] = (fq - fv) / (2.0 * weight * static_cast<double>(q - vp));
    }
    z[k + 1] = kEdtInf;
  }
  if (k < 0) {
    for (double& o : out) o = kEdtInf;
    return;
  }
  std::ptrdiff_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[j + 1] < static_cast<double>(q)) ++j;
    const double dq = static_cast<double>(q) - static_cast<double>(v[j]);
    out[q] = weight * dq * dq + f[v[j]];
  }
}

/// Squared distance (in units of the x-axis cell width) from every cell to
/// the nearest cell whose value equals `source`.
inline std::vector<double> squared_edt(const GridOccupancy& g, std::uint8_t source) {
  const auto& res = g.resolution();
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    d[i] = g.values()[i] == source ? 0.0 : kEdtInf;
  }
  std::vector<std::size_t> v;
  std::vector<double> z;
  for (int axis = 0; axis < g.dim(); ++axis) {
    const double ratio = static_cast<double>(res[0]) / static_cast<double>(res[axis]);
    const double weight = ratio * ratio;
    const std::size_t n = res[axis];
    std::size_t stride = 1;
    for (int a = 0; a < axis; ++a) stride *= res[a];
    std::vector<double> line(n), out(n);
    for (std::size_t base = 0; base < g.size(); ++base) {
      // Visit each line once: its first element has axis coordinate 0.
      if ((base / stride) % n != 0) continue;
      for (std::size_t t = 0; t < n; ++t) line[t] = d[base + t * stride];
      edt_1d(line, weight, out, v, z);
      for (std::size_t t = 0; t < n; ++t) d[base + t * stride] = out[t];
    }
  }
  return d;
}

}  // namespace detail

/// Exact Euclidean distance transforms of both phases.
inline DistanceFieldPair edt(const GridOccupancy& grid) {
  const std::size_t ones = grid.count();
  if (ones == 0 || ones == grid.size()) {
    throw Error(ErrorKind::kEmptyPhase, "occupancy has a single phase");
  }
  const double scale = 1.0 / static_cast<double>(grid.resolution()[0]);
  DistanceFieldPair out{grid, detail::squared_edt(grid, 1), detail::squared_edt(grid, 0)};
  for (double& x : out.phi_plus) x = std::sqrt(x) * scale;
  for (double& x : out.phi_minus) x = std::sqrt(x) * scale;
  return out;
}

enum class SamplingStrategy { kUniform, kStratified };

inline std::string to_string(SamplingStrategy s) {
  return s == SamplingStrategy::kUniform ? "uniform" : "stratified";
}

inline SamplingStrategy parse_sampling_strategy(const std::string& s) {
  if (s == "uniform") return SamplingStrategy::kUniform;
  if (s == "stratified") return SamplingStrategy::kStratified;
  throw Error(ErrorKind::kInvalidArgument, "unknown sampling strategy: " + s);
}

/// Smallest n with n^dim >= count.
inline std::size_t strata_per_axis(std::size_t count, int dim) {
  std::size_t n = 1;
  auto power = [dim](std::size_t b) {
    std::size_t r = 1;
    for (int d = 0; d < dim; ++d) r *= b;
    return r;
  };
  while (power(n) < count) ++n;
  return n;
}

/// Monte-Carlo sample locations in [0,1]^D drawn from `rng`. Stratified mode
/// returns ceil(count^(1/D))^D points, one jittered sample per grid cell.
inline std::vector<Point> sample_points(int dim, std::size_t count,
                                        SamplingStrategy strategy, Rng& rng) {
  check_dim(dim);
  if (count == 0) throw Error(ErrorKind::kInvalidArgument, "count must be >= 1");
  std::vector<Point> out;
  if (strategy == SamplingStrategy::kUniform) {
    out.resize(count, Point{0.0, 0.0, 0.0});
    for (Point& p : out) {
      for (int d = 0; d < dim; ++d) p[d] = rng.uniform();
    }
    return out;
  }
  const std::size_t n = strata_per_axis(count, dim);
  const double h = 1.0 / static_cast<double>(n);
  const std::size_t nz = dim == 3 ? n : 1;
  out.reserve(n * n * nz);
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        Point p{(static_cast<double>(i) + rng.uniform()) * h,
                (static_cast<double>(j) + rng.uniform()) * h, 0.0};
        if (dim == 3) p[2] = (static_cast<double>(k) + rng.uniform()) * h;
        out.push_back(p);
      }
    }
  }
  return out;
}

inline std::vector<Point> sample_points(int dim, std::size_t count,
                                        SamplingStrategy strategy,
                                        std::uint64_t seed) {
  Rng rng(seed);
  return sample_points(dim, count, strategy, rng);
}

}  // namespace voronet

#endif  // VORONET_FIELDS_HPP
