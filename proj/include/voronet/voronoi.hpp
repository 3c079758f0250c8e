#ifndef VORONET_VORONOI_HPP
#define VORONET_VORONOI_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "voronet/common.hpp"

namespace voronet {

/// Gradient with respect to site positions: one Point per site, unused
/// trailing coordinates stay zero.
using SiteGrad = std::vector<Point>;

/// K labeled generator points. Exactly half of the sites carry label 1
/// ("inside"); labels are fixed at construction and never change.
class SiteSet {
 public:
  /// First K/2 sites are labeled 1, the rest 0.
  SiteSet(int dim, std::vector<Point> points)
      : dim_(dim), points_(std::move(points)) {
    labels_.assign(points_.size(), 0);
    std::fill(labels_.begin(), labels_.begin() + points_.size() / 2, 1);
    validate();
  }

  SiteSet(int dim, std::vector<Point> points, std::vector<std::uint8_t> labels)
      : dim_(dim), points_(std::move(points)), labels_(std::move(labels)) {
    validate();
  }

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }

  const Point& point(std::size_t k) const { return points_[k]; }
  std::span<const Point> points() const { return points_; }
  std::uint8_t label(std::size_t k) const { return labels_[k]; }
  std::span<const std::uint8_t> labels() const { return labels_; }

  void set_point(std::size_t k, const Point& p) {
    if (!is_finite(p)) {
      throw Error(ErrorKind::kInvalidArgument, "site coordinate not finite");
    }
    points_[k] = p;
    for (int d = dim_; d < 3; ++d) points_[k][d] = 0.0;
  }

  /// Coordinates flattened as [p0[0], .., p0[D-1], p1[0], ...].
  std::vector<double> flat() const {
    std::vector<double> out;
    out.reserve(points_.size() * dim_);
    for (const Point& p : points_) {
      for (int d = 0; d < dim_; ++d) out.push_back(p[d]);
    }
    return out;
  }

  void assign_flat(std::span<const double> coords) {
    if (coords.size() != points_.size() * static_cast<std::size_t>(dim_)) {
      throw Error(ErrorKind::kShapeMismatch, "flat coordinate count");
    }
    for (std::size_t k = 0; k < points_.size(); ++k) {
      Point p{0.0, 0.0, 0.0};
      for (int d = 0; d < dim_; ++d) p[d] = coords[k * dim_ + d];
      set_point(k, p);
    }
  }

  friend bool operator==(const SiteSet&, const SiteSet&) = default;

 private:
  void validate() {
    check_dim(dim_);
    const std::size_t k = points_.size();
    if (k < 2 || k % 2 != 0) {
      throw Error(ErrorKind::kInvalidArgument,
                  "site count must be even and >= 2, got " + std::to_string(k));
    }
    if (labels_.size() != k) {
      throw Error(ErrorKind::kShapeMismatch, "label count != site count");
    }
    std::size_t ones = 0;
    for (std::uint8_t l : labels_) {
      if (l > 1) throw Error(ErrorKind::kInvalidArgument, "label not in {0,1}");
      ones += l;
    }
    if (ones != k / 2) {
      throw Error(ErrorKind::kInvalidArgument,
                  "exactly half of the labels must be 1");
    }
    for (Point& p : points_) {
      if (!is_finite(p)) {
        throw Error(ErrorKind::kInvalidArgument, "site coordinate not finite");
      }
      for (int d = dim_; d < 3; ++d) p[d] = 0.0;
    }
  }

  int dim_;
  std::vector<Point> points_;
  std::vector<std::uint8_t> labels_;
};

/// Softness of the argmin relaxation. Larger is sharper.
class Temperature {
 public:
  explicit Temperature(double beta) : beta_(beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
      throw Error(ErrorKind::kInvalidArgument, "temperature must be > 0");
    }
  }
  double beta() const { return beta_; }

 private:
  double beta_;
};

inline constexpr double kDefaultBeta = 10000.0;

/// Lower clamp applied to distances inside the gradient only.
inline constexpr double kDistEpsilon = 1e-12;

using WeightVector = std::vector<double>;

inline std::vector<double> distances(const Point& x, const SiteSet& sites) {
  std::vector<double> out(sites.size());
  for (std::size_t k = 0; k < sites.size(); ++k) {
    out[k] = distance(x, sites.point(k), sites.dim());
  }
  return out;
}

namespace detail {

/// exp(-beta (D_k - D_min)) normalized in place. Terms whose exponent is below
/// the double underflow threshold are written as exact zeros without calling
/// exp(). Returns the normalizer.
inline double softmin_inplace(std::span<const double> dist, double beta,
                              std::span<double> weights) {
  double dmin = std::numeric_limits<double>::infinity();
  for (double d : dist) dmin = std::min(dmin, d);
  double z = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    const double e = -beta * (dist[k] - dmin);
    const double w = e < -745.0 ? 0.0 : std::exp(e);
    weights[k] = w;
    z += w;
  }
  const double inv = 1.0 / z;
  for (double& w : weights) w *= inv;
  return z;
}

}  // namespace detail

inline WeightVector soft_weights(const Point& x, const SiteSet& sites,
                                 Temperature temp) {
  const std::vector<double> dist = distances(x, sites);
  WeightVector w(dist.size());
  detail::softmin_inplace(dist, temp.beta(), w);
  return w;
}

inline double soft_voronoi(const Point& x, const SiteSet& sites,
                           Temperature temp) {
  const WeightVector w = soft_weights(x, sites, temp);
  double v = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (sites.label(k)) v += w[k];
  }
  return std::clamp(v, 0.0, 1.0);
}

struct HardSample {
  std::uint8_t occupancy;
  std::size_t cell;
};

/// Index of the nearest point; ties go to the lowest index.
inline std::size_t nearest_index(const Point& x, std::span<const Point> points,
                                 int dim) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double d2 = squared_distance(x, points[k], dim);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  return best;
}

inline HardSample hard_voronoi(const Point& x, const SiteSet& sites) {
  const std::size_t k = nearest_index(x, sites.points(), sites.dim());
  return {sites.label(k), k};
}

/// Reusable buffers for the fused value+gradient evaluation.
struct SoftScratch {
  std::vector<double> dist;
  std::vector<double> weight;
};

/// Evaluates V(x) and adds `outer(V) * dV/dp` into `grad`, where `outer`
/// receives the soft value and returns the upstream derivative dL/dV.
/// Returns V.
template <class Outer>
double soft_voronoi_accumulate(const Point& x, const SiteSet& sites,
                               Temperature temp, Outer&& outer,
                               std::span<Point> grad, SoftScratch& scratch) {
  const std::size_t n = sites.size();
  const int dim = sites.dim();
  scratch.dist.resize(n);
  scratch.weight.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    scratch.dist[k] = distance(x, sites.point(k), dim);
  }
  const double beta = temp.beta();
  detail::softmin_inplace(scratch.dist, beta, scratch.weight);
  double v = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (sites.label(k)) v += scratch.weight[k];
  }
  v = std::clamp(v, 0.0, 1.0);
  const double upstream = outer(v);
  if (upstream == 0.0) return v;
  // dV/dD_m = -beta W_m (lambda_m - V);  dD_m/dp_m = (p_m - x) / D_m
  for (std::size_t m = 0; m < n; ++m) {
    const double w = scratch.weight[m];
    if (w == 0.0) continue;
    const double dv_dd = -beta * w * (static_cast<double>(sites.label(m)) - v);
    const double coef =
        upstream * dv_dd / std::max(scratch.dist[m], kDistEpsilon);
    const Point& p = sites.point(m);
    for (int d = 0; d < dim; ++d) grad[m][d] += coef * (p[d] - x[d]);
  }
  return v;
}

inline SiteGrad grad_soft_voronoi(const Point& x, const SiteSet& sites,
                                  Temperature temp) {
  SiteGrad grad(sites.size(), Point{0.0, 0.0, 0.0});
  SoftScratch scratch;
  soft_voronoi_accumulate(x, sites, temp, [](double) { return 1.0; }, grad,
                          scratch);
  return grad;
}

}  // namespace voronet

#endif  // VORONET_VORONOI_HPP
