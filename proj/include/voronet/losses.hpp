#ifndef VORONET_LOSSES_HPP
#define VORONET_LOSSES_HPP

#include <array>
#include <cmath>
#include <span>
#include <thread>
#include <vector>

#include "voronet/common.hpp"
#include "voronet/delaunay.hpp"
#include "voronet/fields.hpp"
#include "voronet/voronoi.hpp"

namespace voronet {

struct LossValue {
  double value = 0.0;
  SiteGrad grad;
};

struct LossWeights {
  double rec = 1.0;
  double bound = 1.0;
  double sdf = 0.1;
  double cvt = 0.01;

  void validate() const {
    for (double w : {rec, bound, sdf, cvt}) {
      if (!std::isfinite(w) || w < 0.0) {
        throw Error(ErrorKind::kInvalidArgument, "loss weights must be finite and >= 0");
      }
    }
    if (!(rec > 0.0)) throw Error(ErrorKind::kInvalidArgument, "w_rec must be > 0");
  }
};

/// Residual applied to O(x) - V(x) in the reconstruction loss.
enum class Residual { kSquared, kAbsolute };

struct LossReport {
  double total = 0.0;
  double rec = 0.0;
  double bound = 0.0;
  double sdf = 0.0;
  double cvt = 0.0;
  SiteGrad grad_sites;
};

namespace detail {

inline constexpr std::size_t kRecChunk = 512;

struct ChunkResult {
  double value = 0.0;
  SiteGrad grad;
};

inline void add_into(ChunkResult& a, const ChunkResult& b) {
  a.value += b.value;
  for (std::size_t k = 0; k < a.grad.size(); ++k) {
    for (int d = 0; d < 3; ++d) a.grad[k][d] += b.grad[k][d];
  }
}

/// Reduces chunk results with a fixed binary tree so the sum only depends on
/// the number of chunks.
inline ChunkResult tree_reduce(std::vector<ChunkResult>& parts) {
  std::size_t n = parts.size();
  while (n > 1) {
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i + half < n; ++i) add_into(parts[i], parts[i + half]);
    n = half;
  }
  return std::move(parts[0]);
}

template <class Fn>
void for_each_chunk(std::size_t chunks, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += workers) fn(c);
    });
  }
}

}  // namespace detail

/// Monte-Carlo estimate of the mean residual between the target occupancy and
/// the soft Voronoi function, with its gradient with respect to the sites.
template <OccupancyOracle Oracle>
LossValue rec_loss(const Oracle& oracle, const SiteSet& sites, Temperature temp,
                   std::span<const Point> samples,
                   Residual residual = Residual::kSquared) {
  if (samples.empty()) throw Error(ErrorKind::kInvalidArgument, "no samples");
  if (oracle.dim() != sites.dim()) {
    throw Error(ErrorKind::kDimMismatch, "oracle and sites differ in dimension");
  }
  std::vector<std::uint8_t> target(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    target[i] = occupancy_at(oracle, samples[i]);
  }
  const std::size_t chunks = (samples.size() + detail::kRecChunk - 1) / detail::kRecChunk;
  std::vector<detail::ChunkResult> parts(chunks);
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  detail::for_each_chunk(chunks, [&](std::size_t c) {
    detail::ChunkResult& part = parts[c];
    part.grad.assign(sites.size(), Point{0.0, 0.0, 0.0});
    SoftScratch scratch;
    const std::size_t end = std::min(samples.size(), (c + 1) * detail::kRecChunk);
    for (std::size_t i = c * detail::kRecChunk; i < end; ++i) {
      const double o = static_cast<double>(target[i]);
      double term = 0.0;
      soft_voronoi_accumulate(
          samples[i], sites, temp,
          [&](double v) {
            const double r = v - o;
            if (residual == Residual::kSquared) {
              term = r * r;
              return 2.0 * r * inv_n;
            }
            term = std::abs(r);
            return (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * inv_n;
          },
          part.grad, scratch);
      part.value += term;
    }
  });
  detail::ChunkResult total = detail::tree_reduce(parts);
  return {total.value * inv_n, std::move(total.grad)};
}

inline double soft_bound(double x) {
  return std::max(-x, 0.0) + std::max(x - 1.0, 0.0);
}

/// Penalty on coordinates leaving [0,1]. Subgradient 0 at the kinks.
inline LossValue bounds_loss(const SiteSet& sites) {
  LossValue out{0.0, SiteGrad(sites.size(), Point{0.0, 0.0, 0.0})};
  for (std::size_t k = 0; k < sites.size(); ++k) {
    for (int d = 0; d < sites.dim(); ++d) {
      const double x = sites.point(k)[d];
      out.value += soft_bound(x);
      if (x < 0.0) out.grad[k][d] = -1.0;
      if (x > 1.0) out.grad[k][d] = 1.0;
    }
  }
  return out;
}

/// Pulls inside-labeled sites toward the occupied set and outside-labeled
/// sites toward its complement.
inline LossValue sdf_loss(const SiteSet& sites, const DistanceFieldPair& fields) {
  if (fields.grid.dim() != sites.dim()) {
    throw Error(ErrorKind::kDimMismatch, "field and sites differ in dimension");
  }
  LossValue out{0.0, SiteGrad(sites.size(), Point{0.0, 0.0, 0.0})};
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const Point& p = sites.point(k);
    const std::vector<double>& field = sites.label(k) ? fields.phi_plus : fields.phi_minus;
    out.value += field[fields.grid.cell_of(p)];
    out.grad[k] = fields.gradient(field, p);
  }
  return out;
}

/// Centroidal regularizer: squared norm of the umbrella Laplacian applied to
/// the boundary-augmented sites, summed over the movable rows. Connectivity is
/// treated as locally constant in the gradient.
inline LossValue cvt_loss(const SiteSet& sites) {
  if (sites.dim() != 2) {
    throw Error(ErrorKind::kDimMismatch, "centroidal loss is 2D only");
  }
  const AugmentedSites aug = boundary_augment(sites);
  const std::vector<Point> pts = jitter_duplicates(aug.points);
  const Triangulation tri = triangulate(pts);
  const GraphLaplacian lap = laplacian(tri, aug.fixed_mask);
  const std::vector<Point> lp = lap.apply(pts);

  LossValue out{0.0, SiteGrad(sites.size(), Point{0.0, 0.0, 0.0})};
  for (std::size_t i = 0; i < lap.size; ++i) {
    if (lap.fixed_mask[i]) continue;
    out.value += lp[i][0] * lp[i][0] + lp[i][1] * lp[i][1];
    // d/dp_j of ||(Lp)_i||^2 = 2 L_ij (Lp)_i
    for (int d = 0; d < 2; ++d) out.grad[i][d] += 2.0 * lp[i][d];
    const double w = lap.weight(i);
    for (std::uint32_t j : lap.neighbors[i]) {
      if (lap.fixed_mask[j]) continue;
      for (int d = 0; d < 2; ++d) out.grad[j][d] -= 2.0 * w * lp[i][d];
    }
  }
  return out;
}

/// Weighted sum of all four terms. Terms with zero weight are not evaluated;
/// the centroidal term is skipped in 3D. `fields` may be null when w_sdf = 0.
template <OccupancyOracle Oracle>
LossReport total_loss(const Oracle& oracle, const SiteSet& sites, Temperature temp,
                      std::span<const Point> samples, const DistanceFieldPair* fields,
                      const LossWeights& weights,
                      Residual residual = Residual::kSquared) {
  weights.validate();
  LossReport report;
  report.grad_sites.assign(sites.size(), Point{0.0, 0.0, 0.0});
  auto accumulate = [&](const LossValue& term, double w) {
    for (std::size_t k = 0; k < sites.size(); ++k) {
      for (int d = 0; d < 3; ++d) report.grad_sites[k][d] += w * term.grad[k][d];
    }
  };
  const LossValue rec = rec_loss(oracle, sites, temp, samples, residual);
  report.rec = rec.value;
  accumulate(rec, weights.rec);
  if (weights.bound > 0.0) {
    const LossValue b = bounds_loss(sites);
    report.bound = b.value;
    accumulate(b, weights.bound);
  }
  if (weights.sdf > 0.0) {
    if (fields == nullptr) {
      throw Error(ErrorKind::kInvalidArgument, "sdf weight set but no distance fields");
    }
    const LossValue s = sdf_loss(sites, *fields);
    report.sdf = s.value;
    accumulate(s, weights.sdf);
  }
  if (weights.cvt > 0.0 && sites.dim() == 2) {
    const LossValue c = cvt_loss(sites);
    report.cvt = c.value;
    accumulate(c, weights.cvt);
  }
  report.total = weights.rec * report.rec + weights.bound * report.bound +
                 weights.sdf * report.sdf + weights.cvt * report.cvt;
  return report;
}

}  // namespace voronet

#endif  // VORONET_LOSSES_HPP
