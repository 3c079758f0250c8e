#ifndef VORONET_GRADCHECK_HPP
#define VORONET_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "voronet/common.hpp"
#include "voronet/delaunay.hpp"
#include "voronet/fields.hpp"
#include "voronet/losses.hpp"
#include "voronet/nn.hpp"
#include "voronet/voronoi.hpp"

namespace voronet::gradcheck {

struct Result {
  std::string name;
  std::size_t configs = 0;
  std::size_t skipped = 0;
  double max_rel_err = 0.0;
  double tol = 0.0;
  std::size_t min_configs = 100;

  bool pass() const { return configs >= min_configs && max_rel_err < tol; }
};

/// max |a - n| / max(|a|, |n|) over all coordinates, norms taken as max-abs.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, scale = 1e-300;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

inline std::vector<double> flatten(const SiteGrad& g, int dim) {
  std::vector<double> out;
  out.reserve(g.size() * static_cast<std::size_t>(dim));
  for (const Point& p : g) {
    for (int d = 0; d < dim; ++d) out.push_back(p[d]);
  }
  return out;
}

/// Central differences of f over every site coordinate.
inline std::vector<double> numeric_site_grad(const SiteSet& sites, double h,
                                             const std::function<double(const SiteSet&)>& f) {
  std::vector<double> out;
  SiteSet probe = sites;
  for (std::size_t k = 0; k < sites.size(); ++k) {
    for (int d = 0; d < sites.dim(); ++d) {
      Point p = sites.point(k);
      p[d] += h;
      probe.set_point(k, p);
      const double fp = f(probe);
      p[d] -= 2.0 * h;
      probe.set_point(k, p);
      const double fm = f(probe);
      probe.set_point(k, sites.point(k));
      out.push_back((fp - fm) / (2.0 * h));
    }
  }
  return out;
}

inline SiteSet random_sites(Rng& rng, std::size_t k, int dim, double lo = 0.05,
                            double hi = 0.95) {
  std::vector<Point> pts(k, Point{0.0, 0.0, 0.0});
  for (Point& p : pts) {
    for (int d = 0; d < dim; ++d) p[d] = rng.uniform(lo, hi);
  }
  std::vector<std::uint8_t> labels(k, 0);
  for (std::size_t i = 0; i < k / 2; ++i) labels[i] = 1;
  for (std::size_t i = k; i > 1; --i) std::swap(labels[i - 1], labels[rng.index(i)]);
  return SiteSet(dim, std::move(pts), std::move(labels));
}

inline Point random_point(Rng& rng, int dim) {
  Point x{0.0, 0.0, 0.0};
  for (int d = 0; d < dim; ++d) x[d] = rng.uniform();
  return x;
}

inline Result check_soft_voronoi(std::uint64_t seed, std::size_t configs = 100) {
  Result r{"soft_voronoi", 0, 0, 0.0, 1e-5};
  Rng rng(seed);
  while (r.configs < configs) {
    const int dim = rng.uniform() < 0.5 ? 2 : 3;
    const std::size_t k = 2 + 2 * rng.index(4);
    const SiteSet sites = random_sites(rng, k, dim);
    const Point x = random_point(rng, dim);
    const Temperature temp(rng.uniform(5.0, 50.0));
    const double v = soft_voronoi(x, sites, temp);
    if (v < 1e-6 || v > 1.0 - 1e-6) {
      ++r.skipped;  // saturated: the gradient is below FD resolution
      continue;
    }
    const std::vector<double> analytic = flatten(grad_soft_voronoi(x, sites, temp), dim);
    const std::vector<double> numeric = numeric_site_grad(
        sites, 1e-6, [&](const SiteSet& s) { return soft_voronoi(x, s, temp); });
    r.max_rel_err = std::max(r.max_rel_err, relative_error(analytic, numeric));
    ++r.configs;
  }
  return r;
}

inline Result check_rec_loss(std::uint64_t seed, std::size_t configs = 100) {
  Result r{"rec_loss(beta=50)", 0, 0, 0.0, 1e-4};
  Rng rng(seed);
  const Temperature temp(50.0);
  while (r.configs < configs) {
    const int dim = rng.uniform() < 0.5 ? 2 : 3;
    const AnalyticShape shape =
        AnalyticShape::ball(dim, {0.5, 0.5, 0.5}, rng.uniform(0.15, 0.35));
    const SiteSet sites = random_sites(rng, 2 + 2 * rng.index(4), dim);
    std::vector<Point> samples(64);
    for (Point& x : samples) x = random_point(rng, dim);
    const Residual residual = rng.uniform() < 0.5 ? Residual::kSquared : Residual::kAbsolute;
    auto f = [&](const SiteSet& s) { return rec_loss(shape, s, temp, samples, residual).value; };
    const std::vector<double> analytic =
        flatten(rec_loss(shape, sites, temp, samples, residual).grad, dim);
    const std::vector<double> numeric = numeric_site_grad(sites, 1e-6, f);
    r.max_rel_err = std::max(r.max_rel_err, relative_error(analytic, numeric));
    ++r.configs;
  }
  return r;
}

inline Result check_bounds_loss(std::uint64_t seed, std::size_t configs = 100) {
  Result r{"bounds_loss", 0, 0, 0.0, 1e-5};
  Rng rng(seed);
  while (r.configs < configs) {
    const int dim = rng.uniform() < 0.5 ? 2 : 3;
    const SiteSet sites = random_sites(rng, 2 + 2 * rng.index(4), dim, -0.4, 1.4);
    bool near_kink = false;
    for (const Point& p : sites.points()) {
      for (int d = 0; d < dim; ++d) {
        near_kink |= std::abs(p[d]) < 1e-3 || std::abs(p[d] - 1.0) < 1e-3;
      }
    }
    if (near_kink) {
      ++r.skipped;
      continue;
    }
    const std::vector<double> analytic = flatten(bounds_loss(sites).grad, dim);
    const std::vector<double> numeric =
        numeric_site_grad(sites, 1e-6, [](const SiteSet& s) { return bounds_loss(s).value; });
    // An all-inside configuration has a zero gradient; compare absolutely.
    const bool zero = std::all_of(analytic.begin(), analytic.end(), [](double g) { return g == 0.0; });
    const double err = zero ? *std::max_element(numeric.begin(), numeric.end(),
                                                [](double a, double b) {
                                                  return std::abs(a) < std::abs(b);
                                                })
                            : relative_error(analytic, numeric);
    r.max_rel_err = std::max(r.max_rel_err, std::abs(err));
    ++r.configs;
  }
  return r;
}

/// The distance term is piecewise constant on grid cells and its gradient is
/// the grid's central difference, so the matching numeric derivative uses a
/// step of one cell width from interior cell centers.
inline Result check_sdf_loss(std::uint64_t seed, std::size_t configs = 100) {
  Result r{"sdf_loss(cell-step)", 0, 0, 0.0, 1e-5};
  Rng rng(seed);
  while (r.configs < configs) {
    const int dim = rng.uniform() < 0.5 ? 2 : 3;
    const std::size_t res = dim == 2 ? 16 + rng.index(17) : 8 + rng.index(9);
    GridOccupancy grid(dim, {res, res, dim == 3 ? res : 1});
    for (std::size_t i = 0; i < grid.size(); ++i) grid.values()[i] = rng.uniform() < 0.4;
    if (grid.count() == 0 || grid.count() == grid.size()) {
      ++r.skipped;
      continue;
    }
    const DistanceFieldPair fields = edt(grid);
    const std::size_t k = 2 + 2 * rng.index(4);
    std::vector<Point> pts(k, Point{0.0, 0.0, 0.0});
    for (Point& p : pts) {
      for (int d = 0; d < dim; ++d) {
        p[d] = (static_cast<double>(1 + rng.index(res - 2)) + 0.5) / static_cast<double>(res);
      }
    }
    const SiteSet sites(dim, std::move(pts));
    const double h = 1.0 / static_cast<double>(res);
    const std::vector<double> analytic = flatten(sdf_loss(sites, fields).grad, dim);
    const std::vector<double> numeric = numeric_site_grad(
        sites, h, [&](const SiteSet& s) { return sdf_loss(s, fields).value; });
    double err = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      err = std::max(err, std::abs(analytic[i] - numeric[i]) /
                              std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1.0}));
    }
    r.max_rel_err = std::max(r.max_rel_err, err);
    ++r.configs;
  }
  return r;
}

namespace detail {

inline std::vector<std::array<std::uint32_t, 3>> cvt_connectivity(const SiteSet& sites) {
  const AugmentedSites aug = boundary_augment(sites);
  return triangulate(jitter_duplicates(aug.points)).triangles;
}

}  // namespace detail

/// Configurations where a probe step changes the triangulation are skipped
/// (flip guard): the loss is not differentiable across a flip.
inline Result check_cvt_loss(std::uint64_t seed, std::size_t configs = 100) {
  Result r{"cvt_loss(flip guard)", 0, 0, 0.0, 1e-3};
  Rng rng(seed);
  const double h = 1e-7;
  while (r.configs < configs) {
    const SiteSet sites = random_sites(rng, 4 + 2 * rng.index(5), 2, 0.08, 0.92);
    const auto base = detail::cvt_connectivity(sites);
    bool flipped = false;
    SiteSet probe = sites;
    for (std::size_t k = 0; k < sites.size() && !flipped; ++k) {
      for (int d = 0; d < 2 && !flipped; ++d) {
        for (double s : {h, -h}) {
          Point p = sites.point(k);
          p[d] += s;
          probe.set_point(k, p);
          flipped |= detail::cvt_connectivity(probe) != base;
          probe.set_point(k, sites.point(k));
        }
      }
    }
    if (flipped) {
      ++r.skipped;
      continue;
    }
    const std::vector<double> analytic = flatten(cvt_loss(sites).grad, 2);
    const std::vector<double> numeric =
        numeric_site_grad(sites, h, [](const SiteSet& s) { return cvt_loss(s).value; });
    r.max_rel_err = std::max(r.max_rel_err, relative_error(analytic, numeric));
    ++r.configs;
  }
  return r;
}

/// Full Jacobian of small nets: every output against every parameter and
/// every input. Inputs placing a pre-activation within 1e-4 of the kink are
/// skipped.
inline Result check_dense_net(std::uint64_t seed, std::size_t configs = 100) {
  Result r{"dense_net(full jacobian)", 0, 0, 0.0, 1e-6};
  Rng rng(seed);
  const double h = 1e-6;
  while (r.configs < configs) {
    std::vector<std::size_t> sizes{1 + rng.index(3)};
    const std::size_t depth = 1 + rng.index(3);
    for (std::size_t l = 0; l < depth; ++l) sizes.push_back(1 + rng.index(3));
    if (param_count(sizes) > 20) continue;
    DenseNet net = DenseNet::he_uniform(sizes, rng);
    for (double& b : net.params()) b += rng.uniform(-0.1, 0.1);
    std::vector<double> input(sizes.front());
    for (double& x : input) x = rng.uniform(-1.0, 1.0);
    DenseNet::Cache cache;
    const std::vector<double> out = net.forward(input, &cache);
    bool near_kink = false;
    for (std::size_t l = 0; l + 1 < cache.pre.size(); ++l) {
      for (double z : cache.pre[l]) near_kink |= std::abs(z) < 1e-4;
    }
    if (near_kink) {
      ++r.skipped;
      continue;
    }
    double err = 0.0;
    for (std::size_t o = 0; o < out.size(); ++o) {
      std::vector<double> seed_grad(out.size(), 0.0);
      seed_grad[o] = 1.0;
      std::vector<double> pg(net.param_count(), 0.0), ig(input.size(), 0.0);
      net.backward(cache, seed_grad, pg, ig);

      std::vector<double> npg(net.param_count()), nig(input.size());
      DenseNet probe = net;
      for (std::size_t i = 0; i < pg.size(); ++i) {
        const double keep = probe.params()[i];
        probe.params()[i] = keep + h;
        const double fp = probe.forward(input)[o];
        probe.params()[i] = keep - h;
        const double fm = probe.forward(input)[o];
        probe.params()[i] = keep;
        npg[i] = (fp - fm) / (2.0 * h);
      }
      for (std::size_t i = 0; i < input.size(); ++i) {
        std::vector<double> xi = input;
        xi[i] += h;
        const double fp = net.forward(xi)[o];
        xi[i] -= 2.0 * h;
        const double fm = net.forward(xi)[o];
        nig[i] = (fp - fm) / (2.0 * h);
      }
      err = std::max({err, relative_error(pg, npg), relative_error(ig, nig)});
    }
    r.max_rel_err = std::max(r.max_rel_err, err);
    ++r.configs;
  }
  return r;
}

/// Module names: voronoi, losses, nn, all.
inline std::vector<Result> run(const std::string& module, std::uint64_t seed) {
  std::vector<Result> out;
  const bool all = module == "all";
  if (!all && module != "voronoi" && module != "losses" && module != "nn") {
    throw Error(ErrorKind::kInvalidArgument, "unknown gradcheck module: " + module);
  }
  Rng streams(seed);
  const std::uint64_t s_vor = streams.fork_seed(), s_rec = streams.fork_seed(),
                      s_bnd = streams.fork_seed(), s_sdf = streams.fork_seed(),
                      s_cvt = streams.fork_seed(), s_nn = streams.fork_seed();
  if (all || module == "voronoi") out.push_back(check_soft_voronoi(s_vor));
  if (all || module == "losses") {
    out.push_back(check_rec_loss(s_rec));
    out.push_back(check_bounds_loss(s_bnd));
    out.push_back(check_sdf_loss(s_sdf));
    out.push_back(check_cvt_loss(s_cvt));
  }
  if (all || module == "nn") out.push_back(check_dense_net(s_nn));
  return out;
}

}  // namespace voronet::gradcheck

#endif  // VORONET_GRADCHECK_HPP
