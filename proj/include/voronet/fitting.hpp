#ifndef VORONET_FITTING_HPP
#define VORONET_FITTING_HPP

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "voronet/common.hpp"
#include "voronet/extract.hpp"
#include "voronet/fields.hpp"
#include "voronet/losses.hpp"
#include "voronet/nn.hpp"
#include "voronet/voronoi.hpp"

namespace voronet {

// ---------------------------------------------------------------------------
// key=value configuration text

using KeyValues = std::map<std::string, std::string>;

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string to_kv_text(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

/// Parses `key=value` lines; blank lines and lines starting with '#' are
/// ignored.
inline KeyValues parse_kv_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument, "config line without '=': " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

namespace detail {

inline const std::string& kv_get(const KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorKind::kInvalidArgument, "missing config key " + key);
  return it->second;
}

inline double kv_double(const KeyValues& kv, const std::string& key) {
  return std::stod(kv_get(kv, key));
}

inline std::uint64_t kv_uint(const KeyValues& kv, const std::string& key) {
  return std::stoull(kv_get(kv, key));
}

inline Residual parse_residual(const std::string& s) {
  if (s == "squared") return Residual::kSquared;
  if (s == "absolute") return Residual::kAbsolute;
  throw Error(ErrorKind::kInvalidArgument, "unknown residual: " + s);
}

inline std::string to_string(Residual r) {
  return r == Residual::kSquared ? "squared" : "absolute";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// run logs

struct RunRecord {
  std::size_t step = 0;
  double total = 0.0;
  double rec = 0.0;
  double bound = 0.0;
  double sdf = 0.0;
  double cvt = 0.0;
  std::optional<double> iou;
  std::optional<double> pix_acc;
  std::optional<double> hausdorff;
  double seconds = 0.0;
};

struct RunLog {
  std::vector<RunRecord> records;

  /// Wall-clock seconds are omitted unless requested so that logs of
  /// identical runs are byte-identical.
  std::string to_csv(bool wall_clock = false) const {
    std::string out =
        "step,loss_total,loss_rec,loss_bound,loss_sdf,loss_cvt,iou,pix_acc,hausdorff,seconds\n";
    auto opt = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string();
    };
    for (const RunRecord& r : records) {
      out += std::to_string(r.step) + "," + format_double(r.total) + "," +
             format_double(r.rec) + "," + format_double(r.bound) + "," +
             format_double(r.sdf) + "," + format_double(r.cvt) + "," + opt(r.iou) + "," +
             opt(r.pix_acc) + "," + opt(r.hausdorff) + "," +
             (wall_clock ? format_double(r.seconds) : std::string()) + "\n";
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// direct fitting

struct FitConfig {
  std::size_t k = 32;
  double beta = kDefaultBeta;
  std::size_t iters = 2000;
  double lr = 5e-3;
  std::size_t sample_count = 4096;
  SamplingStrategy strategy = SamplingStrategy::kStratified;
  LossWeights weights;
  Residual residual = Residual::kSquared;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  bool beta_warmup = false;
  /// 0 = automatic: the target's own grid, else 128 (2D) / 64 (3D).
  std::size_t eval_resolution = 0;

  void validate() const {
    if (k < 2 || k % 2 != 0) throw Error(ErrorKind::kInvalidArgument, "K must be even and >= 2");
    if (iters < 1) throw Error(ErrorKind::kInvalidArgument, "iters must be >= 1");
    if (sample_count < 16) throw Error(ErrorKind::kInvalidArgument, "sample_count must be >= 16");
    if (eval_every < 1) throw Error(ErrorKind::kInvalidArgument, "eval_every must be >= 1");
    if (!(lr > 0.0)) throw Error(ErrorKind::kInvalidArgument, "lr must be > 0");
    Temperature check(beta);
    (void)check;
    weights.validate();
  }

  KeyValues to_kv() const {
    return {
        {"k", std::to_string(k)},
        {"beta", format_double(beta)},
        {"iters", std::to_string(iters)},
        {"lr", format_double(lr)},
        {"samples", std::to_string(sample_count)},
        {"strategy", to_string(strategy)},
        {"w_rec", format_double(weights.rec)},
        {"w_bound", format_double(weights.bound)},
        {"w_sdf", format_double(weights.sdf)},
        {"w_cvt", format_double(weights.cvt)},
        {"residual", detail::to_string(residual)},
        {"seed", std::to_string(seed)},
        {"eval_every", std::to_string(eval_every)},
        {"beta_warmup", beta_warmup ? "1" : "0"},
        {"eval_resolution", std::to_string(eval_resolution)},
    };
  }

  static FitConfig from_kv(const KeyValues& kv) {
    FitConfig c;
    c.k = detail::kv_uint(kv, "k");
    c.beta = detail::kv_double(kv, "beta");
    c.iters = detail::kv_uint(kv, "iters");
    c.lr = detail::kv_double(kv, "lr");
    c.sample_count = detail::kv_uint(kv, "samples");
    c.strategy = parse_sampling_strategy(detail::kv_get(kv, "strategy"));
    c.weights.rec = detail::kv_double(kv, "w_rec");
    c.weights.bound = detail::kv_double(kv, "w_bound");
    c.weights.sdf = detail::kv_double(kv, "w_sdf");
    c.weights.cvt = detail::kv_double(kv, "w_cvt");
    c.residual = detail::parse_residual(detail::kv_get(kv, "residual"));
    c.seed = detail::kv_uint(kv, "seed");
    c.eval_every = detail::kv_uint(kv, "eval_every");
    c.beta_warmup = detail::kv_get(kv, "beta_warmup") == "1";
    c.eval_resolution = detail::kv_uint(kv, "eval_resolution");
    return c;
  }

  friend bool operator==(const FitConfig& a, const FitConfig& b) {
    return a.to_kv() == b.to_kv();
  }
};

/// Temperature at `step`: constant, or a linear ramp from 1e2 to `beta` over
/// the first quarter of the run when warm-up is enabled.
inline double scheduled_beta(double beta, bool warmup, std::size_t step, std::size_t iters) {
  if (!warmup) return beta;
  const double start = std::min(100.0, beta);
  const double ramp = std::max(1.0, 0.25 * static_cast<double>(iters));
  const double t = std::min(1.0, static_cast<double>(step) / ramp);
  return start + t * (beta - start);
}

/// K sites i.i.d. uniform in [0.1, 0.9]^D; the first K/2 are labeled 1.
inline SiteSet init_sites(std::size_t k, int dim, std::uint64_t seed) {
  check_dim(dim);
  Rng rng(seed);
  std::vector<Point> pts(k, Point{0.0, 0.0, 0.0});
  for (Point& p : pts) {
    for (int d = 0; d < dim; ++d) p[d] = rng.uniform(0.1, 0.9);
  }
  return SiteSet(dim, std::move(pts));
}

/// Raster of the target used for evaluation.
template <OccupancyOracle Oracle>
GridOccupancy target_raster(const Oracle& oracle, std::size_t resolution) {
  if constexpr (std::is_same_v<Oracle, GridOccupancy>) {
    if (resolution == 0 || resolution == oracle.resolution()[0]) return oracle;
  }
  if (resolution == 0) resolution = oracle.dim() == 3 ? 64 : 128;
  return GridOccupancy::rasterize(oracle, resolution);
}

struct RasterMetrics {
  double iou = 0.0;
  double pix_acc = 0.0;
  std::optional<double> hausdorff;
};

inline RasterMetrics compare_rasters(const GridOccupancy& predicted,
                                     const GridOccupancy& target,
                                     std::span<const Point> target_boundary) {
  RasterMetrics m;
  m.iou = iou(predicted, target);
  m.pix_acc = pixel_accuracy(predicted, target);
  const std::size_t ones = predicted.count();
  if (!target_boundary.empty() && ones != 0 && ones != predicted.size()) {
    const std::vector<Point> pb = boundary_points(predicted);
    m.hausdorff = hausdorff(pb, target_boundary, predicted.dim());
  }
  return m;
}

inline std::vector<Point> boundary_points_or_empty(const GridOccupancy& g) {
  const std::size_t ones = g.count();
  if (ones == 0 || ones == g.size()) return {};
  return boundary_points(g);
}

inline RasterMetrics evaluate_sites(const SiteSet& sites, const GridOccupancy& target) {
  const GridOccupancy pred = rasterize_hard(sites, target.resolution()[0]);
  const std::vector<Point> tb = boundary_points_or_empty(target);
  return compare_rasters(pred, target, tb);
}

struct FitResult {
  SiteSet best;
  SiteSet final_sites;
  double best_iou = -1.0;
  std::size_t best_step = 0;
  RunLog log;
  /// Set when a loss evaluation failed; `best`/`final_sites` then hold the
  /// last good iterate.
  std::optional<std::string> error;
};

/// Adam on site coordinates only, with fresh stratified/uniform samples every
/// step. Evaluates every `eval_every` steps (and after the last update) and
/// keeps the iterate with the best IoU.
template <OccupancyOracle Oracle>
FitResult fit_direct(const Oracle& oracle, FitConfig config) {
  config.validate();
  const int dim = oracle.dim();
  if (dim == 3) config.weights.cvt = 0.0;
  const auto t_start = std::chrono::steady_clock::now();

  const GridOccupancy target = target_raster(oracle, config.eval_resolution);
  const std::vector<Point> target_boundary = boundary_points_or_empty(target);
  std::optional<DistanceFieldPair> fields;
  if (config.weights.sdf > 0.0) fields = edt(target);

  SiteSet sites = init_sites(config.k, dim, config.seed);
  FitResult result{sites, sites, -1.0, 0, {}, std::nullopt};
  Rng sample_rng(config.seed ^ 0x5A3C1E0F2B4D6987ull);
  std::vector<double> coords = sites.flat();
  AdamState adam(coords.size(), AdamHyper{config.lr});
  std::vector<double> grad(coords.size());

  for (std::size_t step = 0; step <= config.iters; ++step) {
    const Temperature temp(scheduled_beta(config.beta, config.beta_warmup, step, config.iters));
    const std::vector<Point> samples =
        sample_points(dim, config.sample_count, config.strategy, sample_rng);
    LossReport report;
    try {
      report = total_loss(oracle, sites, temp, samples, fields ? &*fields : nullptr,
                          config.weights, config.residual);
    } catch (const Error& e) {
      result.error = e.what();
      break;
    }
    const bool eval = step % config.eval_every == 0 || step == config.iters;
    if (eval) {
      const GridOccupancy pred = rasterize_hard(sites, target.resolution()[0]);
      const RasterMetrics m = compare_rasters(pred, target, target_boundary);
      RunRecord r{step, report.total, report.rec, report.bound, report.sdf, report.cvt,
                  m.iou, m.pix_acc, m.hausdorff,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                      .count()};
      result.log.records.push_back(r);
      if (m.iou > result.best_iou) {
        result.best_iou = m.iou;
        result.best = sites;
        result.best_step = step;
      }
    }
    result.final_sites = sites;
    if (step == config.iters) break;
    for (std::size_t k = 0; k < sites.size(); ++k) {
      for (int d = 0; d < dim; ++d) grad[k * dim + d] = report.grad_sites[k][d];
    }
    adam_step(coords, grad, adam);
    try {
      sites.assign_flat(coords);
    } catch (const Error& e) {
      result.error = e.what();
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// implicit MLP baseline

struct MlpFitConfig {
  std::size_t hidden = 64;
  std::size_t iters = 2000;
  double lr = 1e-3;
  std::size_t sample_count = 4096;
  SamplingStrategy strategy = SamplingStrategy::kStratified;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  std::size_t eval_resolution = 0;

  KeyValues to_kv() const {
    return {{"hidden", std::to_string(hidden)},
            {"iters", std::to_string(iters)},
            {"lr", format_double(lr)},
            {"samples", std::to_string(sample_count)},
            {"strategy", to_string(strategy)},
            {"seed", std::to_string(seed)},
            {"eval_every", std::to_string(eval_every)},
            {"eval_resolution", std::to_string(eval_resolution)}};
  }
};

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Occupancy x -> logit network with one hidden layer: D -> hidden -> 1.
inline DenseNet build_implicit_mlp(int dim, std::size_t hidden, Rng& rng) {
  return DenseNet::he_uniform({static_cast<std::size_t>(dim), hidden, 1}, rng);
}

inline GridOccupancy rasterize_mlp(const DenseNet& net, int dim, std::size_t resolution) {
  GridOccupancy g(dim, {resolution, resolution, dim == 3 ? resolution : 1});
  auto values = g.values();
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const Point c = g.cell_center(idx);
    values[idx] = net.forward(std::span(c.data(), static_cast<std::size_t>(dim)))[0] > 0.0;
  }
  return g;
}

struct MlpFitResult {
  DenseNet best;
  double best_iou = -1.0;
  std::size_t best_step = 0;
  RunLog log;
};

/// Fits the implicit baseline with the squared reconstruction residual on
/// sigmoid(logit), Adam, fresh samples each step.
template <OccupancyOracle Oracle>
MlpFitResult fit_implicit_mlp(const Oracle& oracle, const MlpFitConfig& config) {
  const int dim = oracle.dim();
  const auto t_start = std::chrono::steady_clock::now();
  const GridOccupancy target = target_raster(oracle, config.eval_resolution);
  const std::vector<Point> target_boundary = boundary_points_or_empty(target);
  Rng init_rng(config.seed);
  DenseNet net = build_implicit_mlp(dim, config.hidden, init_rng);
  MlpFitResult result{net, -1.0, 0, {}};
  Rng sample_rng(config.seed ^ 0x5A3C1E0F2B4D6987ull);
  AdamState adam(net.param_count(), AdamHyper{config.lr});
  std::vector<double> grad(net.param_count());
  DenseNet::Cache cache;

  for (std::size_t step = 0; step <= config.iters; ++step) {
    const std::vector<Point> samples =
        sample_points(dim, config.sample_count, config.strategy, sample_rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    std::vector<double> terms(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Point& x = samples[i];
      const double o = occupancy_at(oracle, x);
      const double logit =
          net.forward(std::span(x.data(), static_cast<std::size_t>(dim)), &cache)[0];
      const double v = sigmoid(logit);
      const double r = v - o;
      terms[i] = r * r;
      const double g = 2.0 * r * v * (1.0 - v) * inv_n;
      net.backward(cache, std::span(&g, 1), grad);
    }
    const double loss = pairwise_sum(terms) * inv_n;
    if (step % config.eval_every == 0 || step == config.iters) {
      const GridOccupancy pred = rasterize_mlp(net, dim, target.resolution()[0]);
      const RasterMetrics m = compare_rasters(pred, target, target_boundary);
      RunRecord r{step, loss, loss, 0.0, 0.0, 0.0, m.iou, m.pix_acc, m.hausdorff,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                      .count()};
      result.log.records.push_back(r);
      if (m.iou > result.best_iou) {
        result.best_iou = m.iou;
        result.best = net;
        result.best_step = step;
      }
    }
    if (step == config.iters) break;
    adam_step(net.params(), grad, adam);
  }
  return result;
}

// ---------------------------------------------------------------------------
// autoencoder

struct AutoencoderConfig {
  std::size_t k = 32;
  std::size_t latent = 16;
  std::size_t width = 256;
  std::size_t epochs = 20;
  std::size_t batch = 8;
  double lr = 1e-4;
  double beta = kDefaultBeta;
  bool beta_warmup = false;
  std::size_t sample_count = 1024;
  SamplingStrategy strategy = SamplingStrategy::kStratified;
  LossWeights weights;
  Residual residual = Residual::kSquared;
  std::uint64_t seed = 0;
  /// Evaluate on the test split every this many epochs (and after the last).
  std::size_t eval_every = 1;

  void validate() const {
    if (k < 4 || k % 2 != 0) throw Error(ErrorKind::kInvalidArgument, "K must be even and >= 4");
    if (latent < 1 || width < 1 || batch < 1 || eval_every < 1) {
      throw Error(ErrorKind::kInvalidArgument, "latent/width/batch/eval_every must be >= 1");
    }
    if (sample_count < 16) throw Error(ErrorKind::kInvalidArgument, "sample_count must be >= 16");
    Temperature check(beta);
    (void)check;
    weights.validate();
  }

  KeyValues to_kv() const {
    return {{"k", std::to_string(k)},
            {"latent", std::to_string(latent)},
            {"width", std::to_string(width)},
            {"epochs", std::to_string(epochs)},
            {"batch", std::to_string(batch)},
            {"lr", format_double(lr)},
            {"beta", format_double(beta)},
            {"beta_warmup", beta_warmup ? "1" : "0"},
            {"samples", std::to_string(sample_count)},
            {"strategy", to_string(strategy)},
            {"w_rec", format_double(weights.rec)},
            {"w_bound", format_double(weights.bound)},
            {"w_sdf", format_double(weights.sdf)},
            {"w_cvt", format_double(weights.cvt)},
            {"residual", detail::to_string(residual)},
            {"seed", std::to_string(seed)},
            {"eval_every", std::to_string(eval_every)}};
  }

  static AutoencoderConfig from_kv(const KeyValues& kv) {
    AutoencoderConfig c;
    c.k = detail::kv_uint(kv, "k");
    c.latent = detail::kv_uint(kv, "latent");
    c.width = detail::kv_uint(kv, "width");
    c.epochs = detail::kv_uint(kv, "epochs");
    c.batch = detail::kv_uint(kv, "batch");
    c.lr = detail::kv_double(kv, "lr");
    c.beta = detail::kv_double(kv, "beta");
    c.beta_warmup = detail::kv_get(kv, "beta_warmup") == "1";
    c.sample_count = detail::kv_uint(kv, "samples");
    c.strategy = parse_sampling_strategy(detail::kv_get(kv, "strategy"));
    c.weights.rec = detail::kv_double(kv, "w_rec");
    c.weights.bound = detail::kv_double(kv, "w_bound");
    c.weights.sdf = detail::kv_double(kv, "w_sdf");
    c.weights.cvt = detail::kv_double(kv, "w_cvt");
    c.residual = detail::parse_residual(detail::kv_get(kv, "residual"));
    c.seed = detail::kv_uint(kv, "seed");
    c.eval_every = detail::kv_uint(kv, "eval_every");
    return c;
  }
};

/// Encoder input: the occupancy values of a grid in storage order.
inline std::vector<double> grid_input(const GridOccupancy& g) {
  return std::vector<double>(g.values().begin(), g.values().end());
}

/// Decoder output -> SiteSet with the fixed half-inside labeling.
inline SiteSet sites_from_output(std::span<const double> out, std::size_t k, int dim) {
  if (out.size() != k * static_cast<std::size_t>(dim)) {
    throw Error(ErrorKind::kShapeMismatch, "decoder output width != K*D");
  }
  std::vector<Point> pts(k, Point{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < k; ++i) {
    for (int d = 0; d < dim; ++d) pts[i][d] = out[i * dim + d];
  }
  return SiteSet(dim, std::move(pts));
}

inline std::vector<double> encode(const DenseNet& encoder, const GridOccupancy& image) {
  return encoder.forward(grid_input(image));
}

inline SiteSet decode(const DenseNet& decoder, std::span<const double> z, int dim = 2) {
  const std::vector<double> out = decoder.forward(z);
  return sites_from_output(out, out.size() / dim, dim);
}

/// Scales the decoder's last layer down and sets its bias to a seeded
/// init_sites() layout, so an untrained decoder emits spread-out sites in the
/// domain instead of a cluster around the origin.
inline void init_decoder_head(DenseNet& decoder, std::size_t k, int dim, std::uint64_t seed,
                              double weight_scale = 0.01) {
  const std::size_t last = decoder.num_layers() - 1;
  for (double& w : decoder.weights(last)) w *= weight_scale;
  const std::vector<double> layout = init_sites(k, dim, seed).flat();
  auto b = decoder.bias(last);
  if (b.size() != layout.size()) throw Error(ErrorKind::kShapeMismatch, "decoder head width");
  std::copy(layout.begin(), layout.end(), b.begin());
}

/// Mean over images of the per-pixel squared error between the hard raster of
/// the decoded sites and the target.
inline double reconstruction_mse(const DenseNet& encoder, const DenseNet& decoder,
                                 std::span<const GridOccupancy> images) {
  if (images.empty()) throw Error(ErrorKind::kEmptySet, "no images");
  std::vector<double> errs;
  errs.reserve(images.size());
  for (const GridOccupancy& img : images) {
    const SiteSet sites = decode(decoder, encode(encoder, img), img.dim());
    const GridOccupancy pred = rasterize_hard(sites, img.resolution()[0]);
    errs.push_back(1.0 - pixel_accuracy(pred, img));
  }
  return pairwise_sum(errs) / static_cast<double>(errs.size());
}

/// Per-pixel squared error of predicting every test image by the mean
/// training image.
inline double mean_image_mse(std::span<const GridOccupancy> train,
                             std::span<const GridOccupancy> test) {
  if (train.empty() || test.empty()) throw Error(ErrorKind::kEmptySet, "no images");
  const std::size_t n = train[0].size();
  std::vector<double> mean(n, 0.0);
  for (const GridOccupancy& g : train) {
    for (std::size_t i = 0; i < n; ++i) mean[i] += g.values()[i];
  }
  for (double& m : mean) m /= static_cast<double>(train.size());
  std::vector<double> errs;
  for (const GridOccupancy& g : test) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = mean[i] - g.values()[i];
      s += r * r;
    }
    errs.push_back(s / static_cast<double>(n));
  }
  return pairwise_sum(errs) / static_cast<double>(errs.size());
}

/// Minibatch training of encoder + decoder through the soft Voronoi losses.
/// Test-split metrics (mean IoU, mean pixel accuracy) are logged per
/// evaluation; loss columns hold the mean over the preceding training steps.
inline RunLog train_autoencoder(std::span<const GridOccupancy> train,
                                std::span<const GridOccupancy> test,
                                const AutoencoderConfig& config, DenseNet& encoder,
                                DenseNet& decoder) {
  config.validate();
  if (train.empty()) throw Error(ErrorKind::kEmptySet, "empty training set");
  const auto res = train[0].resolution();
  for (const GridOccupancy& g : train) {
    if (g.resolution() != res || g.dim() != 2) {
      throw Error(ErrorKind::kShapeMismatch, "training grids must share a 2D resolution");
    }
  }
  if (encoder.input_size() != train[0].size() || encoder.output_size() != decoder.input_size() ||
      decoder.output_size() != config.k * 2) {
    throw Error(ErrorKind::kShapeMismatch, "encoder/decoder shapes do not match the config");
  }
  const auto t_start = std::chrono::steady_clock::now();

  std::vector<std::optional<DistanceFieldPair>> fields(train.size());
  if (config.weights.sdf > 0.0) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      const std::size_t ones = train[i].count();
      if (ones != 0 && ones != train[i].size()) fields[i] = edt(train[i]);
    }
  }

  Rng rng(config.seed ^ 0x2545F4914F6CDD1Dull);
  AdamState adam_enc(encoder.param_count(), AdamHyper{config.lr});
  AdamState adam_dec(decoder.param_count(), AdamHyper{config.lr});
  std::vector<double> g_enc(encoder.param_count()), g_dec(decoder.param_count());
  std::vector<double> out_grad(decoder.output_size()), z_grad(decoder.input_size());
  DenseNet::Cache c_enc, c_dec;
  std::vector<std::size_t> order(train.size());
  const std::size_t steps_per_epoch = (train.size() + config.batch - 1) / config.batch;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  std::size_t step = 0;
  RunLog log;
  RunRecord acc;
  std::size_t acc_n = 0;

  auto evaluate = [&](std::size_t at_step) {
    RunRecord r = acc;
    if (acc_n > 0) {
      const double inv = 1.0 / static_cast<double>(acc_n);
      r.total *= inv;
      r.rec *= inv;
      r.bound *= inv;
      r.sdf *= inv;
      r.cvt *= inv;
    }
    r.step = at_step;
    if (!test.empty()) {
      std::vector<double> ious, accs;
      for (const GridOccupancy& img : test) {
        const SiteSet sites = decode(decoder, encode(encoder, img));
        const GridOccupancy pred = rasterize_hard(sites, img.resolution()[0]);
        ious.push_back(iou(pred, img));
        accs.push_back(pixel_accuracy(pred, img));
      }
      r.iou = pairwise_sum(ious) / static_cast<double>(ious.size());
      r.pix_acc = pairwise_sum(accs) / static_cast<double>(accs.size());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    log.records.push_back(r);
    acc = RunRecord{};
    acc_n = 0;
  };

  evaluate(0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch) {
      const std::size_t b1 = std::min(order.size(), b0 + config.batch);
      std::fill(g_enc.begin(), g_enc.end(), 0.0);
      std::fill(g_dec.begin(), g_dec.end(), 0.0);
      const Temperature temp(scheduled_beta(config.beta, config.beta_warmup, step, total_steps));
      const double scale = 1.0 / static_cast<double>(b1 - b0);
      for (std::size_t bi = b0; bi < b1; ++bi) {
        const std::size_t n = order[bi];
        const GridOccupancy& img = train[n];
        const std::vector<double> z = encoder.forward(grid_input(img), &c_enc);
        const std::vector<double> out = decoder.forward(z, &c_dec);
        const SiteSet sites = sites_from_output(out, config.k, 2);
        const std::vector<Point> samples =
            sample_points(2, config.sample_count, config.strategy, rng);
        LossWeights w = config.weights;
        if (!fields[n]) w.sdf = 0.0;
        const LossReport rep = total_loss(img, sites, temp, samples,
                                          fields[n] ? &*fields[n] : nullptr, w, config.residual);
        acc.total += rep.total;
        acc.rec += rep.rec;
        acc.bound += rep.bound;
        acc.sdf += rep.sdf;
        acc.cvt += rep.cvt;
        ++acc_n;
        for (std::size_t k = 0; k < config.k; ++k) {
          out_grad[2 * k] = scale * rep.grad_sites[k][0];
          out_grad[2 * k + 1] = scale * rep.grad_sites[k][1];
        }
        decoder.backward(c_dec, out_grad, g_dec, z_grad);
        encoder.backward(c_enc, z_grad, g_enc);
      }
      adam_step(encoder.params(), g_enc, adam_enc);
      adam_step(decoder.params(), g_dec, adam_dec);
      ++step;
    }
    if ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs) evaluate(step);
  }
  return log;
}

/// Decodes the linear path z_t = (1 - t) z_a + t z_b at `steps` evenly spaced
/// t in [0, 1].
inline std::vector<SiteSet> interpolate_latent(const DenseNet& encoder, const DenseNet& decoder,
                                               const GridOccupancy& image_a,
                                               const GridOccupancy& image_b,
                                               std::size_t steps) {
  if (steps < 2) throw Error(ErrorKind::kInvalidArgument, "steps must be >= 2");
  const std::vector<double> za = encode(encoder, image_a);
  const std::vector<double> zb = encode(encoder, image_b);
  std::vector<SiteSet> out;
  out.reserve(steps);
  std::vector<double> z(za.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = (1.0 - t) * za[j] + t * zb[j];
    out.push_back(decode(decoder, z, image_a.dim()));
  }
  return out;
}

/// Projects vectors onto their top two principal directions (power iteration
/// with deflation on the covariance).
inline std::vector<std::array<double, 2>> pca_2d(std::span<const std::vector<double>> rows) {
  if (rows.empty()) return {};
  const std::size_t d = rows[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  std::vector<double> cov(d * d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += (r[a] - mean[a]) * (r[b] - mean[b]);
    }
  }
  std::array<std::vector<double>, 2> axes;
  for (int c = 0; c < 2; ++c) {
    std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    for (std::size_t j = 0; j < d; ++j) v[j] += 1e-3 * static_cast<double>(j);
    for (int it = 0; it < 500; ++it) {
      std::vector<double> w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) w[a] += cov[a * d + b] * v[b];
      }
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0.0) break;
      for (std::size_t j = 0; j < d; ++j) v[j] = w[j] / norm;
    }
    double lambda = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) lambda += v[a] * cov[a * d + b] * v[b];
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] -= lambda * v[a] * v[b];
    }
    axes[c] = v;
  }
  std::vector<std::array<double, 2>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    std::array<double, 2> p{0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < d; ++j) p[c] += (r[j] - mean[j]) * axes[c][j];
    }
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// non-uniqueness probe

struct Lemma1Result {
  bool identical = false;
  std::array<std::size_t, 3> triangle{0, 0, 0};
  Point q{0.0, 0.0, 0.0};
  std::size_t differing_cells = 0;
};

namespace detail {

/// True when every sample of a barycentric lattice over the triangle is
/// hard-occupied.
inline bool triangle_occupied(const SiteSet& sites, const Point& a, const Point& b,
                              const Point& c, int subdivisions = 32) {
  for (int i = 0; i <= subdivisions; ++i) {
    for (int j = 0; i + j <= subdivisions; ++j) {
      const double u = static_cast<double>(i) / subdivisions;
      const double v = static_cast<double>(j) / subdivisions;
      const double w = 1.0 - u - v;
      const Point x{u * a[0] + v * b[0] + w * c[0], u * a[1] + v * b[1] + w * c[1], 0.0};
      if (hard_voronoi(x, sites).occupancy != 1) return false;
    }
  }
  return true;
}

inline bool strictly_inside(const Point& q, const Point& a, const Point& b, const Point& c) {
  const int o = predicates::orient2d(a, b, c);
  if (o == 0) return false;
  return predicates::orient2d(a, b, q) == o && predicates::orient2d(b, c, q) == o &&
         predicates::orient2d(c, a, q) == o;
}

}  // namespace detail

/// Inserts q (label 1) into the site set and compares hard rasters of both
/// configurations. The triangle must be inside-labeled and hard-occupied, and
/// q strictly inside it.
inline Lemma1Result lemma1_check(const SiteSet& sites, std::array<std::size_t, 3> triangle,
                                 const Point& q, std::size_t resolution) {
  if (sites.dim() != 2) throw Error(ErrorKind::kDimMismatch, "probe is 2D only");
  const Point& a = sites.point(triangle[0]);
  const Point& b = sites.point(triangle[1]);
  const Point& c = sites.point(triangle[2]);
  for (std::size_t v : triangle) {
    if (v >= sites.size() || sites.label(v) != 1) {
      throw Error(ErrorKind::kNoEligibleTriangle, "triangle vertex not inside-labeled");
    }
  }
  if (!detail::triangle_occupied(sites, a, b, c)) {
    throw Error(ErrorKind::kNoEligibleTriangle, "triangle not contained in the occupied region");
  }
  if (!detail::strictly_inside(q, a, b, c)) {
    throw Error(ErrorKind::kNoEligibleTriangle, "q is not strictly inside the triangle");
  }
  std::vector<Point> pts(sites.points().begin(), sites.points().end());
  std::vector<std::uint8_t> labels(sites.labels().begin(), sites.labels().end());
  pts.push_back(q);
  labels.push_back(1);
  const GridOccupancy before = rasterize_hard(sites, resolution);
  const GridOccupancy after = rasterize_labeled(pts, labels, 2, resolution);
  Lemma1Result r;
  r.triangle = triangle;
  r.q = q;
  for (std::size_t i = 0; i < before.size(); ++i) {
    r.differing_cells += before.values()[i] != after.values()[i];
  }
  r.identical = r.differing_cells == 0;
  return r;
}

/// Finds the first eligible inside-labeled triangle (lexicographic index
/// order), draws q uniformly from its interior and runs lemma1_check.
inline Lemma1Result lemma1_probe_detailed(const SiteSet& sites, std::size_t resolution,
                                          Rng& rng) {
  if (sites.dim() != 2) throw Error(ErrorKind::kDimMismatch, "probe is 2D only");
  std::vector<std::size_t> inside;
  for (std::size_t k = 0; k < sites.size(); ++k) {
    if (sites.label(k)) inside.push_back(k);
  }
  for (std::size_t i = 0; i < inside.size(); ++i) {
    for (std::size_t j = i + 1; j < inside.size(); ++j) {
      for (std::size_t l = j + 1; l < inside.size(); ++l) {
        const Point& a = sites.point(inside[i]);
        const Point& b = sites.point(inside[j]);
        const Point& c = sites.point(inside[l]);
        if (predicates::orient2d(a, b, c) == 0) continue;
        if (!detail::triangle_occupied(sites, a, b, c)) continue;
        Point q;
        do {
          double u = rng.uniform(), v = rng.uniform();
          if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
          }
          const double w = 1.0 - u - v;
          q = {u * a[0] + v * b[0] + w * c[0], u * a[1] + v * b[1] + w * c[1], 0.0};
        } while (!detail::strictly_inside(q, a, b, c));
        return lemma1_check(sites, {inside[i], inside[j], inside[l]}, q, resolution);
      }
    }
  }
  throw Error(ErrorKind::kNoEligibleTriangle, "no inside-labeled triangle lies in the occupied region");
}

inline bool lemma1_probe(const SiteSet& sites, std::size_t resolution, Rng& rng) {
  return lemma1_probe_detailed(sites, resolution, rng).identical;
}

}  // namespace voronet

#endif  // VORONET_FITTING_HPP
