// Command-line driver: direct fitting, autoencoder training, evaluation,
// rendering, interpolation, gradient audits and the MLP comparison arm.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "voronet/delaunay.hpp"
#include "voronet/extract.hpp"
#include "voronet/fitting.hpp"
#include "voronet/gradcheck.hpp"
#include "voronet/io.hpp"

namespace fs = std::filesystem;
using namespace voronet;

namespace {

using Target = std::variant<AnalyticShape, GridOccupancy>;

Target parse_target(const std::string& spec) {
  if (spec == "ball") return AnalyticShape::ball(2, {0.5, 0.5, 0.0}, 0.3);
  if (spec == "sphere") return AnalyticShape::ball(3, {0.5, 0.5, 0.5}, 0.3);
  if (spec.rfind("pgm:", 0) == 0) return io::read_pgm(spec.substr(4));
  if (spec.rfind("vox:", 0) == 0) return io::decode_voxb(io::read_bytes(spec.substr(4)));
  if (spec.rfind("idx:", 0) == 0) {
    const std::string rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument, "idx target needs idx:PATH:INDEX");
    }
    const io::IdxDataset ds = io::load_idx(rest.substr(0, colon));
    const std::size_t index = std::stoull(rest.substr(colon + 1));
    if (index >= ds.count()) throw Error(ErrorKind::kInvalidArgument, "idx index out of range");
    return io::binarize(ds.image(index), ds.rows, ds.cols);
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown target: " + spec);
}

int target_dim(const Target& t) {
  return std::visit([](const auto& o) { return o.dim(); }, t);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(s)) out.push_back(std::stoull(item));
  if (out.empty()) throw Error(ErrorKind::kInvalidArgument, "empty list: " + s);
  return out;
}

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir + ": " + ec.message());
}

void write_config(const std::string& dir, KeyValues kv) {
  io::write_text(path_in(dir, "config.txt"), to_kv_text(kv));
}

std::string opt_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

void write_raster(const std::string& dir, const std::string& stem, const GridOccupancy& g) {
  if (g.dim() == 2) {
    io::write_pgm(path_in(dir, stem + ".pgm"), g);
  } else {
    io::write_bytes(path_in(dir, stem + ".voxb"), io::encode_voxb(g));
  }
}

void write_crust(const std::string& dir, const std::string& stem, const SiteSet& sites) {
  const CrustSegments segs = crust2d(sites);
  io::write_text(path_in(dir, stem + ".svg"), io::render_svg(sites, segs));
  io::write_text(path_in(dir, stem + ".txt"), io::format_segments(segs));
}

struct LossFlags {
  double w_rec = 1.0, w_bound = 1.0, w_sdf = 0.1, w_cvt = 0.01;
  std::string residual = "squared";

  void add(CLI::App* app) {
    app->add_option("--w-rec", w_rec, "reconstruction weight")->capture_default_str();
    app->add_option("--w-bound", w_bound, "domain-bound weight")->capture_default_str();
    app->add_option("--w-sdf", w_sdf, "distance-field weight")->capture_default_str();
    app->add_option("--w-cvt", w_cvt, "centroidal weight (2D only)")->capture_default_str();
    app->add_option("--residual", residual, "squared|absolute")->capture_default_str();
  }
  LossWeights weights() const { return {w_rec, w_bound, w_sdf, w_cvt}; }
};

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string target, out;
  FitConfig config;
  LossFlags loss;
  std::string strategy = "stratified";
  bool dump_delaunay = false;
  bool wall_clock = false;
};

KeyValues summary_of(const SiteSet& best, const GridOccupancy& target, double best_iou,
                     std::size_t best_step) {
  const RasterMetrics m = evaluate_sites(best, target);
  return {{"best_iou", format_double(best_iou)},
          {"best_step", std::to_string(best_step)},
          {"pix_acc", format_double(m.pix_acc)},
          {"hausdorff", opt_text(m.hausdorff)},
          {"params", std::to_string(best.size() * static_cast<std::size_t>(best.dim()))}};
}

int run_fit(FitArgs& a) {
  a.config.strategy = parse_sampling_strategy(a.strategy);
  a.config.weights = a.loss.weights();
  a.config.residual = detail::parse_residual(a.loss.residual);
  a.config.validate();
  const Target target = parse_target(a.target);
  prepare_out(a.out);
  KeyValues kv = a.config.to_kv();
  kv.emplace("target", a.target);
  write_config(a.out, kv);

  const FitResult result =
      std::visit([&](const auto& oracle) { return fit_direct(oracle, a.config); }, target);
  io::write_text(path_in(a.out, "runlog.csv"), result.log.to_csv(a.wall_clock));
  io::write_text(path_in(a.out, "sites.txt"), io::format_sites(result.best));
  io::write_text(path_in(a.out, "final_sites.txt"), io::format_sites(result.final_sites));
  const GridOccupancy eval_target = std::visit(
      [&](const auto& oracle) { return target_raster(oracle, a.config.eval_resolution); }, target);
  const GridOccupancy pred = rasterize_hard(result.best, eval_target.resolution()[0]);
  write_raster(a.out, "raster", pred);
  io::write_text(path_in(a.out, "summary.txt"),
                 to_kv_text(summary_of(result.best, eval_target, result.best_iou,
                                       result.best_step)));
  if (result.best.dim() == 2) {
    write_crust(a.out, "crust", result.best);
    if (a.dump_delaunay) {
      const AugmentedSites aug = boundary_augment(result.best);
      write_off(path_in(a.out, "delaunay.off"), triangulate(jitter_duplicates(aug.points)));
    }
  }
  if (result.error) {
    std::cerr << "fit aborted: " << *result.error << " (last good iterate saved)\n";
    return 1;
  }
  std::printf("best_iou=%s best_step=%zu\n", format_double(result.best_iou).c_str(),
              result.best_step);
  return 0;
}

// ---------------------------------------------------------------------------
// baseline-mlp

struct MlpArgs {
  std::string target, out;
  MlpFitConfig config;
  std::string strategy = "stratified";
  bool wall_clock = false;
};

KeyValues mlp_summary(const MlpFitResult& r, int dim, const GridOccupancy& target) {
  const GridOccupancy pred = rasterize_mlp(r.best, dim, target.resolution()[0]);
  const RasterMetrics m = compare_rasters(pred, target, boundary_points_or_empty(target));
  return {{"best_iou", format_double(r.best_iou)},
          {"best_step", std::to_string(r.best_step)},
          {"pix_acc", format_double(m.pix_acc)},
          {"hausdorff", opt_text(m.hausdorff)},
          {"params", std::to_string(r.best.param_count())}};
}

int run_mlp(MlpArgs& a) {
  a.config.strategy = parse_sampling_strategy(a.strategy);
  if (a.config.hidden < 1 || a.config.iters < 1 || a.config.eval_every < 1 ||
      a.config.sample_count < 16 || !(a.config.lr > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "invalid baseline-mlp flags");
  }
  const Target target = parse_target(a.target);
  prepare_out(a.out);
  KeyValues kv = a.config.to_kv();
  kv.emplace("target", a.target);
  write_config(a.out, kv);
  const MlpFitResult r =
      std::visit([&](const auto& oracle) { return fit_implicit_mlp(oracle, a.config); }, target);
  const GridOccupancy eval_target = std::visit(
      [&](const auto& oracle) { return target_raster(oracle, a.config.eval_resolution); }, target);
  io::write_text(path_in(a.out, "runlog.csv"), r.log.to_csv(a.wall_clock));
  save_checkpoint(path_in(a.out, "model.vnet"), r.best);
  write_raster(a.out, "raster", rasterize_mlp(r.best, target_dim(target), eval_target.resolution()[0]));
  io::write_text(path_in(a.out, "summary.txt"),
                 to_kv_text(mlp_summary(r, target_dim(target), eval_target)));
  std::printf("best_iou=%s params=%zu\n", format_double(r.best_iou).c_str(),
              r.best.param_count());
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string targets = "sphere", k_list = "8,16,32,64", hidden_list = "4,16,64,383", out;
  FitConfig fit;
  MlpFitConfig mlp;
  bool wall_clock = false;
};

int run_sweep(SweepArgs& a) {
  const std::vector<std::string> targets = split_list(a.targets);
  const std::vector<std::size_t> ks = split_sizes(a.k_list);
  const std::vector<std::size_t> hiddens = split_sizes(a.hidden_list);
  a.mlp.iters = a.fit.iters;
  a.mlp.seed = a.fit.seed;
  a.mlp.eval_every = a.fit.eval_every;
  a.fit.validate();
  prepare_out(a.out);
  KeyValues kv = a.fit.to_kv();
  kv.emplace("targets", a.targets);
  kv.emplace("k_list", a.k_list);
  kv.emplace("hidden_list", a.hidden_list);
  kv.emplace("mlp_lr", format_double(a.mlp.lr));
  kv.emplace("mlp_samples", std::to_string(a.mlp.sample_count));
  write_config(a.out, kv);

  std::string csv = "target,model,size,params,best_iou,hausdorff\n";
  for (const std::string& name : targets) {
    const Target target = parse_target(name);
    const int dim = target_dim(target);
    const GridOccupancy eval_target = std::visit(
        [&](const auto& oracle) { return target_raster(oracle, a.fit.eval_resolution); }, target);
    std::string safe = name;
    for (char& c : safe) {
      if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    }
    for (std::size_t k : ks) {
      FitConfig c = a.fit;
      c.k = k;
      const FitResult r =
          std::visit([&](const auto& oracle) { return fit_direct(oracle, c); }, target);
      const std::string dir = path_in(a.out, safe + "_voronoi_k" + std::to_string(k));
      prepare_out(dir);
      io::write_text(path_in(dir, "runlog.csv"), r.log.to_csv(a.wall_clock));
      io::write_text(path_in(dir, "sites.txt"), io::format_sites(r.best));
      const RasterMetrics m = evaluate_sites(r.best, eval_target);
      csv += name + ",voronoi," + std::to_string(k) + "," + std::to_string(k * dim) + "," +
             format_double(r.best_iou) + "," + opt_text(m.hausdorff) + "\n";
    }
    for (std::size_t h : hiddens) {
      MlpFitConfig c = a.mlp;
      c.hidden = h;
      const MlpFitResult r =
          std::visit([&](const auto& oracle) { return fit_implicit_mlp(oracle, c); }, target);
      const std::string dir = path_in(a.out, safe + "_mlp_h" + std::to_string(h));
      prepare_out(dir);
      io::write_text(path_in(dir, "runlog.csv"), r.log.to_csv(a.wall_clock));
      const KeyValues s = mlp_summary(r, dim, eval_target);
      csv += name + ",mlp," + std::to_string(h) + "," + std::to_string(r.best.param_count()) +
             "," + format_double(r.best_iou) + "," + detail::kv_get(s, "hausdorff") + "\n";
    }
  }
  io::write_text(path_in(a.out, "sweep.csv"), csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string images, labels, out;
  std::size_t n = 1000, n_test = 100;
  AutoencoderConfig config;
  LossFlags loss;
  std::string strategy = "stratified";
  bool wall_clock = false;
};

struct Split {
  io::IdxDataset ds;
  std::vector<GridOccupancy> train, test;
  std::size_t test_begin = 0;
};

Split load_split(const std::string& images, const std::string& labels, std::size_t n,
                 std::size_t n_test) {
  Split s;
  s.ds = io::load_idx(images, labels.empty() ? std::nullopt : std::optional(labels));
  if (n == 0 || n > s.ds.count()) {
    throw Error(ErrorKind::kInvalidArgument, "--n must be in [1, image count]");
  }
  s.train = io::binarize_all(s.ds, 0, n);
  s.test_begin = n;
  s.test = io::binarize_all(s.ds, n, n + n_test);
  return s;
}

int run_train(TrainArgs& a) {
  a.config.strategy = parse_sampling_strategy(a.strategy);
  a.config.weights = a.loss.weights();
  a.config.residual = detail::parse_residual(a.loss.residual);
  a.config.validate();
  const Split split = load_split(a.images, a.labels, a.n, a.n_test);
  prepare_out(a.out);
  KeyValues kv = a.config.to_kv();
  kv.emplace("idx_images", fs::absolute(a.images).string());
  kv.emplace("idx_labels", a.labels.empty() ? "" : fs::absolute(a.labels).string());
  kv.emplace("n", std::to_string(a.n));
  kv.emplace("n_test", std::to_string(a.n_test));
  write_config(a.out, kv);

  Rng rng(a.config.seed);
  const std::size_t input = split.ds.rows * split.ds.cols;
  DenseNet encoder = build_encoder(rng, a.config.width, a.config.latent, input);
  DenseNet decoder = build_decoder(rng, a.config.latent, a.config.k, 2, a.config.width);
  init_decoder_head(decoder, a.config.k, 2, a.config.seed);
  const RunLog log = train_autoencoder(split.train, split.test, a.config, encoder, decoder);
  io::write_text(path_in(a.out, "runlog.csv"), log.to_csv(a.wall_clock));
  save_checkpoint(path_in(a.out, "encoder.vnet"), encoder);
  save_checkpoint(path_in(a.out, "decoder.vnet"), decoder);

  KeyValues summary;
  if (!split.test.empty()) {
    const double mse = reconstruction_mse(encoder, decoder, split.test);
    const double baseline = mean_image_mse(split.train, split.test);
    summary = {{"test_mse", format_double(mse)},
               {"mean_image_mse", format_double(baseline)},
               {"beats_mean_image", mse < baseline ? "1" : "0"}};
    std::printf("test_mse=%s mean_image_mse=%s\n", format_double(mse).c_str(),
                format_double(baseline).c_str());
  }
  io::write_text(path_in(a.out, "summary.txt"), to_kv_text(summary));
  return 0;
}

struct Model {
  KeyValues config;
  DenseNet encoder, decoder;
};

Model load_model(const std::string& dir) {
  Model m{parse_kv_text(io::read_text(path_in(dir, "config.txt"))), DenseNet({1, 1}),
          DenseNet({1, 1})};
  m.encoder = load_checkpoint(path_in(dir, "encoder.vnet")).net;
  m.decoder = load_checkpoint(path_in(dir, "decoder.vnet")).net;
  return m;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string model, target, out;
  std::size_t resolution = 0;
  bool latents = false;
};

int run_eval(EvalArgs& a) {
  const bool is_autoencoder = fs::exists(path_in(a.model, "encoder.vnet"));
  if (a.latents) {
    if (!is_autoencoder) throw Error(ErrorKind::kInvalidArgument, "--latents needs a train model");
    if (a.out.empty()) throw Error(ErrorKind::kInvalidArgument, "--latents needs --out");
    const Model m = load_model(a.model);
    const std::string labels = detail::kv_get(m.config, "idx_labels");
    const Split split =
        load_split(detail::kv_get(m.config, "idx_images"), labels,
                   detail::kv_uint(m.config, "n"), detail::kv_uint(m.config, "n_test"));
    const std::vector<GridOccupancy>& set = split.test.empty() ? split.train : split.test;
    const std::size_t begin = split.test.empty() ? 0 : split.test_begin;
    std::vector<std::vector<double>> codes;
    std::vector<std::uint8_t> classes;
    for (std::size_t i = 0; i < set.size(); ++i) {
      codes.push_back(encode(m.encoder, set[i]));
      if (split.ds.labels) classes.push_back((*split.ds.labels)[begin + i]);
    }
    const auto proj = pca_2d(codes);
    prepare_out(a.out);
    write_config(a.out, {{"model", a.model}, {"latents", "1"}});
    io::write_text(path_in(a.out, "latents.svg"),
                   io::render_scatter_svg(proj, classes, "PCA of latent codes (tSNE stand-in)"));
    std::string csv = "pc1,pc2,class\n";
    for (std::size_t i = 0; i < proj.size(); ++i) {
      csv += format_double(proj[i][0]) + "," + format_double(proj[i][1]) + "," +
             (classes.empty() ? std::string() : std::to_string(classes[i])) + "\n";
    }
    io::write_text(path_in(a.out, "latents.csv"), csv);
    if (a.target.empty()) return 0;
  }
  if (a.target.empty()) throw Error(ErrorKind::kInvalidArgument, "--target is required");
  const Target target = parse_target(a.target);
  const GridOccupancy ref = std::visit(
      [&](const auto& oracle) { return target_raster(oracle, a.resolution); }, target);
  GridOccupancy pred(2, {2, 2, 1});
  if (is_autoencoder) {
    const Model m = load_model(a.model);
    if (ref.dim() != 2) throw Error(ErrorKind::kDimMismatch, "autoencoder targets are 2D");
    const GridOccupancy image = std::get<GridOccupancy>(target);
    pred = rasterize_hard(decode(m.decoder, encode(m.encoder, image)), ref.resolution()[0]);
  } else if (fs::exists(path_in(a.model, "sites.txt"))) {
    const SiteSet sites = io::parse_sites(io::read_text(path_in(a.model, "sites.txt")));
    if (sites.dim() != ref.dim()) throw Error(ErrorKind::kDimMismatch, "sites vs target");
    pred = rasterize_hard(sites, ref.resolution()[0]);
  } else if (fs::exists(path_in(a.model, "model.vnet"))) {
    const DenseNet net = load_checkpoint(path_in(a.model, "model.vnet")).net;
    if (net.input_size() != static_cast<std::size_t>(ref.dim())) {
      throw Error(ErrorKind::kDimMismatch, "model vs target");
    }
    pred = rasterize_mlp(net, ref.dim(), ref.resolution()[0]);
  } else {
    throw Error(ErrorKind::kIo, "no sites.txt, model.vnet or encoder.vnet in " + a.model);
  }
  const RasterMetrics m = compare_rasters(pred, ref, boundary_points_or_empty(ref));
  std::printf("iou,pix_acc,hausdorff\n%s,%s,%s\n", format_double(m.iou).c_str(),
              format_double(m.pix_acc).c_str(), opt_text(m.hausdorff).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
  std::string sites, out, raster, segments, off;
  std::size_t resolution = 256;
  bool crust = false;
};

int run_render(RenderArgs& a) {
  const SiteSet sites = io::parse_sites(io::read_text(a.sites));
  if (sites.dim() != 2) throw Error(ErrorKind::kDimMismatch, "render is 2D only");
  if (a.resolution < 2) throw Error(ErrorKind::kInvalidArgument, "--resolution must be >= 2");
  const CrustSegments segs = a.crust ? crust2d(sites) : CrustSegments{};
  io::SvgOptions opt;
  opt.draw_crust = a.crust;
  io::write_text(a.out, io::render_svg(sites, segs, opt));
  if (!a.segments.empty()) io::write_text(a.segments, io::format_segments(crust2d(sites)));
  if (!a.raster.empty()) io::write_pgm(a.raster, rasterize_hard(sites, a.resolution));
  if (!a.off.empty()) write_off(a.off, triangulate(jitter_duplicates(sites.points())));
  return 0;
}

// ---------------------------------------------------------------------------
// interp

struct InterpArgs {
  std::string model, out;
  std::size_t a = 0, b = 1, steps = 8;
};

int run_interp(InterpArgs& a) {
  if (a.steps < 2) throw Error(ErrorKind::kInvalidArgument, "--steps must be >= 2");
  const Model m = load_model(a.model);
  const io::IdxDataset ds = io::load_idx(detail::kv_get(m.config, "idx_images"));
  if (a.a >= ds.count() || a.b >= ds.count()) {
    throw Error(ErrorKind::kInvalidArgument, "image index out of range");
  }
  const GridOccupancy img_a = io::binarize(ds.image(a.a), ds.rows, ds.cols);
  const GridOccupancy img_b = io::binarize(ds.image(a.b), ds.rows, ds.cols);
  const std::vector<SiteSet> path = interpolate_latent(m.encoder, m.decoder, img_a, img_b, a.steps);
  prepare_out(a.out);
  write_config(a.out, {{"model", a.model},
                       {"a", std::to_string(a.a)},
                       {"b", std::to_string(a.b)},
                       {"steps", std::to_string(a.steps)}});
  for (std::size_t s = 0; s < path.size(); ++s) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "step_%03zu", s);
    io::write_text(path_in(a.out, std::string(stem) + ".svg"),
                   io::render_svg(path[s], crust2d(path[s])));
    io::write_text(path_in(a.out, std::string(stem) + "_sites.txt"), io::format_sites(path[s]));
  }
  const SiteSet direct_a = decode(m.decoder, encode(m.encoder, img_a));
  const SiteSet direct_b = decode(m.decoder, encode(m.encoder, img_b));
  const SiteSet& mid = path[path.size() / 2];
  bool finite = true;
  for (const Point& p : mid.points()) finite &= is_finite(p);
  const KeyValues summary{{"a_exact", path.front() == direct_a ? "1" : "0"},
                          {"b_exact", path.back() == direct_b ? "1" : "0"},
                          {"mid_finite", finite ? "1" : "0"},
                          {"mid_bound_penalty", format_double(bounds_loss(mid).value)}};
  io::write_text(path_in(a.out, "endpoints.txt"), to_kv_text(summary));
  std::fputs(to_kv_text(summary).c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

int run_gradcheck(const std::string& module, std::uint64_t seed) {
  bool ok = true;
  for (const gradcheck::Result& r : gradcheck::run(module, seed)) {
    std::printf("%-28s configs=%zu skipped=%zu max_rel_err=%.3e tol=%.0e %s\n", r.name.c_str(),
                r.configs, r.skipped, r.max_rel_err, r.tol, r.pass() ? "PASS" : "FAIL");
    ok &= r.pass();
  }
  return ok ? 0 : 1;
}

void add_fit_flags(CLI::App* app, FitConfig& c) {
  app->add_option("--k", c.k, "site count (even)")->capture_default_str();
  app->add_option("--beta", c.beta, "temperature")->capture_default_str();
  app->add_option("--iters", c.iters, "optimizer steps")->capture_default_str();
  app->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
  app->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--samples", c.sample_count, "samples per step")->capture_default_str();
  app->add_option("--eval-every", c.eval_every, "evaluation period")->capture_default_str();
  app->add_option("--eval-resolution", c.eval_resolution, "eval grid (0 = auto)")
      ->capture_default_str();
  app->add_flag("--beta-warmup", c.beta_warmup, "linear 1e2 -> beta over the first 25%");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable Voronoi shape representation"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit sites directly to one occupancy target");
  fit_cmd->add_option("--target", fit.target, "ball|sphere|pgm:PATH|vox:PATH|idx:PATH:INDEX")
      ->required();
  fit_cmd->add_option("--out", fit.out, "output directory")->required();
  add_fit_flags(fit_cmd, fit.config);
  fit.loss.add(fit_cmd);
  fit_cmd->add_option("--strategy", fit.strategy, "uniform|stratified")->capture_default_str();
  fit_cmd->add_flag("--dump-delaunay", fit.dump_delaunay, "write the augmented triangulation");
  fit_cmd->add_flag("--wall-clock", fit.wall_clock, "fill the seconds column");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train the digit autoencoder");
  train_cmd->add_option("--idx-images", train.images, "IDX image file")->required();
  train_cmd->add_option("--idx-labels", train.labels, "IDX label file");
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--n", train.n, "training images")->capture_default_str();
  train_cmd->add_option("--n-test", train.n_test, "test images after the training block")
      ->capture_default_str();
  train_cmd->add_option("--k", train.config.k, "sites")->capture_default_str();
  train_cmd->add_option("--latent", train.config.latent, "latent size")->capture_default_str();
  train_cmd->add_option("--epochs", train.config.epochs, "epochs")->capture_default_str();
  train_cmd->add_option("--width", train.config.width, "hidden width")->capture_default_str();
  train_cmd->add_option("--batch", train.config.batch, "minibatch size")->capture_default_str();
  train_cmd->add_option("--lr", train.config.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--beta", train.config.beta, "temperature")->capture_default_str();
  train_cmd->add_flag("--beta-warmup", train.config.beta_warmup, "temperature warm-up");
  train_cmd->add_option("--samples", train.config.sample_count, "samples per image")
      ->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed, "RNG seed")->capture_default_str();
  train_cmd->add_option("--eval-every", train.config.eval_every, "epochs between evals")
      ->capture_default_str();
  train_cmd->add_option("--strategy", train.strategy, "uniform|stratified")->capture_default_str();
  train.loss.add(train_cmd);
  train_cmd->add_flag("--wall-clock", train.wall_clock, "fill the seconds column");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "metrics of a fitted or trained model");
  eval_cmd->add_option("--model", eval.model, "fit, baseline-mlp or train directory")->required();
  eval_cmd->add_option("--target", eval.target, "target spec");
  eval_cmd->add_option("--resolution", eval.resolution, "eval grid (0 = auto)")
      ->capture_default_str();
  eval_cmd->add_flag("--latents", eval.latents, "PCA scatter of test latent codes");
  eval_cmd->add_option("--out", eval.out, "output directory for --latents");

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "SVG of a site file");
  render_cmd->add_option("--sites", render.sites, "site text file")->required();
  render_cmd->add_option("--out", render.out, "SVG output file")->required();
  render_cmd->add_flag("--crust", render.crust, "draw the inside/outside crust");
  render_cmd->add_option("--raster", render.raster, "PGM output of the hard occupancy");
  render_cmd->add_option("--resolution", render.resolution, "raster resolution")
      ->capture_default_str();
  render_cmd->add_option("--segments", render.segments, "crust segment list output");
  render_cmd->add_option("--off", render.off, "Delaunay OFF output");

  InterpArgs interp;
  auto* interp_cmd = app.add_subcommand("interp", "latent interpolation between two digits");
  interp_cmd->add_option("--model", interp.model, "train directory")->required();
  interp_cmd->add_option("--a", interp.a, "first image index")->capture_default_str();
  interp_cmd->add_option("--b", interp.b, "second image index")->capture_default_str();
  interp_cmd->add_option("--steps", interp.steps, "points on the path")->capture_default_str();
  interp_cmd->add_option("--out", interp.out, "output directory")->required();

  std::string gc_module = "all";
  std::uint64_t gc_seed = 0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gc_cmd->add_option("--module", gc_module, "voronoi|losses|nn|all")->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();

  MlpArgs mlp;
  auto* mlp_cmd = app.add_subcommand("baseline-mlp", "implicit MLP comparison arm");
  mlp_cmd->add_option("--target", mlp.target, "target spec")->required();
  mlp_cmd->add_option("--out", mlp.out, "output directory")->required();
  mlp_cmd->add_option("--hidden", mlp.config.hidden, "hidden width")->capture_default_str();
  mlp_cmd->add_option("--iters", mlp.config.iters, "optimizer steps")->capture_default_str();
  mlp_cmd->add_option("--lr", mlp.config.lr, "Adam learning rate")->capture_default_str();
  mlp_cmd->add_option("--samples", mlp.config.sample_count, "samples per step")
      ->capture_default_str();
  mlp_cmd->add_option("--seed", mlp.config.seed, "RNG seed")->capture_default_str();
  mlp_cmd->add_option("--eval-every", mlp.config.eval_every, "evaluation period")
      ->capture_default_str();
  mlp_cmd->add_option("--eval-resolution", mlp.config.eval_resolution, "eval grid (0 = auto)")
      ->capture_default_str();
  mlp_cmd->add_option("--strategy", mlp.strategy, "uniform|stratified")->capture_default_str();
  mlp_cmd->add_flag("--wall-clock", mlp.wall_clock, "fill the seconds column");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "parameters-vs-Hausdorff table");
  sweep_cmd->add_option("--targets", sweep.targets, "comma-separated target specs")
      ->capture_default_str();
  sweep_cmd->add_option("--k-list", sweep.k_list, "site counts")->capture_default_str();
  sweep_cmd->add_option("--hidden-list", sweep.hidden_list, "MLP widths")->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out, "output directory")->required();
  add_fit_flags(sweep_cmd, sweep.fit);
  sweep_cmd->add_option("--mlp-lr", sweep.mlp.lr, "MLP learning rate")->capture_default_str();
  sweep_cmd->add_option("--mlp-samples", sweep.mlp.sample_count, "MLP samples per step")
      ->capture_default_str();
  sweep_cmd->add_flag("--wall-clock", sweep.wall_clock, "fill the seconds column");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*render_cmd) return run_render(render);
    if (*interp_cmd) return run_interp(interp);
    if (*gc_cmd) return run_gradcheck(gc_module, gc_seed);
    if (*mlp_cmd) return run_mlp(mlp);
    if (*sweep_cmd) return run_sweep(sweep);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
