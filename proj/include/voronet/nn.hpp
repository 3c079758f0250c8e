#ifndef VORONET_NN_HPP
#define VORONET_NN_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voronet/common.hpp"

namespace voronet {

inline constexpr double kLeakySlope = 0.01;

/// Fully connected network: leaky-ReLU on hidden layers, identity output.
/// All weights and biases live in one contiguous buffer; layer l stores its
/// weight matrix row-major as [out][in] followed by its bias vector.
class DenseNet {
 public:
  /// Zero-initialized network.
  explicit DenseNet(std::vector<std::size_t> layer_sizes)
      : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) {
      throw Error(ErrorKind::kInvalidArgument, "need at least input and output layer");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] == 0 || sizes_[l + 1] == 0) {
        throw Error(ErrorKind::kInvalidArgument, "layer width must be >= 1");
      }
      weight_offset_.push_back(offset);
      offset += sizes_[l] * sizes_[l + 1];
      bias_offset_.push_back(offset);
      offset += sizes_[l + 1];
    }
    params_.assign(offset, 0.0);
  }

  /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  static DenseNet he_uniform(std::vector<std::size_t> layer_sizes, Rng& rng) {
    DenseNet net(std::move(layer_sizes));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(net.sizes_[l]));
      for (double& w : net.weights(l)) w = rng.uniform(-limit, limit);
    }
    return net;
  }

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> weights(std::size_t l) {
    return std::span(params_).subspan(weight_offset_[l], sizes_[l] * sizes_[l + 1]);
  }
  std::span<const double> weights(std::size_t l) const {
    return std::span(params_).subspan(weight_offset_[l], sizes_[l] * sizes_[l + 1]);
  }
  std::span<double> bias(std::size_t l) {
    return std::span(params_).subspan(bias_offset_[l], sizes_[l + 1]);
  }
  std::span<const double> bias(std::size_t l) const {
    return std::span(params_).subspan(bias_offset_[l], sizes_[l + 1]);
  }

  struct Cache {
    // post[0] is the input; pre[l] / post[l + 1] belong to layer l.
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
  };

  std::vector<double> forward(std::span<const double> input, Cache* cache = nullptr) const {
    if (input.size() != input_size()) {
      throw Error(ErrorKind::kShapeMismatch, "network input size");
    }
    std::vector<double> act(input.begin(), input.end());
    if (cache) {
      cache->pre.assign(num_layers(), {});
      cache->post.assign(num_layers() + 1, {});
      cache->post[0] = act;
    }
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
      const auto w = weights(l);
      const auto b = bias(l);
      std::vector<double> z(n_out);
      for (std::size_t o = 0; o < n_out; ++o) {
        const double* row = w.data() + o * n_in;
        double s = b[o];
        for (std::size_t i = 0; i < n_in; ++i) s += row[i] * act[i];
        z[o] = s;
      }
      const bool hidden = l + 1 < num_layers();
      std::vector<double> a = z;
      if (hidden) {
        for (double& x : a) x = x > 0.0 ? x : kLeakySlope * x;
      }
      if (cache) {
        cache->pre[l] = std::move(z);
        cache->post[l + 1] = a;
      }
      act = std::move(a);
    }
    return act;
  }

  /// Reverse pass. Adds parameter gradients into `param_grad` (same layout
  /// as params()) and, if non-empty, writes the input gradient.
  void backward(const Cache& cache, std::span<const double> output_grad,
                std::span<double> param_grad, std::span<double> input_grad = {}) const {
    if (output_grad.size() != output_size() || param_grad.size() != param_count() ||
        cache.pre.size() != num_layers()) {
      throw Error(ErrorKind::kShapeMismatch, "backward shapes");
    }
    if (!input_grad.empty() && input_grad.size() != input_size()) {
      throw Error(ErrorKind::kShapeMismatch, "input gradient size");
    }
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    for (std::size_t l = num_layers(); l-- > 0;) {
      const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
      if (l + 1 < num_layers()) {
        const std::vector<double>& z = cache.pre[l];
        for (std::size_t o = 0; o < n_out; ++o) {
          if (z[o] <= 0.0) delta[o] *= kLeakySlope;
        }
      }
      const std::vector<double>& a = cache.post[l];
      double* gw = param_grad.data() + weight_offset_[l];
      double* gb = param_grad.data() + bias_offset_[l];
      for (std::size_t o = 0; o < n_out; ++o) {
        const double g = delta[o];
        gb[o] += g;
        if (g == 0.0) continue;
        double* row = gw + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) row[i] += g * a[i];
      }
      if (l == 0 && input_grad.empty()) break;
      const auto w = weights(l);
      std::vector<double> prev(n_in, 0.0);
      for (std::size_t o = 0; o < n_out; ++o) {
        const double g = delta[o];
        if (g == 0.0) continue;
        const double* row = w.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) prev[i] += g * row[i];
      }
      if (l == 0) {
        std::copy(prev.begin(), prev.end(), input_grad.begin());
      }
      delta = std::move(prev);
    }
  }

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::vector<double> params_;
};

/// Closed-form parameter count for a layer-size list.
inline std::size_t param_count(std::span<const std::size_t> sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

inline std::size_t param_count(const DenseNet& net) { return net.param_count(); }

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  explicit AdamState(std::size_t n, AdamHyper h = {}) : hyper(h), m(n, 0.0), v(n, 0.0) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam update, in place.
inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw Error(ErrorKind::kShapeMismatch, "adam buffer sizes");
  }
  state.step += 1;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

/// 784 -> width x4 -> latent.
inline DenseNet build_encoder(Rng& rng, std::size_t width = 1024,
                              std::size_t latent = 16, std::size_t input = 784) {
  return DenseNet::he_uniform({input, width, width, width, width, latent}, rng);
}

/// latent -> width x3 -> K*D; output is raw site coordinates (unsquashed).
inline DenseNet build_decoder(Rng& rng, std::size_t latent, std::size_t sites, int dim,
                              std::size_t width = 1024) {
  return DenseNet::he_uniform(
      {latent, width, width, width, sites * static_cast<std::size_t>(dim)}, rng);
}

// Checkpoint format (little-endian):
//   "VNET" | u32 version | u32 n_sizes | u32 sizes[n] | f64 params[]
//   optional: "ADAM" | u64 step | f64 lr, beta1, beta2, eps | f64 m[] | f64 v[]

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorKind::kTruncatedFile, "checkpoint ended early");
  return value;
}

inline void read_doubles(std::istream& in, std::span<double> out) {
  in.read(reinterpret_cast<char*>(out.data()),
          static_cast<std::streamsize>(out.size() * sizeof(double)));
  if (!in) throw Error(ErrorKind::kTruncatedFile, "checkpoint ended early");
}

inline void write_doubles(std::ostream& out, std::span<const double> xs) {
  out.write(reinterpret_cast<const char*>(xs.data()),
            static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const DenseNet& net,
                            const AdamState* adam = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path);
  out.write("VNET", 4);
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_sizes().size()));
  for (std::size_t s : net.layer_sizes()) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  }
  detail::write_doubles(out, net.params());
  if (adam) {
    out.write("ADAM", 4);
    detail::write_le<std::uint64_t>(out, adam->step);
    detail::write_le<double>(out, adam->hyper.lr);
    detail::write_le<double>(out, adam->hyper.beta1);
    detail::write_le<double>(out, adam->hyper.beta2);
    detail::write_le<double>(out, adam->hyper.eps);
    detail::write_doubles(out, adam->m);
    detail::write_doubles(out, adam->v);
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path);
}

struct Checkpoint {
  DenseNet net;
  std::optional<AdamState> adam;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in) throw Error(ErrorKind::kTruncatedFile, "checkpoint header");
  if (std::memcmp(magic, "VNET", 4) != 0) {
    throw Error(ErrorKind::kBadMagic, "not a VNET checkpoint: " + path);
  }
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kBadMagic, "unsupported checkpoint version");
  }
  const auto n = detail::read_le<std::uint32_t>(in);
  if (n < 2 || n > 64) throw Error(ErrorKind::kDimMismatch, "bad layer count");
  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) s = detail::read_le<std::uint32_t>(in);
  Checkpoint ck{DenseNet(sizes), std::nullopt};
  detail::read_doubles(in, ck.net.params());
  char tag[4];
  in.read(tag, 4);
  if (in.gcount() == 0) return ck;
  if (in.gcount() != 4 || std::memcmp(tag, "ADAM", 4) != 0) {
    throw Error(ErrorKind::kBadMagic, "unexpected trailing data in checkpoint");
  }
  AdamState adam(ck.net.param_count());
  adam.step = detail::read_le<std::uint64_t>(in);
  adam.hyper.lr = detail::read_le<double>(in);
  adam.hyper.beta1 = detail::read_le<double>(in);
  adam.hyper.beta2 = detail::read_le<double>(in);
  adam.hyper.eps = detail::read_le<double>(in);
  detail::read_doubles(in, adam.m);
  detail::read_doubles(in, adam.v);
  ck.adam = std::move(adam);
  return ck;
}

}  // namespace voronet

#endif  // VORONET_NN_HPP
