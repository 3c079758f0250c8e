#ifndef VORONET_IO_HPP
#define VORONET_IO_HPP

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "voronet/common.hpp"
#include "voronet/extract.hpp"
#include "voronet/fields.hpp"
#include "voronet/fitting.hpp"
#include "voronet/voronoi.hpp"

namespace voronet::io {

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// IDX (big-endian)

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxDataset {
  std::size_t rows = 28;
  std::size_t cols = 28;
  /// count * rows * cols bytes, image-major, row 0 first.
  std::vector<std::uint8_t> pixels;
  std::optional<std::vector<std::uint8_t>> labels;

  std::size_t count() const { return rows * cols == 0 ? 0 : pixels.size() / (rows * cols); }

  std::span<const std::uint8_t> image(std::size_t i) const {
    return std::span(pixels).subspan(i * rows * cols, rows * cols);
  }
};

namespace detail {

inline std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 4 > b.size()) throw Error(ErrorKind::kTruncatedFile, "IDX header");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace detail

inline IdxDataset parse_idx(const std::vector<std::uint8_t>& images,
                            const std::vector<std::uint8_t>* labels = nullptr) {
  if (detail::be32(images, 0) != kIdxImageMagic) {
    throw Error(ErrorKind::kBadMagic, "IDX image magic");
  }
  IdxDataset ds;
  const std::size_t n = detail::be32(images, 4);
  ds.rows = detail::be32(images, 8);
  ds.cols = detail::be32(images, 12);
  const std::size_t payload = n * ds.rows * ds.cols;
  if (images.size() < 16 + payload) throw Error(ErrorKind::kTruncatedFile, "IDX image payload");
  ds.pixels.assign(images.begin() + 16, images.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  if (labels) {
    if (detail::be32(*labels, 0) != kIdxLabelMagic) {
      throw Error(ErrorKind::kBadMagic, "IDX label magic");
    }
    const std::size_t m = detail::be32(*labels, 4);
    if (m != n) throw Error(ErrorKind::kDimMismatch, "image/label counts differ");
    if (labels->size() < 8 + m) throw Error(ErrorKind::kTruncatedFile, "IDX label payload");
    ds.labels = std::vector<std::uint8_t>(labels->begin() + 8,
                                          labels->begin() + 8 + static_cast<std::ptrdiff_t>(m));
  }
  return ds;
}

inline IdxDataset load_idx(const std::string& images_path,
                           const std::optional<std::string>& labels_path = std::nullopt) {
  const std::vector<std::uint8_t> img = read_bytes(images_path);
  if (labels_path) {
    const std::vector<std::uint8_t> lab = read_bytes(*labels_path);
    return parse_idx(img, &lab);
  }
  return parse_idx(img);
}

/// Occupancy 1 where pixel / 255 >= threshold. Image row 0 is the top of the
/// domain.
inline GridOccupancy binarize(std::span<const std::uint8_t> pixels, std::size_t rows,
                              std::size_t cols, double threshold = 0.5) {
  if (pixels.size() != rows * cols) throw Error(ErrorKind::kShapeMismatch, "image size");
  GridOccupancy g(2, {cols, rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = static_cast<double>(pixels[r * cols + c]) / 255.0;
      g.set(c, rows - 1 - r, 0, v >= threshold ? 1 : 0);
    }
  }
  return g;
}

inline std::vector<GridOccupancy> binarize_all(const IdxDataset& ds, std::size_t begin,
                                               std::size_t end, double threshold = 0.5) {
  std::vector<GridOccupancy> out;
  for (std::size_t i = begin; i < end && i < ds.count(); ++i) {
    out.push_back(binarize(ds.image(i), ds.rows, ds.cols, threshold));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval 255, 0 = empty, 255 = occupied)

inline std::vector<std::uint8_t> encode_pgm(const GridOccupancy& g) {
  if (g.dim() != 2) throw Error(ErrorKind::kDimMismatch, "PGM is 2D only");
  const auto& res = g.resolution();
  const std::string header =
      "P5\n" + std::to_string(res[0]) + " " + std::to_string(res[1]) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::size_t r = 0; r < res[1]; ++r) {
    const std::size_t j = res[1] - 1 - r;
    for (std::size_t i = 0; i < res[0]; ++i) out.push_back(g.at(i, j) ? 255 : 0);
  }
  return out;
}

inline GridOccupancy decode_pgm(const std::vector<std::uint8_t>& bytes, double threshold = 0.5) {
  std::size_t pos = 0;
  auto token = [&]() {
    std::string t;
    while (pos < bytes.size()) {
      const char ch = static_cast<char>(bytes[pos]);
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
        ++pos;
      } else {
        t += ch;
        ++pos;
      }
    }
    if (t.empty()) throw Error(ErrorKind::kTruncatedFile, "PGM header");
    return t;
  };
  if (token() != "P5") throw Error(ErrorKind::kBadMagic, "PGM magic (expected P5)");
  const std::size_t w = std::stoul(token());
  const std::size_t h = std::stoul(token());
  const std::size_t maxval = std::stoul(token());
  if (maxval == 0 || maxval > 255) throw Error(ErrorKind::kDimMismatch, "PGM maxval");
  ++pos;  // single whitespace after maxval
  if (pos + w * h > bytes.size()) throw Error(ErrorKind::kTruncatedFile, "PGM payload");
  GridOccupancy g(2, {w, h, 1});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t i = 0; i < w; ++i) {
      const double v = static_cast<double>(bytes[pos + r * w + i]) / static_cast<double>(maxval);
      g.set(i, h - 1 - r, 0, v >= threshold ? 1 : 0);
    }
  }
  return g;
}

inline void write_pgm(const std::string& path, const GridOccupancy& g) {
  write_bytes(path, encode_pgm(g));
}

inline GridOccupancy read_pgm(const std::string& path) { return decode_pgm(read_bytes(path)); }

// ---------------------------------------------------------------------------
// VOXB: "VOXB" | u16 dim | u16 0 | u16 rx | u16 ry | u16 rz | u16 0 | u8 x-fastest

inline std::vector<std::uint8_t> encode_voxb(const GridOccupancy& g) {
  std::vector<std::uint8_t> out{'V', 'O', 'X', 'B'};
  auto u16 = [&out](std::size_t v) {
    if (v > 0xFFFF) throw Error(ErrorKind::kInvalidArgument, "VOXB field exceeds u16");
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  u16(static_cast<std::size_t>(g.dim()));
  u16(0);
  for (std::size_t r : g.resolution()) u16(r);
  u16(0);
  out.insert(out.end(), g.values().begin(), g.values().end());
  return out;
}

inline GridOccupancy decode_voxb(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw Error(ErrorKind::kTruncatedFile, "VOXB header");
  if (bytes[0] != 'V' || bytes[1] != 'O' || bytes[2] != 'X' || bytes[3] != 'B') {
    throw Error(ErrorKind::kBadMagic, "VOXB magic");
  }
  auto u16 = [&bytes](std::size_t at) {
    return static_cast<std::size_t>(bytes[at]) | (static_cast<std::size_t>(bytes[at + 1]) << 8);
  };
  const int dim = static_cast<int>(u16(4));
  if (dim != 2 && dim != 3) throw Error(ErrorKind::kDimMismatch, "VOXB dimension");
  const std::array<std::size_t, 3> res{u16(8), u16(10), u16(12)};
  const std::size_t n = res[0] * res[1] * res[2];
  if (bytes.size() < 16 + n) throw Error(ErrorKind::kTruncatedFile, "VOXB payload");
  std::vector<std::uint8_t> values(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(n));
  for (auto& v : values) v = v ? 1 : 0;
  return GridOccupancy(dim, res, std::move(values));
}

// ---------------------------------------------------------------------------
// sites text: "K D" then one "label x y [z]" line per site

inline std::string format_sites(const SiteSet& sites) {
  std::string out = std::to_string(sites.size()) + " " + std::to_string(sites.dim()) + "\n";
  for (std::size_t k = 0; k < sites.size(); ++k) {
    out += std::to_string(sites.label(k));
    for (int d = 0; d < sites.dim(); ++d) out += " " + format_double(sites.point(k)[d]);
    out += "\n";
  }
  return out;
}

inline SiteSet parse_sites(const std::string& text) {
  std::istringstream in(text);
  std::size_t k = 0;
  int dim = 0;
  if (!(in >> k >> dim)) throw Error(ErrorKind::kTruncatedFile, "sites header");
  check_dim(dim);
  std::vector<Point> pts(k, Point{0.0, 0.0, 0.0});
  std::vector<std::uint8_t> labels(k);
  for (std::size_t i = 0; i < k; ++i) {
    int label = 0;
    if (!(in >> label)) throw Error(ErrorKind::kTruncatedFile, "sites body");
    labels[i] = static_cast<std::uint8_t>(label);
    for (int d = 0; d < dim; ++d) {
      std::string tok;
      if (!(in >> tok)) throw Error(ErrorKind::kTruncatedFile, "sites body");
      pts[i][d] = std::stod(tok);
    }
  }
  return SiteSet(dim, std::move(pts), std::move(labels));
}

// ---------------------------------------------------------------------------
// crust output

inline std::string format_segments(const CrustSegments& segs) {
  std::string out;
  for (const CrustSegment& s : segs) {
    out += format_double(s.a[0]) + " " + format_double(s.a[1]) + " " + format_double(s.b[0]) +
           " " + format_double(s.b[1]) + " " + std::to_string(s.inside) + " " +
           std::to_string(s.outside) + "\n";
  }
  return out;
}

struct SvgOptions {
  double size = 512.0;
  double site_radius = 3.0;
  bool draw_crust = true;
};

/// Unit square mapped to a size x size viewport (y up). Crust polylines are
/// drawn as one <path> each, sites as circles colored by label.
inline std::string render_svg(const SiteSet& sites, const CrustSegments& segs,
                              const SvgOptions& opt = {}) {
  auto fx = [&](double x) { return format_double(x * opt.size); };
  auto fy = [&](double y) { return format_double((1.0 - y) * opt.size); };
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
       format_double(opt.size) + "\" height=\"" + format_double(opt.size) + "\" viewBox=\"0 0 " +
       format_double(opt.size) + " " + format_double(opt.size) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + format_double(opt.size) + "\" height=\"" +
       format_double(opt.size) + "\" fill=\"white\" stroke=\"black\"/>\n";
  if (opt.draw_crust) {
    for (const auto& line : chain_segments(segs)) {
      s += "<path d=\"";
      for (std::size_t i = 0; i < line.size(); ++i) {
        s += (i == 0 ? "M " : " L ") + fx(line[i][0]) + " " + fy(line[i][1]);
      }
      s += "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
    }
  }
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const Point& p = sites.point(k);
    s += "<circle cx=\"" + fx(p[0]) + "\" cy=\"" + fy(p[1]) + "\" r=\"" +
         format_double(opt.site_radius) + "\" fill=\"" +
         (sites.label(k) ? "#d62728" : "#1f77b4") + "\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

/// Scatter plot of 2D points (e.g. projected latent codes) colored by class.
inline std::string render_scatter_svg(std::span<const std::array<double, 2>> pts,
                                      std::span<const std::uint8_t> classes,
                                      const std::string& title) {
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  for (const auto& p : pts) {
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  auto norm = [&](double v, int d) {
    const double span = hi[d] - lo[d];
    return span > 0.0 ? (v - lo[d]) / span : 0.5;
  };
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"512\" height=\"512\" "
       "viewBox=\"0 0 512 512\">\n";
  s += "<text x=\"8\" y=\"16\" font-size=\"12\">" + title + "</text>\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = 16.0 + 480.0 * norm(pts[i][0], 0);
    const double y = 496.0 - 470.0 * norm(pts[i][1], 1);
    const char* color = classes.empty() ? "#333333" : kPalette[classes[i] % 10];
    s += "<circle cx=\"" + format_double(x) + "\" cy=\"" + format_double(y) +
         "\" r=\"2\" fill=\"" + color + "\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace voronet::io

#endif  // VORONET_IO_HPP
