#ifndef VORONET_COMMON_HPP
#define VORONET_COMMON_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace voronet {

enum class ErrorKind {
  kInvalidArgument,
  kDegenerateInput,
  kDuplicatePoints,
  kOutOfDomain,
  kEmptyPhase,
  kShapeMismatch,
  kBadMagic,
  kTruncatedFile,
  kDimMismatch,
  kNoEligibleTriangle,
  kEmptySet,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kDegenerateInput: return "DegenerateInput";
    case ErrorKind::kDuplicatePoints: return "DuplicatePoints";
    case ErrorKind::kOutOfDomain: return "OutOfDomain";
    case ErrorKind::kEmptyPhase: return "EmptyPhase";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kTruncatedFile: return "TruncatedFile";
    case ErrorKind::kDimMismatch: return "DimMismatch";
    case ErrorKind::kNoEligibleTriangle: return "NoEligibleTriangle";
    case ErrorKind::kEmptySet: return "EmptySet";
    case ErrorKind::kIo: return "Io";
  }
  return "Unknown";
}

/// Library-wide exception. `kind()` identifies the failure class so callers
/// can react to specific conditions (e.g. EmptyPhase) without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// A point in R^2 or R^3. 2D points keep z = 0; the active dimension always
/// travels alongside (SiteSet::dim(), GridOccupancy::dim(), ...).
using Point = std::array<double, 3>;

inline double squared_distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return s;
}

inline double distance(const Point& a, const Point& b, int dim) {
  return std::sqrt(squared_distance(a, b, dim));
}

inline bool is_finite(const Point& p) {
  return std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]);
}

inline void check_dim(int dim) {
  if (dim != 2 && dim != 3) {
    throw Error(ErrorKind::kInvalidArgument,
                "dimension must be 2 or 3, got " + std::to_string(dim));
  }
}

/// Seeded random stream. mt19937_64 has a standardized output sequence and
/// the double conversion below is done by hand, so streams are identical
/// across standard libraries (std::uniform_real_distribution is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(engine_() % n);
  }

  /// Derive an independent child seed (splitmix64 of the next draw).
  std::uint64_t fork_seed() {
    std::uint64_t z = engine_() + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

/// Pairwise (tree) summation. The reduction order depends only on the length
/// of the input, never on how the terms were produced.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace voronet

#endif  // VORONET_COMMON_HPP
