#ifndef VORONET_PREDICATES_HPP
#define VORONET_PREDICATES_HPP

// Orientation and in-circle tests with exact sign. A floating-point filter
// decides most calls; when the result is inside the rounding-error bound the
// determinant is re-evaluated exactly with floating-point expansions
// (sums of non-overlapping doubles, Shewchuk-style).

#include <cmath>
#include <vector>

#include "voronet/common.hpp"

namespace voronet::predicates {

namespace detail {

inline constexpr double kEpsilon = 0x1.0p-53;
inline constexpr double kOrientBound = (3.0 + 16.0 * kEpsilon) * kEpsilon;
inline constexpr double kInCircleBound = (10.0 + 96.0 * kEpsilon) * kEpsilon;

inline void two_sum(double a, double b, double& x, double& y) {
  x = a + b;
  const double bv = x - a;
  const double av = x - bv;
  y = (a - av) + (b - bv);
}

inline void two_product(double a, double b, double& x, double& y) {
  x = a * b;
  y = std::fma(a, b, -x);
}

/// Exact value as a sum of non-overlapping components in increasing
/// magnitude, zeros eliminated.
class Expansion {
 public:
  Expansion() = default;
  explicit Expansion(double a) {
    if (a != 0.0) terms_.push_back(a);
  }

  static Expansion difference(double a, double b) {
    double x, y;
    two_sum(a, -b, x, y);
    Expansion e;
    if (y != 0.0) e.terms_.push_back(y);
    if (x != 0.0) e.terms_.push_back(x);
    return e;
  }

  int sign() const {
    if (terms_.empty()) return 0;
    return terms_.back() > 0.0 ? 1 : -1;
  }

  friend Expansion operator+(const Expansion& e, const Expansion& f) {
    Expansion out = e;
    for (double b : f.terms_) out.grow(b);
    return out;
  }

  friend Expansion operator-(const Expansion& e, const Expansion& f) {
    Expansion out = e;
    for (double b : f.terms_) out.grow(-b);
    return out;
  }

  friend Expansion operator*(const Expansion& e, const Expansion& f) {
    Expansion out;
    for (double b : f.terms_) out = out + e.scaled(b);
    return out;
  }

 private:
  // Adds a single double (grow-expansion with zero elimination).
  void grow(double b) {
    std::vector<double> h;
    h.reserve(terms_.size() + 1);
    double q = b;
    for (double e : terms_) {
      double sum, err;
      two_sum(q, e, sum, err);
      if (err != 0.0) h.push_back(err);
      q = sum;
    }
    if (q != 0.0 || h.empty()) h.push_back(q);
    if (h.size() == 1 && h[0] == 0.0) h.clear();
    terms_ = std::move(h);
  }

  // Multiplies by a single double (scale-expansion with zero elimination).
  Expansion scaled(double b) const {
    Expansion out;
    if (terms_.empty() || b == 0.0) return out;
    std::vector<double>& h = out.terms_;
    double q, hh;
    two_product(terms_[0], b, q, hh);
    if (hh != 0.0) h.push_back(hh);
    for (std::size_t i = 1; i < terms_.size(); ++i) {
      double p1, p0;
      two_product(terms_[i], b, p1, p0);
      double sum;
      two_sum(q, p0, sum, hh);
      if (hh != 0.0) h.push_back(hh);
      two_sum(p1, sum, q, hh);
      if (hh != 0.0) h.push_back(hh);
    }
    if (q != 0.0) h.push_back(q);
    return out;
  }

  std::vector<double> terms_;
};

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

inline int orient2d_exact(const Point& a, const Point& b, const Point& c) {
  const Expansion acx = Expansion::difference(a[0], c[0]);
  const Expansion acy = Expansion::difference(a[1], c[1]);
  const Expansion bcx = Expansion::difference(b[0], c[0]);
  const Expansion bcy = Expansion::difference(b[1], c[1]);
  return (acx * bcy - acy * bcx).sign();
}

inline int incircle_exact(const Point& a, const Point& b, const Point& c,
                          const Point& d) {
  const Expansion adx = Expansion::difference(a[0], d[0]);
  const Expansion ady = Expansion::difference(a[1], d[1]);
  const Expansion bdx = Expansion::difference(b[0], d[0]);
  const Expansion bdy = Expansion::difference(b[1], d[1]);
  const Expansion cdx = Expansion::difference(c[0], d[0]);
  const Expansion cdy = Expansion::difference(c[1], d[1]);
  const Expansion alift = adx * adx + ady * ady;
  const Expansion blift = bdx * bdx + bdy * bdy;
  const Expansion clift = cdx * cdx + cdy * cdy;
  const Expansion det = alift * (bdx * cdy - bdy * cdx) +
                        blift * (cdx * ady - cdy * adx) +
                        clift * (adx * bdy - ady * bdx);
  return det.sign();
}

}  // namespace detail

/// +1 if a, b, c turn counter-clockwise, -1 if clockwise, 0 if collinear.
inline int orient2d(const Point& a, const Point& b, const Point& c) {
  const double left = (a[0] - c[0]) * (b[1] - c[1]);
  const double right = (a[1] - c[1]) * (b[0] - c[0]);
  const double det = left - right;
  const double bound = detail::kOrientBound * (std::abs(left) + std::abs(right));
  if (det > bound || -det > bound) return detail::sign_of(det);
  return detail::orient2d_exact(a, b, c);
}

/// For counter-clockwise a, b, c: +1 if d lies strictly inside their
/// circumcircle, -1 if strictly outside, 0 if cocircular.
inline int incircle(const Point& a, const Point& b, const Point& c,
                    const Point& d) {
  const double adx = a[0] - d[0], ady = a[1] - d[1];
  const double bdx = b[0] - d[0], bdy = b[1] - d[1];
  const double cdx = c[0] - d[0], cdy = c[1] - d[1];
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                     clift * (adxbdy - bdxady);
  const double permanent =
      (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
      (std::abs(cdxady) + std::abs(adxcdy)) * blift +
      (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = detail::kInCircleBound * permanent;
  if (det > bound || -det > bound) return detail::sign_of(det);
  return detail::incircle_exact(a, b, c, d);
}

}  // namespace voronet::predicates

#endif  // VORONET_PREDICATES_HPP
