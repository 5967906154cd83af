#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

#include "guis/error.hpp"
#include "guis/image.hpp"

namespace guis {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

// Axis-aligned rectangle in pixel space, origin top-left, y grows downward.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  Point center() const noexcept { return {(x_min + x_max) / 2.0, (y_min + y_max) / 2.0}; }

  bool valid() const noexcept {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

// Intersection over union. Degenerate boxes (zero area) always give 0.
inline double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0 || inter <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

// Fraction of the child's area covered by the parent. Asymmetric on purpose:
// the hierarchy builder needs "how much of me lies inside you".
inline double containment_ratio(const BBox& child, const BBox& parent) noexcept {
  const double a = child.area();
  if (a <= 0.0) return 0.0;
  return std::clamp(intersection_area(child, parent) / a, 0.0, 1.0);
}

inline BBox clip(const BBox& b, double width, double height) noexcept {
  return {std::clamp(b.x_min, 0.0, width), std::clamp(b.y_min, 0.0, height),
          std::clamp(b.x_max, 0.0, width), std::clamp(b.y_max, 0.0, height)};
}

/// Projective transform of the plane, stored row-major with m[8] == 1 when
/// that entry is nonzero.
class Homography {
 public:
  Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}
  explicit Homography(const std::array<double, 9>& m) : m_(m) { normalize(); }

  static Homography identity() { return Homography(); }
  static Homography translation(double dx, double dy) {
    return Homography({1, 0, dx, 0, 1, dy, 0, 0, 1});
  }

  double operator()(int row, int col) const { return m_[static_cast<std::size_t>(row * 3 + col)]; }
  const std::array<double, 9>& matrix() const noexcept { return m_; }

  double determinant() const noexcept {
    const auto& m = m_;
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  bool invertible() const noexcept { return std::abs(determinant()) > 1e-12; }

  // Non-finite coordinates come back for points on the vanishing line.
  Point apply(Point p) const noexcept {
    const auto& m = m_;
    const double w = m[6] * p.x + m[7] * p.y + m[8];
    return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
  }

  Homography inverse() const {
    const auto& m = m_;
    const double det = determinant();
    if (!(std::abs(det) > 1e-12)) throw DegenerateQuad();
    std::array<double, 9> r{
        m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
        m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
        m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
    for (auto& v : r) v /= det;
    return Homography(r);
  }

  // (a * b)(p) == a(b(p))
  friend Homography operator*(const Homography& a, const Homography& b) {
    std::array<double, 9> r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
        r[static_cast<std::size_t>(i * 3 + j)] = s;
      }
    return Homography(r);
  }

 private:
  void normalize() noexcept {
    if (std::abs(m_[8]) > 1e-15 && m_[8] != 1.0) {
      const double s = m_[8];
      for (auto& v : m_) v /= s;
      m_[8] = 1.0;
    }
  }

  std::array<double, 9> m_;
};

namespace detail {

// Similarity transform taking the points to zero centroid and mean distance
// sqrt(2). Keeps the 8x8 system well conditioned for pixel-sized inputs.
inline Homography conditioning(std::span<const Point, 4> pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= 4.0;
  cy /= 4.0;
  double mean = 0.0;
  for (const auto& p : pts) mean += std::hypot(p.x - cx, p.y - cy);
  mean /= 4.0;
  if (!(mean > 0.0) || !std::isfinite(mean)) throw DegenerateQuad();
  const double s = std::sqrt(2.0) / mean;
  return Homography({s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1});
}

inline bool has_collinear_triple(std::span<const Point, 4> pts) {
  double scale = 0.0;
  for (const auto& p : pts)
    for (const auto& q : pts) scale = std::max(scale, distance(p, q));
  if (!(scale > 0.0)) return true;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      for (std::size_t k = j + 1; k < 4; ++k) {
        const double cross = (pts[j].x - pts[i].x) * (pts[k].y - pts[i].y) -
                             (pts[j].y - pts[i].y) * (pts[k].x - pts[i].x);
        if (std::abs(cross) <= 1e-9 * scale * scale) return true;
      }
  return false;
}

// Gaussian elimination with partial pivoting; returns false when singular.
inline bool solve8(std::array<std::array<double, 9>, 8>& a, std::array<double, 8>& x) {
  for (std::size_t col = 0; col < 8; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < 8; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12) return false;
    std::swap(a[pivot], a[col]);
    for (std::size_t r = col + 1; r < 8; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
    }
  }
  for (std::size_t i = 8; i-- > 0;) {
    double s = a[i][8];
    for (std::size_t c = i + 1; c < 8; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return true;
}

}  // namespace detail

/// Direct linear transform from four point correspondences.
/// Throws DegenerateQuad if either quad has three collinear points or the
/// system is singular.
inline Homography homography_from_quad(std::span<const Point, 4> src, std::span<const Point, 4> dst) {
  for (const auto& p : src)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DegenerateQuad();
  for (const auto& p : dst)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DegenerateQuad();
  if (detail::has_collinear_triple(src) || detail::has_collinear_triple(dst)) throw DegenerateQuad();

  const Homography ts = detail::conditioning(src);
  const Homography td = detail::conditioning(dst);

  std::array<std::array<double, 9>, 8> a{};
  for (std::size_t i = 0; i < 4; ++i) {
    const Point s = ts.apply(src[i]);
    const Point d = td.apply(dst[i]);
    a[2 * i] = {s.x, s.y, 1, 0, 0, 0, -s.x * d.x, -s.y * d.x, d.x};
    a[2 * i + 1] = {0, 0, 0, s.x, s.y, 1, -s.x * d.y, -s.y * d.y, d.y};
  }
  std::array<double, 8> h{};
  if (!detail::solve8(a, h)) throw DegenerateQuad();
  const Homography normalized({h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0});
  Homography result = td.inverse() * normalized * ts;
  if (!result.invertible()) throw DegenerateQuad();
  return result;
}

inline Homography homography_from_quad(const std::array<Point, 4>& src, const std::array<Point, 4>& dst) {
  return homography_from_quad(std::span<const Point, 4>(src), std::span<const Point, 4>(dst));
}

namespace detail {

inline double clamp_coord(double v, int size) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, 0.0, static_cast<double>(size - 1));
}

// Bilinear sample with edge replication; result rounded half-to-even.
inline void sample_bilinear(const Image& img, double sx, double sy, std::uint8_t* out) {
  sx = clamp_coord(sx, img.width);
  sy = clamp_coord(sy, img.height);
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  for (int c = 0; c < Image::kChannels; ++c) {
    const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
    const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
    const double v = (1.0 - fy) * top + fy * bottom;
    out[c] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
  }
}

}  // namespace detail

/// Resamples `img` so that out(p) = img(h^-1(p)). Pixel (x, y) sits at integer
/// coordinates (x, y); samples outside the source replicate the nearest edge.
inline Image warp_perspective(const Image& img, const Homography& h, int out_width, int out_height) {
  if (img.empty()) throw EmptyImage();
  if (out_width <= 0 || out_height <= 0) throw EmptyImage();
  const Homography inv = h.inverse();
  Image out(out_width, out_height);
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < out_width; ++x) {
      const Point s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      detail::sample_bilinear(img, s.x, s.y, out.pixel(x, y));
    }
  return out;
}

inline Image warp_perspective(const Image& img, const Homography& h) {
  return warp_perspective(img, h, img.width, img.height);
}

}  // namespace guis
