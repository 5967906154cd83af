#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "guis/error.hpp"
#include "guis/geometry.hpp"
#include "guis/image.hpp"
#include "json.hpp"

namespace guis {

/// SplitMix64 over a counter, keyed by (seed, image index, op index), so each
/// image/op pair draws the same stream no matter how a batch is scheduled.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t image_index, std::uint64_t op_index)
      : key_(mix(mix(mix(seed) ^ image_index) ^ (op_index + 0x632BE59BD9B4E019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    return r * std::cos(t);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_;
};

enum class LightKind { Linear, Radial };

struct LightMask {
  double strength = 0.0;  // in [-1, 1]
  LightKind kind = LightKind::Linear;
  Point anchor{0.0, 0.5};  // normalized image coordinates
  double direction_deg = 0.0;  // ramp direction for Linear; 0 is left-to-right
};

namespace detail {

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

}  // namespace detail

/// out = clamp(in * (1 + strength * g)), g in [0, 1]. Linear: g ramps from 0
/// at the anchor to 1 at the farthest corner along the direction. Radial: g is
/// 1 at the anchor and falls to 0 at the farthest corner.
inline Image light_mask(const Image& img, const LightMask& mask) {
  if (img.empty()) throw EmptyImage();
  if (!(mask.strength >= -1.0 && mask.strength <= 1.0))
    throw std::invalid_argument("light strength must be in [-1, 1]");
  if (mask.strength == 0.0) return img;

  const double rad = mask.direction_deg * std::numbers::pi / 180.0;
  const Point dir{std::cos(rad), std::sin(rad)};
  const std::array<Point, 4> corners{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};
  double reach = 0.0;
  for (const auto& c : corners) {
    reach = mask.kind == LightKind::Linear
                ? std::max(reach, (c.x - mask.anchor.x) * dir.x + (c.y - mask.anchor.y) * dir.y)
                : std::max(reach, distance(c, mask.anchor));
  }

  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    const double ny = img.height > 1 ? static_cast<double>(y) / (img.height - 1) : 0.0;
    for (int x = 0; x < img.width; ++x) {
      const double nx = img.width > 1 ? static_cast<double>(x) / (img.width - 1) : 0.0;
      double g = 0.0;
      if (mask.kind == LightKind::Linear) {
        const double proj = (nx - mask.anchor.x) * dir.x + (ny - mask.anchor.y) * dir.y;
        g = reach > 0.0 ? std::clamp(proj / reach, 0.0, 1.0) : 0.0;
      } else {
        g = reach > 0.0 ? std::clamp(1.0 - distance({nx, ny}, mask.anchor) / reach, 0.0, 1.0) : 1.0;
      }
      const double gain = 1.0 + mask.strength * g;
      std::uint8_t* p = out.pixel(x, y);
      for (int c = 0; c < Image::kChannels; ++c) p[c] = detail::clamp_u8(p[c] * gain);
    }
  }
  return out;
}

/// Adds round(sigma * N(0, 1)) to every sample, clamped to [0, 255].
inline Image gaussian_noise(const Image& img, double sigma, CounterRng& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  Image out = img;
  for (auto& v : out.data) {
    const int delta = static_cast<int>(std::nearbyint(sigma * rng.normal()));
    v = static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + delta, 0, 255));
  }
  return out;
}

/// Rotation about the image centre ((w-1)/2, (h-1)/2). Positive angles turn
/// the content counter-clockwise as seen on screen.
inline Homography rotation_homography(int width, int height, double angle_deg) {
  double c = 0.0, s = 0.0;
  const double quarter = angle_deg / 90.0;
  if (quarter == std::round(quarter)) {
    static constexpr std::array<std::pair<double, double>, 4> kExact{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};
    const auto k = static_cast<std::size_t>(((static_cast<long long>(quarter) % 4) + 4) % 4);
    c = kExact[k].first;
    s = kExact[k].second;
  } else {
    const double rad = angle_deg * std::numbers::pi / 180.0;
    c = std::cos(rad);
    s = std::sin(rad);
  }
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  return Homography::translation(cx, cy) * Homography({c, s, 0, -s, c, 0, 0, 0, 1}) *
         Homography::translation(-cx, -cy);
}

inline Image rotate(const Image& img, double angle_deg) {
  if (img.empty()) throw EmptyImage();
  if (angle_deg == 0.0) return img;
  return warp_perspective(img, rotation_homography(img.width, img.height, angle_deg));
}

struct WarpResult {
  Image image;
  Homography transform;
};

/// Moves each image corner uniformly within +-jitter * (w, h) and warps the
/// image onto the displaced quad. Degenerate draws are redrawn up to 5 times.
inline WarpResult perspective_jitter(const Image& img, double jitter, CounterRng& rng) {
  if (img.empty()) throw EmptyImage();
  if (!(jitter >= 0.0 && jitter <= 0.1)) throw std::invalid_argument("perspective jitter must be in [0, 0.1]");
  if (jitter == 0.0) return {img, Homography::identity()};
  const double w = img.width;
  const double h = img.height;
  const std::array<Point, 4> src{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
  for (int attempt = 0; attempt < 5; ++attempt) {
    std::array<Point, 4> dst = src;
    for (auto& p : dst) {
      p.x += rng.uniform(-jitter, jitter) * w;
      p.y += rng.uniform(-jitter, jitter) * h;
    }
    try {
      const Homography hm = homography_from_quad(src, dst);
      return {warp_perspective(img, hm), hm};
    } catch (const DegenerateQuad&) {
    }
  }
  throw DegenerateQuad();
}

// ---------------------------------------------------------------------------
// Pipeline

enum AugmentOp : unsigned { kOpLight = 1u << 0, kOpNoise = 1u << 1, kOpRotate = 1u << 2, kOpPerspective = 1u << 3 };

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentConfig {
  std::uint64_t seed = 0;
  Range light_strength{-0.4, 0.4};
  Range noise_sigma{2.0, 10.0};
  Range rotation_deg{-5.0, 5.0};
  double perspective_jitter = 0.02;
  unsigned ops = kOpLight | kOpNoise | kOpRotate | kOpPerspective;

  void validate() const {
    auto ordered = [](const Range& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; };
    if (!ordered(light_strength) || light_strength.lo < -1.0 || light_strength.hi > 1.0)
      throw FormatError("light_strength_range must be ordered within [-1, 1]");
    if (!ordered(noise_sigma) || noise_sigma.lo < 0.0) throw FormatError("noise_sigma_range must be ordered and >= 0");
    if (!ordered(rotation_deg)) throw FormatError("rotation_range must be ordered");
    if (!(perspective_jitter >= 0.0 && perspective_jitter <= 0.1))
      throw FormatError("perspective_jitter must be in [0, 0.1]");
  }
};

struct AugmentResult {
  Image image;
  // Geometric part of the augmentation (rotation then perspective), for
  // callers that need to move annotations along with the pixels.
  Homography transform;
  std::optional<LightMask> light;
  std::optional<double> noise_sigma;
  std::optional<double> rotation_deg;
};

/// light -> noise -> rotate -> perspective, each op drawing from its own
/// CounterRng(seed, image_index, op).
inline AugmentResult augment_pipeline(const Image& img, const AugmentConfig& cfg, std::uint64_t image_index = 0) {
  if (img.empty()) throw EmptyImage();
  cfg.validate();
  AugmentResult r{img, Homography::identity(), std::nullopt, std::nullopt, std::nullopt};

  if (cfg.ops & kOpLight) {
    CounterRng rng(cfg.seed, image_index, 0);
    LightMask m;
    m.strength = rng.uniform(cfg.light_strength.lo, cfg.light_strength.hi);
    m.kind = rng.uniform() < 0.5 ? LightKind::Linear : LightKind::Radial;
    m.anchor = {rng.uniform(), rng.uniform()};
    m.direction_deg = rng.uniform(0.0, 360.0);
    r.image = light_mask(r.image, m);
    r.light = m;
  }
  if (cfg.ops & kOpNoise) {
    CounterRng rng(cfg.seed, image_index, 1);
    const double sigma = rng.uniform(cfg.noise_sigma.lo, cfg.noise_sigma.hi);
    r.image = gaussian_noise(r.image, sigma, rng);
    r.noise_sigma = sigma;
  }
  if (cfg.ops & kOpRotate) {
    CounterRng rng(cfg.seed, image_index, 2);
    const double angle = rng.uniform(cfg.rotation_deg.lo, cfg.rotation_deg.hi);
    r.image = rotate(r.image, angle);
    if (angle != 0.0) r.transform = rotation_homography(img.width, img.height, angle) * r.transform;
    r.rotation_deg = angle;
  }
  if (cfg.ops & kOpPerspective) {
    CounterRng rng(cfg.seed, image_index, 3);
    auto warped = perspective_jitter(r.image, cfg.perspective_jitter, rng);
    r.image = std::move(warped.image);
    r.transform = warped.transform * r.transform;
  }
  return r;
}

inline void from_json(const nlohmann::json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw FormatError("range must be [lo, hi]");
  r = {j[0].get<double>(), j[1].get<double>()};
}

inline void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }

inline void from_json(const nlohmann::json& j, AugmentConfig& c) {
  c = AugmentConfig{};
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("light_strength_range")) c.light_strength = j.at("light_strength_range").get<Range>();
  if (j.contains("noise_sigma_range")) c.noise_sigma = j.at("noise_sigma_range").get<Range>();
  if (j.contains("rotation_range")) c.rotation_deg = j.at("rotation_range").get<Range>();
  c.perspective_jitter = j.value("perspective_jitter", c.perspective_jitter);
  if (j.contains("ops")) {
    c.ops = 0;
    for (const auto& op : j.at("ops")) {
      const auto name = op.get<std::string>();
      if (name == "light")
        c.ops |= kOpLight;
      else if (name == "noise")
        c.ops |= kOpNoise;
      else if (name == "rotate")
        c.ops |= kOpRotate;
      else if (name == "perspective")
        c.ops |= kOpPerspective;
      else
        throw FormatError("unknown augmentation op: " + name);
    }
  }
  c.validate();
}

inline void to_json(nlohmann::json& j, const AugmentConfig& c) {
  nlohmann::json ops = nlohmann::json::array();
  if (c.ops & kOpLight) ops.push_back("light");
  if (c.ops & kOpNoise) ops.push_back("noise");
  if (c.ops & kOpRotate) ops.push_back("rotate");
  if (c.ops & kOpPerspective) ops.push_back("perspective");
  j = nlohmann::json{{"seed", c.seed},
                     {"light_strength_range", c.light_strength},
                     {"noise_sigma_range", c.noise_sigma},
                     {"rotation_range", c.rotation_deg},
                     {"perspective_jitter", c.perspective_jitter},
                     {"ops", ops}};
}

}  // namespace guis
