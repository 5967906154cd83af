#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace guis {

// 8-bit RGB raster, row-major, interleaved.
struct Image {
  static constexpr int kChannels = 3;

  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * kChannels, fill) {
    if (w < 0 || h < 0) throw std::invalid_argument("negative image dimensions");
  }

  bool empty() const noexcept { return width <= 0 || height <= 0 || data.empty(); }

  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * kChannels;
  }
  std::uint8_t at(int x, int y, int c) const noexcept { return data[offset(x, y) + c]; }
  std::uint8_t& at(int x, int y, int c) noexcept { return data[offset(x, y) + c]; }
  std::uint8_t* pixel(int x, int y) noexcept { return data.data() + offset(x, y); }
  const std::uint8_t* pixel(int x, int y) const noexcept { return data.data() + offset(x, y); }

  friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace guis
