#pragma once

#include <png.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "guis/error.hpp"
#include "guis/image.hpp"

namespace guis {

inline Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw FormatError("cannot read PNG " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return img;
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.empty()) throw EmptyImage();
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, img.data.data(), 0, nullptr))
    throw FormatError("cannot write PNG " + path.string() + ": " + png.message);
}

}  // namespace guis
