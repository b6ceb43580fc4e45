#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "synthview/error.hpp"
#include "synthview/image.hpp"

namespace synthview {

/// Reads any PNG as 8-bit RGB. Alpha is dropped, gray and palette images are expanded.
inline RgbImage read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("cannot open '" + path.string() + "': no such file");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw InputError("'" + path.string() + "' is not a readable PNG: " + msg);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw InputError("failed decoding '" + path.string() + "': " + msg);
  }
  return RgbImage(static_cast<int>(image.width), static_cast<int>(image.height), std::move(pixels));
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels().data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write '" + path.string() + "': " + msg);
  }
}

/// Mask as an RGB image: white inside, black outside.
inline RgbImage mask_to_image(const MaskRaster& mask) {
  RgbImage img(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) img.set(x, y, {255, 255, 255});
    }
  }
  return img;
}

/// Any nonzero channel counts as in-mask.
inline MaskRaster image_to_mask(const RgbImage& img) {
  MaskRaster mask(img.width(), img.height(), 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb8 c = img.at(x, y);
      mask(x, y) = (c.r | c.g | c.b) != 0 ? 1 : 0;
    }
  }
  return mask;
}

}  // namespace synthview
