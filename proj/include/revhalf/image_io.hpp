#pragma once

#include <filesystem>
#include <stdexcept>

#include "revhalf/image.hpp"

namespace revhalf {

/// Raised when a file cannot be read, decoded, or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded 8-bit raster of 1 (gray) or 3 (RGB) planes, any size. Alpha is dropped
/// and gray sources are expanded to RGB by read_png_rgb.
struct RgbRaster {
  Plane r, g, b;
  int height() const { return r.height(); }
  int width() const { return r.width(); }
};

RgbRaster read_png_rgb(const std::filesystem::path& path);
Plane read_png_gray(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const ColorImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);
/// 0 -> 0, 1 -> 255.
void write_png(const std::filesystem::path& path, const BinaryImage& img);

/// Netpbm P4, one bit per pixel, 1 = black in the file. Stored so that a
/// halftone value 1 (white) maps to a 0 bit.
void write_pbm(const std::filesystem::path& path, const BinaryImage& img);
BinaryImage read_pbm(const std::filesystem::path& path);

/// Loads a halftone from .pbm or .png (any nonzero gray value is 1).
BinaryImage read_halftone(const std::filesystem::path& path);

/// Center-crop to a square, then area-resample to target x target.
RgbRaster center_crop_resize(const RgbRaster& src, int target);

ColorImage to_color_image(RgbRaster raster);

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace revhalf
