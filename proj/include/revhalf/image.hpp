#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace revhalf {

/// Raised when two rasters that must agree in size do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when raster values violate the range a type promises.
class RangeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Row-major grid of reals. No range restriction; the typed images below add one.
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, double fill = 0.0);
  Plane(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(int y, int x) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double mean() const;
  double min() const;
  double max() const;

  bool same_shape(const Plane& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

void require_same_shape(const Plane& a, const Plane& b, const char* what);

/// Single-channel image with every value in [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  explicit GrayImage(Plane plane);
  GrayImage(int height, int width, double fill = 0.0);

  int height() const { return plane_.height(); }
  int width() const { return plane_.width(); }
  double at(int y, int x) const { return plane_.at(y, x); }
  const Plane& plane() const { return plane_; }
  double mean() const { return plane_.mean(); }

  /// Clips every value into [0,1] before wrapping.
  static GrayImage clipped(Plane plane);

 private:
  Plane plane_;
};

/// Cb/Cr planes in [0,1] with neutral chroma at 0.5.
class ChromaImage {
 public:
  ChromaImage() = default;
  ChromaImage(Plane cb, Plane cr);

  int height() const { return cb_.height(); }
  int width() const { return cb_.width(); }
  const Plane& cb() const { return cb_; }
  const Plane& cr() const { return cr_; }

  static ChromaImage neutral(int height, int width);

 private:
  Plane cb_;
  Plane cr_;
};

/// RGB image; values in [0,1], both dimensions at least 8 and divisible by 8.
class ColorImage {
 public:
  ColorImage() = default;
  ColorImage(Plane r, Plane g, Plane b);
  ColorImage(int height, int width, double r, double g, double b);

  int height() const { return planes_[0].height(); }
  int width() const { return planes_[0].width(); }
  const Plane& channel(int c) const { return planes_[static_cast<std::size_t>(c)]; }
  const Plane& r() const { return planes_[0]; }
  const Plane& g() const { return planes_[1]; }
  const Plane& b() const { return planes_[2]; }

  static ColorImage clipped(Plane r, Plane g, Plane b);

 private:
  std::vector<Plane> planes_;
};

/// Strictly binary raster. Stored one byte per pixel, each 0 or 1.
class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(int height, int width, std::uint8_t fill = 0);
  BinaryImage(int height, int width, std::vector<std::uint8_t> bits);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return bits_.size(); }

  std::uint8_t at(int y, int x) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int y, int x, bool on) { bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  double mean() const;
  Plane to_plane() const;
  GrayImage to_gray() const { return GrayImage(to_plane()); }

  /// Thresholds at 0.5 with ties going to 1. Throws RangeError if `strict`
  /// and any value is not exactly 0 or 1.
  static BinaryImage from_plane(const Plane& plane, bool strict = false);

  bool operator==(const BinaryImage&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Fraction of pixels that are exactly 0 or 1.
double binarity(const Plane& plane);

}  // namespace revhalf
