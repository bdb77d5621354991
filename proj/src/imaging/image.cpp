#include "revhalf/image.hpp"

#include <algorithm>
#include <numeric>

namespace revhalf {

namespace {

void check_dims(int height, int width) {
  if (height < 0 || width < 0) throw DimensionError("negative raster dimension");
}

void check_unit(const Plane& p, const char* what) {
  for (double v : p.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw RangeError(std::string(what) + ": value outside [0,1]");
    }
  }
}

Plane clip_unit(Plane p) {
  for (double& v : p.values()) v = std::clamp(v, 0.0, 1.0);
  return p;
}

}  // namespace

Plane::Plane(int height, int width, double fill)
    : height_(height), width_(width) {
  check_dims(height, width);
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

Plane::Plane(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_dims(height, width);
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("plane value count does not match dimensions");
  }
}

double Plane::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double Plane::min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
double Plane::max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

void require_same_shape(const Plane& a, const Plane& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
  }
}

GrayImage::GrayImage(Plane plane) : plane_(std::move(plane)) { check_unit(plane_, "GrayImage"); }

GrayImage::GrayImage(int height, int width, double fill) : GrayImage(Plane(height, width, fill)) {}

GrayImage GrayImage::clipped(Plane plane) { return GrayImage(clip_unit(std::move(plane))); }

ChromaImage::ChromaImage(Plane cb, Plane cr) : cb_(std::move(cb)), cr_(std::move(cr)) {
  require_same_shape(cb_, cr_, "ChromaImage");
  check_unit(cb_, "ChromaImage.cb");
  check_unit(cr_, "ChromaImage.cr");
}

ChromaImage ChromaImage::neutral(int height, int width) {
  return ChromaImage(Plane(height, width, 0.5), Plane(height, width, 0.5));
}

ColorImage::ColorImage(Plane r, Plane g, Plane b) {
  require_same_shape(r, g, "ColorImage");
  require_same_shape(r, b, "ColorImage");
  if (r.height() < 8 || r.width() < 8 || r.height() % 8 != 0 || r.width() % 8 != 0) {
    throw DimensionError("ColorImage dimensions must be >= 8 and divisible by 8, got " +
                         std::to_string(r.height()) + "x" + std::to_string(r.width()));
  }
  check_unit(r, "ColorImage.r");
  check_unit(g, "ColorImage.g");
  check_unit(b, "ColorImage.b");
  planes_ = {std::move(r), std::move(g), std::move(b)};
}

ColorImage::ColorImage(int height, int width, double r, double g, double b)
    : ColorImage(Plane(height, width, r), Plane(height, width, g), Plane(height, width, b)) {}

ColorImage ColorImage::clipped(Plane r, Plane g, Plane b) {
  return ColorImage(clip_unit(std::move(r)), clip_unit(std::move(g)), clip_unit(std::move(b)));
}

BinaryImage::BinaryImage(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  check_dims(height, width);
  if (fill > 1) throw RangeError("BinaryImage fill must be 0 or 1");
  bits_.assign(static_cast<std::size_t>(height) * width, fill);
}

BinaryImage::BinaryImage(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  check_dims(height, width);
  if (bits_.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("binary image bit count does not match dimensions");
  }
  for (auto b : bits_) {
    if (b > 1) throw RangeError("BinaryImage values must be 0 or 1");
  }
}

double BinaryImage::mean() const {
  if (bits_.empty()) return 0.0;
  std::size_t ones = std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
  return static_cast<double>(ones) / static_cast<double>(bits_.size());
}

Plane BinaryImage::to_plane() const {
  Plane p(height_, width_);
  for (std::size_t i = 0; i < bits_.size(); ++i) p[i] = bits_[i];
  return p;
}

BinaryImage BinaryImage::from_plane(const Plane& plane, bool strict) {
  std::vector<std::uint8_t> bits(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    double v = plane[i];
    if (strict && v != 0.0 && v != 1.0) throw RangeError("non-binary value in strict binary input");
    bits[i] = v >= 0.5 ? 1 : 0;
  }
  return BinaryImage(plane.height(), plane.width(), std::move(bits));
}

double binarity(const Plane& plane) {
  if (plane.empty()) return 1.0;
  std::size_t n = 0;
  for (double v : plane.values()) n += (v == 0.0 || v == 1.0) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(plane.size());
}

}  // namespace revhalf
