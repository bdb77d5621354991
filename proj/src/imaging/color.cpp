#include <algorithm>
#include <cmath>
#include <limits>

#include "revhalf/imaging.hpp"

namespace revhalf {

YCbCr rgb_to_ycbcr(const ColorImage& img) {
  const int h = img.height();
  const int w = img.width();
  Plane y(h, w), cb(h, w), cr(h, w);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = img.r()[i], g = img.g()[i], b = img.b()[i];
    const double luma = kLumaR * r + kLumaG * g + kLumaB * b;
    y[i] = std::clamp(luma, 0.0, 1.0);
    cb[i] = std::clamp((b - luma) / kCbScale + 0.5, 0.0, 1.0);
    cr[i] = std::clamp((r - luma) / kCrScale + 0.5, 0.0, 1.0);
  }
  return {GrayImage(std::move(y)), ChromaImage(std::move(cb), std::move(cr))};
}

GrayImage luminance(const ColorImage& img) {
  Plane y(img.height(), img.width());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = std::clamp(kLumaR * img.r()[i] + kLumaG * img.g()[i] + kLumaB * img.b()[i], 0.0, 1.0);
  }
  return GrayImage(std::move(y));
}

std::vector<Plane> ycbcr_to_rgb_raw(const Plane& y, const Plane& cb, const Plane& cr) {
  require_same_shape(y, cb, "ycbcr_to_rgb");
  require_same_shape(y, cr, "ycbcr_to_rgb");
  Plane r(y.height(), y.width()), g(y.height(), y.width()), b(y.height(), y.width());
  for (std::size_t i = 0; i < y.size(); ++i) {
    r[i] = y[i] + kCrScale * (cr[i] - 0.5);
    b[i] = y[i] + kCbScale * (cb[i] - 0.5);
    g[i] = (y[i] - kLumaR * r[i] - kLumaB * b[i]) / kLumaG;
  }
  return {std::move(r), std::move(g), std::move(b)};
}

ColorImage ycbcr_to_rgb(const GrayImage& y, const ChromaImage& c) {
  auto rgb = ycbcr_to_rgb_raw(y.plane(), c.cb(), c.cr());
  return ColorImage::clipped(std::move(rgb[0]), std::move(rgb[1]), std::move(rgb[2]));
}

GrayImage error_map(const ColorImage& a, const ColorImage& b) {
  require_same_shape(a.r(), b.r(), "error_map");
  Plane out(a.height(), a.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += std::abs(a.channel(c)[i] - b.channel(c)[i]);
    out[i] = std::min(1.0, s / 3.0);
  }
  return GrayImage(std::move(out));
}

double color_mse(const ColorImage& a, const ColorImage& b) {
  require_same_shape(a.r(), b.r(), "color_mse");
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < a.r().size(); ++i) {
      const double d = a.channel(c)[i] - b.channel(c)[i];
      s += d * d;
    }
  }
  return s / (3.0 * static_cast<double>(a.r().size()));
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace revhalf
