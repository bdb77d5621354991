#include "revhalf/halftone.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "revhalf/imaging.hpp"
#include "revhalf/random.hpp"

namespace revhalf {

namespace detail {
extern const std::array<std::array<int, 4>, 128> kOstromoukhovTable;
}

DiffusionKernel::DiffusionKernel(std::vector<DiffusionTap> taps) : taps_(std::move(taps)) {
  for (const auto& t : taps_) {
    if (t.dy < 0 || (t.dy == 0 && t.dx <= 0)) {
      throw std::invalid_argument("diffusion tap targets an already visited pixel");
    }
  }
  if (std::abs(weight_sum() - 1.0) > 1e-9) throw std::invalid_argument("diffusion weights must sum to 1");
}

double DiffusionKernel::weight_sum() const {
  return std::accumulate(taps_.begin(), taps_.end(), 0.0,
                         [](double s, const DiffusionTap& t) { return s + t.weight; });
}

const DiffusionKernel& floyd_steinberg_kernel() {
  static const DiffusionKernel k({{0, 1, 7.0 / 16}, {1, -1, 3.0 / 16}, {1, 0, 5.0 / 16}, {1, 1, 1.0 / 16}});
  return k;
}

DiffusionKernel ostromoukhov_kernel(int level) {
  level = std::clamp(level, 0, 255);
  const auto& e = detail::kOstromoukhovTable[static_cast<std::size_t>(level < 128 ? level : 255 - level)];
  const double sum = e[3];
  return DiffusionKernel({{0, 1, e[0] / sum}, {1, -1, e[1] / sum}, {1, 0, e[2] / sum}});
}

BinaryImage error_diffuse(const GrayImage& img,
                          const std::function<const DiffusionKernel&(int level)>& kernel_for) {
  const int h = img.height();
  const int w = img.width();
  // Carried error for the current row and the rows below it; three rows covers
  // every kernel used here.
  constexpr int kRows = 3;
  std::vector<std::vector<double>> err(kRows, std::vector<double>(static_cast<std::size_t>(w), 0.0));
  BinaryImage out(h, w);
  for (int y = 0; y < h; ++y) {
    const bool forward = (y % 2) == 0;
    for (int i = 0; i < w; ++i) {
      const int x = forward ? i : w - 1 - i;
      const double in = img.at(y, x);
      const double v = in + err[0][static_cast<std::size_t>(x)];
      const bool on = v >= 0.5;
      out.set(y, x, on);
      const double e = v - (on ? 1.0 : 0.0);
      const int level = static_cast<int>(std::lround(std::clamp(in, 0.0, 1.0) * 255.0));
      for (const auto& t : kernel_for(level).taps()) {
        const int tx = x + (forward ? t.dx : -t.dx);
        if (tx < 0 || tx >= w || t.dy >= kRows || y + t.dy >= h) continue;
        err[static_cast<std::size_t>(t.dy)][static_cast<std::size_t>(tx)] += e * t.weight;
      }
    }
    std::rotate(err.begin(), err.begin() + 1, err.end());
    std::fill(err.back().begin(), err.back().end(), 0.0);
  }
  return out;
}

BinaryImage floyd_steinberg(const GrayImage& img) {
  return error_diffuse(img, [](int) -> const DiffusionKernel& { return floyd_steinberg_kernel(); });
}

BinaryImage ostromoukhov(const GrayImage& img) {
  static const std::vector<DiffusionKernel> kernels = [] {
    std::vector<DiffusionKernel> ks;
    ks.reserve(256);
    for (int l = 0; l < 256; ++l) ks.push_back(ostromoukhov_kernel(l));
    return ks;
  }();
  return error_diffuse(img, [](int level) -> const DiffusionKernel& {
    return kernels[static_cast<std::size_t>(level)];
  });
}

BinaryImage white_noise_halftone(double g, int height, int width, std::uint64_t seed) {
  if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("white_noise_halftone: g must lie in [0,1]");
  return white_noise_halftone(constant_patch(g, height, width), seed);
}

BinaryImage white_noise_halftone(const GrayImage& img, std::uint64_t seed) {
  Rng rng(seed);
  BinaryImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.set(y, x, rng.uniform() < img.at(y, x));
  }
  return out;
}

GrayImage constant_patch(double g, int height, int width) { return GrayImage(height, width, g); }

ColorImage color_ramp(int height, int width, double luma) {
  if (!(luma >= 0.0 && luma <= 1.0)) throw std::invalid_argument("color_ramp: luma must lie in [0,1]");
  Plane r(height, width), g(height, width), b(height, width);
  for (int x = 0; x < width; ++x) {
    const double theta = 2.0 * std::numbers::pi * (x + 0.5) / width;
    const double dcb = std::cos(theta);
    const double dcr = std::sin(theta);
    // RGB offsets from gray per unit chroma radius.
    const double dr = kCrScale * dcr;
    const double db = kCbScale * dcb;
    const double dg = -(kLumaR * dr + kLumaB * db) / kLumaG;
    double radius = 0.5;
    for (double d : {dr, dg, db}) {
      if (d > 0) radius = std::min(radius, (1.0 - luma) / d);
      if (d < 0) radius = std::min(radius, -luma / d);
    }
    radius *= 0.95;
    for (int y = 0; y < height; ++y) {
      r.at(y, x) = luma + radius * dr;
      g.at(y, x) = luma + radius * dg;
      b.at(y, x) = luma + radius * db;
    }
  }
  return ColorImage::clipped(std::move(r), std::move(g), std::move(b));
}

BinaryImage classical_halftone(ClassicalMethod method, const GrayImage& img) {
  switch (method) {
    case ClassicalMethod::kFloydSteinberg:
      return floyd_steinberg(img);
    case ClassicalMethod::kOstromoukhov:
      return ostromoukhov(img);
  }
  throw std::invalid_argument("unknown classical halftoning method");
}

}  // namespace revhalf
