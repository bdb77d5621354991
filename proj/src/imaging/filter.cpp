#include <cmath>
#include <numeric>

#include "revhalf/imaging.hpp"

namespace revhalf {

namespace {

// Reflect without repeating the edge sample: -1 -> 1, n -> n-2.
int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

enum class Pass { kForward, kAdjoint };

// One separable pass along rows (horizontal=true) or columns.
Plane filter_pass(const Plane& in, const std::vector<double>& taps, bool horizontal, Pass mode) {
  const int h = in.height();
  const int w = in.width();
  const int r = static_cast<int>(taps.size()) / 2;
  Plane out(h, w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = -r; k <= r; ++k) {
        const double t = taps[static_cast<std::size_t>(k + r)];
        const int sy = horizontal ? y : reflect(y + k, h);
        const int sx = horizontal ? reflect(x + k, w) : x;
        if (mode == Pass::kForward) {
          out.at(y, x) += t * in.at(sy, sx);
        } else {
          out.at(sy, sx) += t * in.at(y, x);
        }
      }
    }
  }
  return out;
}

void check_size(const Plane& p, int size) {
  if (p.height() < size || p.width() < size) {
    throw DimensionError("image " + std::to_string(p.height()) + "x" + std::to_string(p.width()) +
                         " is smaller than the " + std::to_string(size) + "x" + std::to_string(size) +
                         " kernel");
  }
}

}  // namespace

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(size));
  const int r = size / 2;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  const double s = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= s;
  return taps;
}

Plane gaussian_filter(const Plane& in, int size, double sigma) {
  check_size(in, size);
  const auto taps = gaussian_taps(size, sigma);
  return filter_pass(filter_pass(in, taps, true, Pass::kForward), taps, false, Pass::kForward);
}

Plane gaussian_filter_adjoint(const Plane& grad_out, int size, double sigma) {
  check_size(grad_out, size);
  const auto taps = gaussian_taps(size, sigma);
  return filter_pass(filter_pass(grad_out, taps, false, Pass::kAdjoint), taps, true, Pass::kAdjoint);
}

Plane gaussian_filter_valid(const Plane& in, int size, double sigma) {
  check_size(in, size);
  const auto taps = gaussian_taps(size, sigma);
  const int oh = in.height() - size + 1;
  const int ow = in.width() - size + 1;
  Plane rows(in.height(), ow);
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < size; ++k) s += taps[static_cast<std::size_t>(k)] * in.at(y, x + k);
      rows.at(y, x) = s;
    }
  }
  Plane out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < size; ++k) s += taps[static_cast<std::size_t>(k)] * rows.at(y + k, x);
      out.at(y, x) = s;
    }
  }
  return out;
}

GrayImage gaussian_blur(const GrayImage& img) { return GrayImage::clipped(gaussian_filter(img.plane())); }

}  // namespace revhalf
