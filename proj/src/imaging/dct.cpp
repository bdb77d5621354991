#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "revhalf/imaging.hpp"

namespace revhalf {

namespace {

// basis[k*n + i] = alpha_k * cos(pi (2i+1) k / 2n)
std::vector<double> dct_basis(int n) {
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    const double alpha = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      basis[static_cast<std::size_t>(k) * n + i] =
          alpha * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  return basis;
}

// out = A * X * B^T when transpose=false, A^T * X * B when true.
Plane separable(const Plane& x, const std::vector<double>& a, const std::vector<double>& b, bool transpose) {
  const int h = x.height();
  const int w = x.width();
  auto A = [&](int r, int c) { return transpose ? a[static_cast<std::size_t>(c) * h + r] : a[static_cast<std::size_t>(r) * h + c]; };
  auto B = [&](int r, int c) { return transpose ? b[static_cast<std::size_t>(c) * w + r] : b[static_cast<std::size_t>(r) * w + c]; };
  Plane tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int v = 0; v < w; ++v) {
      double s = 0.0;
      for (int x0 = 0; x0 < w; ++x0) s += x.at(y, x0) * B(v, x0);
      tmp.at(y, v) = s;
    }
  }
  Plane out(h, w);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      double s = 0.0;
      for (int y = 0; y < h; ++y) s += A(u, y) * tmp.at(y, v);
      out.at(u, v) = s;
    }
  }
  return out;
}

}  // namespace

Plane dct2(const Plane& img) {
  return separable(img, dct_basis(img.height()), dct_basis(img.width()), false);
}

Plane idct2(const Plane& coeffs) {
  return separable(coeffs, dct_basis(coeffs.height()), dct_basis(coeffs.width()), true);
}

FreqMask::FreqMask(int height, int width, std::vector<unsigned char> pass)
    : height_(height), width_(width), pass_(std::move(pass)) {
  if (pass_.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("mask size does not match dimensions");
  }
  pass_count_ = static_cast<int>(std::count(pass_.begin(), pass_.end(), 1));
}

FreqMask low_freq_mask(int height, int width, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("low_freq_mask: fraction must lie in (0,1]");
  }
  if (height <= 0 || width <= 0) throw DimensionError("low_freq_mask: empty grid");
  const long total = static_cast<long>(height) * width;
  // Nudge so products that are integral in exact arithmetic survive floor().
  long count = static_cast<long>(std::floor(fraction * static_cast<double>(total) * (1.0 + 1e-12)));
  count = std::clamp(count, 1L, total);

  std::vector<std::tuple<long, int, int>> order;
  order.reserve(static_cast<std::size_t>(total));
  for (int u = 0; u < height; ++u) {
    for (int v = 0; v < width; ++v) order.emplace_back(static_cast<long>(u) * u + static_cast<long>(v) * v, u, v);
  }
  std::sort(order.begin(), order.end());
  std::vector<unsigned char> pass(static_cast<std::size_t>(total), 0);
  for (long i = 0; i < count; ++i) {
    const auto& [r2, u, v] = order[static_cast<std::size_t>(i)];
    pass[static_cast<std::size_t>(u) * width + v] = 1;
  }
  return FreqMask(height, width, std::move(pass));
}

}  // namespace revhalf
