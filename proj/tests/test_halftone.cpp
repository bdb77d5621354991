#include <doctest.h>

#include <cmath>

#include "fd.hpp"
#include "revhalf/halftone.hpp"
#include "revhalf/imaging.hpp"

using namespace revhalf;

namespace {

/// Straightforward serpentine error diffusion on a full error plane.
BinaryImage reference_diffusion(const GrayImage& img, bool floyd) {
  const int h = img.height(), w = img.width();
  Plane acc = img.plane();
  BinaryImage out(h, w);
  for (int y = 0; y < h; ++y) {
    const int dir = y % 2 == 0 ? 1 : -1;
    for (int i = 0; i < w; ++i) {
      const int x = dir > 0 ? i : w - 1 - i;
      const bool on = acc.at(y, x) >= 0.5;
      out.set(y, x, on);
      const double e = acc.at(y, x) - (on ? 1.0 : 0.0);
      std::vector<std::tuple<int, int, double>> taps;
      if (floyd) {
        taps = {{0, 1, 7.0 / 16}, {1, -1, 3.0 / 16}, {1, 0, 5.0 / 16}, {1, 1, 1.0 / 16}};
      } else {
        const auto k = ostromoukhov_kernel(static_cast<int>(std::lround(img.at(y, x) * 255.0)));
        for (const auto& t : k.taps()) taps.emplace_back(t.dy, t.dx, t.weight);
      }
      for (auto [dy, dx, wgt] : taps) {
        const int ty = y + dy, tx = x + dir * dx;
        if (ty < h && tx >= 0 && tx < w) acc.at(ty, tx) += e * wgt;
      }
    }
  }
  return out;
}

bool is_binary(const BinaryImage& b) {
  for (auto v : b.bits()) {
    if (v > 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("kernels") {
  const auto& fs = floyd_steinberg_kernel();
  CHECK(fs.weight_sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fs.taps().size() == 4);
  for (int level = 0; level < 256; ++level) {
    const auto k = ostromoukhov_kernel(level);
    CHECK(std::abs(k.weight_sum() - 1.0) < 1e-9);
    for (const auto& t : k.taps()) CHECK((t.dy > 0 || (t.dy == 0 && t.dx > 0)));
  }
  // Published entries: level 0 is (13, 0, 5)/18, level 64 is (11, 10, 0)/21, mirrored at 255-l.
  const auto k0 = ostromoukhov_kernel(0);
  CHECK(k0.taps()[0].weight == doctest::Approx(13.0 / 18));
  CHECK(k0.taps()[2].weight == doctest::Approx(5.0 / 18));
  const auto k64 = ostromoukhov_kernel(64);
  CHECK(k64.taps()[0].weight == doctest::Approx(11.0 / 21));
  CHECK(k64.taps()[1].weight == doctest::Approx(10.0 / 21));
  CHECK(ostromoukhov_kernel(191).taps()[1].weight == doctest::Approx(10.0 / 21));
  CHECK(ostromoukhov_kernel(255).taps()[0].weight == doctest::Approx(13.0 / 18));
  CHECK_THROWS_AS(DiffusionKernel({{0, -1, 1.0}}), std::invalid_argument);
}

TEST_CASE("error diffusion matches a direct implementation") {
  const GrayImage img(fd::random_plane(37, 29, 3));
  CHECK(floyd_steinberg(img) == reference_diffusion(img, true));
  CHECK(ostromoukhov(img) == reference_diffusion(img, false));
}

TEST_CASE("constant extremes") {
  for (auto method : {ClassicalMethod::kFloydSteinberg, ClassicalMethod::kOstromoukhov}) {
    CHECK(classical_halftone(method, constant_patch(1.0, 32, 32)).mean() == 1.0);
    CHECK(classical_halftone(method, constant_patch(0.0, 32, 32)).mean() == 0.0);
  }
}

TEST_CASE("tone conservation at 256x256") {
  const double fs_half = floyd_steinberg(constant_patch(0.5, 256, 256)).mean();
  CHECK(fs_half >= 0.49);
  CHECK(fs_half <= 0.51);
  for (int i = 1; i <= 9; ++i) {
    const double g = i / 10.0;
    const auto patch = constant_patch(g, 256, 256);
    CHECK(std::abs(floyd_steinberg(patch).mean() - g) <= 0.01);
    CHECK(std::abs(ostromoukhov(patch).mean() - g) <= 0.01);
  }
}

TEST_CASE("binarity and determinism") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GrayImage img(fd::random_plane(32, 32, s));
    CHECK(is_binary(floyd_steinberg(img)));
    CHECK(is_binary(ostromoukhov(img)));
    CHECK(is_binary(white_noise_halftone(img, s)));
    CHECK(ostromoukhov(img) == ostromoukhov(img));
  }
}

TEST_CASE("white noise") {
  CHECK(white_noise_halftone(0.0, 16, 16, 1).mean() == 0.0);
  CHECK(white_noise_halftone(1.0, 16, 16, 1).mean() == 1.0);
  const auto half = white_noise_halftone(0.5, 256, 256, 7);
  std::size_t ones = 0;
  for (auto v : half.bits()) ones += v;
  CHECK(ones >= static_cast<std::size_t>(0.49 * 65536));
  CHECK(ones <= static_cast<std::size_t>(0.51 * 65536));
  CHECK(white_noise_halftone(0.5, 16, 16, 7) == white_noise_halftone(0.5, 16, 16, 7));
  CHECK_FALSE(white_noise_halftone(0.5, 16, 16, 7) == white_noise_halftone(0.5, 16, 16, 8));
  CHECK_THROWS_AS(white_noise_halftone(1.2, 8, 8, 1), std::invalid_argument);
}

TEST_CASE("patches and ramps") {
  const auto p = constant_patch(0.8, 256, 256);
  CHECK(p.plane().min() == 0.8);
  CHECK(p.plane().max() == 0.8);
  const auto ramp = color_ramp(32, 64, 0.8);
  const auto ycc = rgb_to_ycbcr(ramp);
  CHECK(std::abs(ycc.luma.plane().min() - 0.8) < 1e-3);
  CHECK(std::abs(ycc.luma.plane().max() - 0.8) < 1e-3);
  const auto mid = rgb_to_ycbcr(color_ramp(32, 64, 0.5));
  const double dl = std::hypot(mid.chroma.cb().at(0, 0) - mid.chroma.cb().at(0, 63),
                               mid.chroma.cr().at(0, 0) - mid.chroma.cr().at(0, 63));
  CHECK(dl > 0.01);
}
