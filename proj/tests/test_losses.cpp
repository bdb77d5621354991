#include <doctest.h>

#include <cmath>

#include "fd.hpp"
#include "revhalf/halftone.hpp"
#include "revhalf/imaging.hpp"
#include "revhalf/losses.hpp"

using namespace revhalf;

namespace {

Plane constant(int h, int w, double v) { return Plane(h, w, v); }

// Mean of a 2x2 tiling equals the mean of the tile.
Plane tile2(const Plane& p) {
  Plane out(2 * p.height(), 2 * p.width());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.at(y, x) = p.at(y % p.height(), x % p.width());
  }
  return out;
}

}  // namespace

TEST_CASE("loss_bin values") {
  CHECK(loss_bin(constant(8, 8, 0.0)).value == 0.0);
  CHECK(loss_bin(constant(8, 8, 1.0)).value == 0.0);
  CHECK(loss_bin(constant(8, 8, 0.5)).value == doctest::Approx(0.5));
  CHECK(loss_bin(constant(8, 8, 0.9)).value == doctest::Approx(0.1));
}

TEST_CASE("loss_tone values") {
  const Plane g = fd::random_plane(16, 16, 1);
  CHECK(loss_tone(g, g).value == 0.0);
  CHECK(loss_tone(constant(16, 16, 1.0), constant(16, 16, 0.0)).value == doctest::Approx(1.0));
  const auto ht = floyd_steinberg(constant_patch(0.5, 64, 64)).to_plane();
  CHECK(loss_tone(ht, constant(64, 64, 0.5)).value < 0.01);
  CHECK_THROWS_AS(loss_tone(constant(16, 16, 0), constant(16, 12, 0)), DimensionError);
}

TEST_CASE("loss_blue values") {
  const FreqMask mask = low_freq_mask(32, 32, kBlueNoiseMaskFraction);
  const Plane g = constant(32, 32, 0.4);
  CHECK(loss_blue(g, g, mask).value == 0.0);

  const auto noise = white_noise_halftone(0.4, 32, 32, 3).to_plane();
  const double base = loss_blue(noise, g, mask).value;
  CHECK(base > 0.0);
  // Masked energy of i.i.d. noise: each orthonormal coefficient has variance
  // g(1-g) plus the squared DC error, so the mean over the band is of order 1.
  CHECK(base < 3.0);

  Plane wavy = noise;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) wavy.at(y, x) += 0.2 * std::cos(3.14159265358979 * (x + 0.5) / 32.0);
  }
  CHECK(loss_blue(wavy, g, mask).value > base);
}

TEST_CASE("loss_half is the weighted sum") {
  LossWeights w;
  w.alpha = 0.1;
  w.beta = 0.6;
  w.gamma = 0.3;
  CHECK(loss_half(1, 1, 1, w) == doctest::Approx(1.0));
  CHECK(loss_half(0, 0, 0, w) == 0.0);
  w.alpha = 0.4;
  w.gamma = 0.9;
  CHECK(loss_half(0.5, 0.01, 0.02, w) == doctest::Approx(0.224));
}

TEST_CASE("loss_restore and chroma closed forms") {
  LossWeights w = LossWeights::stage2();
  w.eta = 0.0;
  const ColorImage ramp = color_ramp(16, 16, 0.5);
  const auto ycc = rgb_to_ycbcr(ramp);
  const auto same = loss_restore(ycc.chroma, ycc.chroma.cb(), ycc.chroma.cr(), ramp, ycc.luma.plane(), w, nullptr);
  CHECK(same.value == 0.0);

  const Plane half = constant(16, 16, 0.5);
  const auto neutral = loss_restore(ycc.chroma, half, half, ramp, ycc.luma.plane(), w, nullptr);
  double dev = 0.0;
  for (std::size_t i = 0; i < half.size(); ++i) {
    dev += std::pow(ycc.chroma.cb()[i] - 0.5, 2) + std::pow(ycc.chroma.cr()[i] - 0.5, 2);
  }
  CHECK(neutral.value == doctest::Approx(dev / (2.0 * half.size())));

  w.eta = 1e-3;
  CHECK_THROWS_AS(loss_restore(ycc.chroma, half, half, ramp, ycc.luma.plane(), w, nullptr), std::invalid_argument);
}

TEST_CASE("loss_lumin values") {
  const Plane gray = constant(8, 8, 0.7);
  LossWeights w = LossWeights::lumin();
  w.w_a = 0.0;
  CHECK(loss_lumin(gray, gray, gray, w, nullptr).value == 0.0);
  CHECK(loss_lumin(constant(8, 8, 0.5), gray, gray, w, nullptr).value == doctest::Approx(0.04));
  const auto l = loss_lumin(constant(8, 8, 0.6), constant(8, 8, 0.8), gray, w, nullptr);
  CHECK(l.value == doctest::Approx(0.01 + 1.5 * 0.1));
}

TEST_CASE("loss_guidance is a symmetric MSE") {
  const Plane a = fd::random_plane(8, 8, 4);
  const Plane b = fd::random_plane(8, 8, 5);
  CHECK(loss_guidance(a, a).value == 0.0);
  CHECK(loss_guidance(a, b).value == doctest::Approx(loss_guidance(b, a).value));
}

TEST_CASE("stage_loss composition") {
  const LossWeights s1 = LossWeights::stage1();
  const LossWeights s2 = LossWeights::stage2();
  CHECK(stage_loss(1, {.half = 0.2, .guidance = 0.1}, s1) == doctest::Approx(0.3));
  CHECK(stage_loss(2, {.half = 0.0, .guidance = 0.0, .restore = 0.0}, s2) == 0.0);
  CHECK(stage_loss(2, {.half = 0.1, .guidance = 0.1, .restore = 0.05}, s2) == doctest::Approx(0.18));
  CHECK(stage_loss(3, {.lumin = 0.25}, s1) == 0.25);
  CHECK_THROWS_AS(stage_loss(2, {.half = 0.1}, s2), std::invalid_argument);
  CHECK_THROWS_AS(stage_loss(4, {}, s2), std::invalid_argument);
}

TEST_CASE("stage presets carry the published coefficients") {
  const auto s1 = LossWeights::stage1();
  CHECK(s1.alpha == 0.1);
  CHECK(s1.beta == 0.6);
  CHECK(s1.gamma == 0.3);
  const auto s2 = LossWeights::stage2();
  CHECK(s2.alpha == 0.4);
  CHECK(s2.gamma == 0.9);
  CHECK(s2.zeta == 1.0);
  CHECK(s2.eta == 2e-5);
  CHECK(s2.epsilon == 0.3);
  const auto l = LossWeights::lumin();
  CHECK(l.w_a == 2e-6);
  CHECK(l.w_b == 1.5);
}

TEST_CASE("analytic gradients match central differences on 8x8 inputs") {
  constexpr double kTol = 1e-4;
  const Plane x = fd::random_plane(8, 8, 11, 0.0, 1.0, 0.01);
  const Plane gray = fd::random_plane(8, 8, 12);

  SUBCASE("bin") {
    auto f = [](const Plane& p) { return loss_bin(p).value; };
    CHECK(fd::relative_error(loss_bin(x).grad, fd::gradient(f, x)) < kTol);
  }
  SUBCASE("tone") {
    // Blur needs 11x11; use the smallest legal size.
    const Plane big = fd::random_plane(12, 12, 13);
    const Plane g12 = fd::random_plane(12, 12, 14);
    auto f = [&](const Plane& p) { return loss_tone(p, g12).value; };
    CHECK(fd::relative_error(loss_tone(big, g12).grad, fd::gradient(f, big)) < kTol);
  }
  SUBCASE("blue") {
    const FreqMask mask = low_freq_mask(8, 8, 0.2);
    auto f = [&](const Plane& p) { return loss_blue(p, gray, mask).value; };
    CHECK(fd::relative_error(loss_blue(x, gray, mask).grad, fd::gradient(f, x)) < kTol);
  }
  SUBCASE("chromin") {
    const ChromaImage target(fd::random_plane(8, 8, 15), fd::random_plane(8, 8, 16));
    const Plane cr = fd::random_plane(8, 8, 17);
    auto f = [&](const Plane& p) { return loss_chromin(target, p, cr).value; };
    CHECK(fd::relative_error(loss_chromin(target, x, cr).d_cb, fd::gradient(f, x)) < kTol);
  }
  SUBCASE("restore with perceptual term") {
    const auto psi = PerceptualExtractor::random_fallback(3);
    const ColorImage target = ColorImage::clipped(fd::random_plane(8, 8, 18), fd::random_plane(8, 8, 19),
                                                  fd::random_plane(8, 8, 20));
    const auto ycc = rgb_to_ycbcr(target);
    LossWeights w = LossWeights::stage2();
    w.eta = 0.5;
    const Plane cb = fd::random_plane(8, 8, 21, 0.3, 0.7);
    const Plane cr = fd::random_plane(8, 8, 22, 0.3, 0.7);
    const Plane luma = fd::random_plane(8, 8, 23, 0.3, 0.7);
    const auto r = loss_restore(ycc.chroma, cb, cr, target, luma, w, &psi);
    CHECK(r.perceptual > 0.0);
    auto fcb = [&](const Plane& p) { return loss_restore(ycc.chroma, p, cr, target, luma, w, &psi).value; };
    auto fl = [&](const Plane& p) { return loss_restore(ycc.chroma, cb, cr, target, p, w, &psi).value; };
    CHECK(fd::relative_error(r.d_cb, fd::gradient(fcb, cb)) < kTol);
    CHECK(fd::relative_error(r.d_luma, fd::gradient(fl, luma)) < kTol);
  }
  SUBCASE("lumin with perceptual term") {
    const auto psi = PerceptualExtractor::random_fallback(4);
    LossWeights w = LossWeights::lumin();
    w.w_a = 0.5;
    const Plane initial = fd::random_plane(8, 8, 24);
    const auto l = loss_lumin(initial, x, gray, w, &psi);
    auto fr = [&](const Plane& p) { return loss_lumin(initial, p, gray, w, &psi).value; };
    auto fi = [&](const Plane& p) { return loss_lumin(p, x, gray, w, &psi).value; };
    CHECK(fd::relative_error(l.d_refined, fd::gradient(fr, x)) < kTol);
    CHECK(fd::relative_error(l.d_initial, fd::gradient(fi, initial)) < kTol);
  }
  SUBCASE("guidance") {
    auto f = [&](const Plane& p) { return loss_guidance(p, gray).value; };
    CHECK(fd::relative_error(loss_guidance(x, gray).grad, fd::gradient(f, x)) < kTol);
  }
}

TEST_CASE("pointwise losses are resolution stable under 2x2 tiling") {
  const Plane x = fd::random_plane(8, 8, 30);
  const Plane g = fd::random_plane(8, 8, 31);
  CHECK(loss_bin(tile2(x)).value == doctest::Approx(loss_bin(x).value).epsilon(1e-6));
  CHECK(loss_guidance(tile2(x), tile2(g)).value == doctest::Approx(loss_guidance(x, g).value).epsilon(1e-6));
  LossWeights w = LossWeights::lumin();
  w.w_a = 0.0;
  CHECK(loss_lumin(tile2(x), tile2(g), tile2(g), w, nullptr).value ==
        doctest::Approx(loss_lumin(x, g, g, w, nullptr).value).epsilon(1e-6));
  const ChromaImage c(g, x);
  CHECK(loss_chromin(ChromaImage(tile2(g), tile2(x)), tile2(x), tile2(g)).value ==
        doctest::Approx(loss_chromin(c, x, g).value).epsilon(1e-6));
}

TEST_CASE("losses are nonnegative") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Plane a = fd::random_plane(16, 16, 40 + s);
    const Plane b = fd::random_plane(16, 16, 50 + s);
    CHECK(loss_bin(a).value >= 0.0);
    CHECK(loss_tone(a, b).value >= 0.0);
    CHECK(loss_blue(a, b, low_freq_mask(16, 16, 0.038)).value >= 0.0);
    CHECK(loss_guidance(a, b).value >= 0.0);
  }
}

TEST_CASE("perceptual extractor vjp matches finite differences") {
  const auto psi = PerceptualExtractor::random_fallback(5);
  std::vector<Plane> rgb{fd::random_plane(8, 8, 60), fd::random_plane(8, 8, 61), fd::random_plane(8, 8, 62)};
  const auto feats = psi.forward(rgb);
  REQUIRE(feats.size() == 16);
  CHECK(feats[0].height() == 4);
  std::vector<Plane> r;
  for (std::size_t c = 0; c < feats.size(); ++c) r.push_back(fd::random_plane(4, 4, 70 + c, -1.0, 1.0));
  const auto g = psi.vjp(rgb, r);
  auto f = [&](const Plane& p) {
    auto in = rgb;
    in[1] = p;
    const auto out = psi.forward(in);
    double s = 0.0;
    for (std::size_t c = 0; c < out.size(); ++c) {
      for (std::size_t i = 0; i < out[c].size(); ++i) s += out[c][i] * r[c][i];
    }
    return s;
  };
  CHECK(fd::relative_error(g[1], fd::gradient(f, rgb[1])) < 1e-4);
}
