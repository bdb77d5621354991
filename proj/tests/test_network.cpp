#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "fd.hpp"
#include "revhalf/archive.hpp"
#include "revhalf/halftone.hpp"
#include "revhalf/imaging.hpp"
#include "revhalf/network.hpp"

using namespace revhalf;

namespace {

NetConfig tiny(int nib = 1, std::uint64_t seed = 1) {
  NetConfig c;
  c.base_channels = 4;
  c.residual_blocks_unet = 1;
  c.predictor_residual_enhance = 1;
  c.guidance_residual = 1;
  c.nib_channels = nib;
  c.seed = seed;
  return c;
}

bool same(const Plane& a, const Plane& b) {
  return a.height() == b.height() && a.width() == b.width() &&
         std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

double stddev(const Plane& p) {
  const auto v = p.values();
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

ColorImage random_color(int h, int w, std::uint64_t seed) {
  return ColorImage(fd::random_plane(h, w, seed), fd::random_plane(h, w, seed + 100), fd::random_plane(h, w, seed + 200));
}

}  // namespace

TEST_CASE("config validation") {
  NetConfig c;
  CHECK_NOTHROW(c.validate());
  c.upscales = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = NetConfig{};
  c.base_channels = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny();
  CHECK(NetConfig::from_json(c.to_json()) == c);
}

TEST_CASE("nib augmentation") {
  const ColorImage img(16, 16, 0.5, 0.5, 0.5);
  const auto a = nib_augment(img, 3);
  REQUIRE(a.size() == 4);
  CHECK(same(a[0], img.r()));
  CHECK(same(a[1], img.g()));
  CHECK(same(a[2], img.b()));
  CHECK(same(nib_augment(img, 3)[3], a[3]));
  CHECK_FALSE(same(nib_augment(img, 4)[3], a[3]));
  CHECK(stddev(a[3]) > 0.5);
  CHECK(nib_augment(img, 3, 2).size() == 5);
}

TEST_CASE("encoder shape, range and sensitivity") {
  const ModelBundle b(tiny());
  const auto img = random_color(16, 24, 5);
  const auto aug = nib_augment(img, 1);
  const auto out = encoder_forward(b, aug);
  CHECK(out.height() == 16);
  CHECK(out.width() == 24);
  CHECK(out.plane().min() > 0.0);
  CHECK(out.plane().max() < 1.0);
  auto changed = aug;
  changed[0].at(8, 8) = 1.0 - changed[0].at(8, 8);
  CHECK_FALSE(same(encoder_forward(b, changed).plane(), out.plane()));
  CHECK_THROWS_AS(encoder_forward(b, nib_augment(random_color(12, 16, 1), 1)), DimensionError);
  CHECK_THROWS_AS(encoder_forward(b, {aug[0], aug[1], aug[2]}), DimensionError);
}

TEST_CASE("flatness without noise, variation with noise") {
  NetConfig flat;
  flat.nib_channels = 0;
  const ModelBundle plain(flat);
  const ColorImage gray(256, 256, 0.5, 0.5, 0.5);
  const auto out = encoder_forward(plain, nib_augment(gray, 1, 0));
  double lo = 1.0, hi = 0.0;
  for (int y = 100; y < 156; ++y) {
    for (int x = 100; x < 156; ++x) {
      lo = std::min(lo, out.at(y, x));
      hi = std::max(hi, out.at(y, x));
    }
  }
  CHECK(hi - lo <= 1e-6);

  NetConfig noisy;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    noisy.seed = s;
    const ModelBundle b(noisy);
    CHECK(stddev(encoder_forward(b, nib_augment(ColorImage(64, 64, 0.5, 0.5, 0.5), s)).plane()) > 0.01);
  }
}

TEST_CASE("binary gate") {
  Plane p(1, 3);
  p.at(0, 0) = 0.7;
  p.at(0, 1) = 0.3;
  p.at(0, 2) = 0.5;
  const auto g = binary_gate(GrayImage(p));
  CHECK(g.at(0, 0) == 1);
  CHECK_FALSE(g.at(0, 1) == 1);
  CHECK(g.at(0, 2) == 1);

  // STE: gradient of mean(gate(x)) equals that of mean(x), 1/N everywhere.
  auto x = nn::Tensor::from({1, 1, 2, 3}, {0.1f, 0.6f, 0.5f, 0.49f, 0.9f, 0.2f}, true);
  auto y = nn::binary_gate(x);
  CHECK(std::vector<float>(y.data().begin(), y.data().end()) == std::vector<float>{0, 1, 1, 0, 1, 0});
  nn::backward(y, std::vector<float>(6, 1.0f / 6));
  for (float v : x.grad()) CHECK(v == 1.0f / 6);
}

TEST_CASE("decoder and predictor") {
  ModelBundle b(tiny());
  const auto h = white_noise_halftone(0.5, 16, 16, 2);
  const auto chroma = decoder_forward(b, h);
  CHECK(chroma.height() == 16);
  for (const Plane* p : {&chroma.cb(), &chroma.cr()}) {
    CHECK(p->min() > 0.0);
    CHECK(p->max() < 1.0);
  }
  for (double v : {0.0, 1.0}) {
    const auto c = decoder_forward(b, white_noise_halftone(v, 16, 16, 1));
    CHECK(std::isfinite(c.cb().min()));
    CHECK(std::isfinite(c.cr().max()));
  }
  Plane soft = h.to_plane();
  soft.at(0, 0) = 0.5;
  CHECK_THROWS_AS(decoder_forward(b, soft, true), RangeError);
  CHECK_NOTHROW(decoder_forward(b, soft, false));
  CHECK_THROWS_AS(predictor_forward(b, soft, true), RangeError);

  const auto pred = predictor_forward(b, h);
  CHECK(pred.refined.plane().min() > 0.0);
  CHECK(pred.refined.plane().max() < 1.0);
  double worst = 0.0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      worst = std::max(worst, std::abs(pred.refined.at(y, x) - pred.initial.at(y, x) - pred.residual.at(y, x)));
    }
  }
  CHECK(worst < 1e-12);

  // Zeroing the enhancement output makes the refined estimate equal the initial one.
  auto& out = const_cast<Conv&>(b.enhancement_output());
  std::fill(out.weight.data().begin(), out.weight.data().end(), 0.0f);
  std::fill(out.bias.data().begin(), out.bias.data().end(), 0.0f);
  const auto zeroed = predictor_forward(b, h);
  CHECK(same(zeroed.refined.plane(), zeroed.initial.plane()));

  const auto f = guidance_features(b, h.to_plane());
  CHECK(f.height() == 16);
  CHECK(same(guidance_features(b, h.to_plane()).plane(), f.plane()));
}

TEST_CASE("pipelines") {
  const ModelBundle b(tiny());
  const auto img = random_color(16, 16, 9);
  const auto h = halftone_pipeline(b, img, 4);
  for (auto v : h.bits()) CHECK(v <= 1);
  CHECK(halftone_pipeline(b, img, 4) == h);
  const auto rgb = restore_pipeline(b, h);
  CHECK(rgb.height() == 16);
  for (const Plane* p : {&rgb.r(), &rgb.g(), &rgb.b()}) {
    CHECK(p->min() >= 0.0);
    CHECK(p->max() <= 1.0);
  }
  const auto neutral = rgb_to_ycbcr(restore_pipeline(b, h, true));
  CHECK(neutral.chroma.cb().min() > 0.5 - 1e-9);
  CHECK(neutral.chroma.cb().max() < 0.5 + 1e-9);
}

TEST_CASE("encoder gradients flow through the gate") {
  const ModelBundle b(tiny());
  const auto img = random_color(16, 16, 3);
  const auto x = augmented_batch({&img}, {7}, 1);
  auto gated = nn::binary_gate(b.encode(x));
  nn::backward(gated, std::vector<float>(gated.numel(), 1.0f));
  double norm = 0.0;
  for (auto p : b.parameters(Component::kEncoder)) {
    if (p.tensor.has_grad()) {
      for (float g : p.tensor.grad()) norm += std::abs(g);
    }
  }
  CHECK(norm > 0.0);
}

TEST_CASE("parameters and persistence") {
  const ModelBundle b(tiny());
  const auto all = b.parameters();
  std::size_t parts = 0;
  for (auto c : {Component::kEncoder, Component::kDecoder, Component::kPredictor, Component::kGuidance}) {
    parts += b.parameters(c).size();
  }
  CHECK(parts == all.size());

  const auto dir = std::filesystem::temp_directory_path() / "revhalf_test_network";
  std::filesystem::create_directories(dir);
  save_bundle(dir / "b.rvh", b);
  const auto loaded = load_bundle(dir / "b.rvh");
  CHECK(loaded.config() == b.config());
  const auto lp = loaded.parameters();
  REQUIRE(lp.size() == all.size());
  for (std::size_t i = 0; i < lp.size(); ++i) {
    CHECK(lp[i].name == all[i].name);
    CHECK(std::equal(lp[i].tensor.data().begin(), lp[i].tensor.data().end(), all[i].tensor.data().begin()));
  }

  auto copy = b.clone();
  copy.parameters()[0].tensor.data()[0] += 1.0f;
  CHECK(b.parameters()[0].tensor.data()[0] != copy.parameters()[0].tensor.data()[0]);

  ModelBundle target(tiny(1, 2));
  auto archive = read_archive(dir / "b.rvh");
  CHECK_THROWS_AS(assign_parameters(target, {archive.tensors[0]}), std::invalid_argument);
  auto wrong = archive.tensors;
  wrong[0].shape[1] += 1;
  CHECK_THROWS_AS(assign_parameters(target, wrong), std::invalid_argument);
  assign_parameters(target, archive.tensors);
  CHECK(target.parameters()[0].tensor.data()[0] == all[0].tensor.data()[0]);

  archive.meta["net_config"]["base_channels"] = 8;
  write_archive(dir / "bad.rvh", archive);
  CHECK_THROWS_AS(load_bundle(dir / "bad.rvh"), std::invalid_argument);
  std::filesystem::remove_all(dir);
}
