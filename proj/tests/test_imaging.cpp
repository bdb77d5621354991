#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fd.hpp"
#include "revhalf/image_io.hpp"
#include "revhalf/imaging.hpp"

using namespace revhalf;
namespace fs = std::filesystem;

namespace {

Plane naive_dct(const Plane& x) {
  const int h = x.height(), w = x.width();
  Plane out(h, w);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      double s = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int k = 0; k < w; ++k) {
          s += x.at(y, k) * std::cos(std::numbers::pi * (y + 0.5) * u / h) * std::cos(std::numbers::pi * (k + 0.5) * v / w);
        }
      }
      const double au = u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
      const double av = v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
      out.at(u, v) = au * av * s;
    }
  }
  return out;
}

double norm2(const Plane& p) {
  double s = 0.0;
  for (double v : p.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const Plane& a, const Plane& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("revhalf_img_" + std::to_string(std::rand()))) { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("typed images enforce their ranges") {
  CHECK_THROWS_AS(GrayImage(Plane(2, 2, 1.5)), RangeError);
  CHECK_THROWS_AS(ColorImage(Plane(8, 8), Plane(8, 8), Plane(8, 4)), DimensionError);
  CHECK_THROWS_AS(ColorImage(12, 12, 0, 0, 0), DimensionError);
  CHECK_THROWS_AS(BinaryImage::from_plane(Plane(2, 2, 0.3), true), RangeError);
  CHECK(BinaryImage::from_plane(Plane(1, 1, 0.5)).at(0, 0) == 1);
  CHECK(GrayImage::clipped(Plane(1, 2, std::vector<double>{-1.0, 2.0})).plane().max() == 1.0);
  CHECK(binarity(Plane(1, 4, std::vector<double>{0.0, 1.0, 0.5, 1.0})) == doctest::Approx(0.75));
}

TEST_CASE("rgb_to_ycbcr examples") {
  auto px = [](double r, double g, double b) {
    const auto ycc = rgb_to_ycbcr(ColorImage(8, 8, r, g, b));
    return std::array<double, 3>{ycc.luma.at(0, 0), ycc.chroma.cb()[0], ycc.chroma.cr()[0]};
  };
  const auto white = px(1, 1, 1);
  CHECK(white[0] == doctest::Approx(1.0));
  CHECK(white[1] == doctest::Approx(0.5));
  CHECK(white[2] == doctest::Approx(0.5));
  const auto black = px(0, 0, 0);
  CHECK(black[0] == 0.0);
  CHECK(black[1] == doctest::Approx(0.5));
  const auto red = px(1, 0, 0);
  CHECK(red[0] == doctest::Approx(0.299));
  CHECK(red[1] == doctest::Approx(0.33127).epsilon(1e-5));
  CHECK(red[2] == doctest::Approx(1.0));
}

TEST_CASE("ycbcr_to_rgb inverts the forward transform") {
  const GrayImage y(8, 8, 0.299);
  const ChromaImage c(Plane(8, 8, 0.5 - 0.299 / 1.772), Plane(8, 8, 1.0));
  const auto rgb = ycbcr_to_rgb(y, c);
  CHECK(rgb.r()[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(rgb.g()[0] == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(rgb.b()[0] == doctest::Approx(0.0).epsilon(1e-5));
  const auto w = ycbcr_to_rgb(GrayImage(8, 8, 1.0), ChromaImage::neutral(8, 8));
  CHECK(w.g()[5] == doctest::Approx(1.0));

  for (std::uint64_t s = 0; s < 5; ++s) {
    const ColorImage img(fd::random_plane(16, 16, s), fd::random_plane(16, 16, s + 10), fd::random_plane(16, 16, s + 20));
    const auto ycc = rgb_to_ycbcr(img);
    const auto back = ycbcr_to_rgb(ycc.luma, ycc.chroma);
    for (int c = 0; c < 3; ++c) CHECK(max_abs_diff(back.channel(c), img.channel(c)) < 1e-6);
  }
  CHECK_THROWS_AS(ycbcr_to_rgb(GrayImage(8, 8), ChromaImage::neutral(16, 8)), DimensionError);
}

TEST_CASE("gaussian blur") {
  const auto taps = gaussian_taps(11, 2.0);
  double sum = 0.0;
  for (double t : taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  const GrayImage flat(16, 16, 0.37);
  const GrayImage blurred = gaussian_blur(flat);
  for (double v : blurred.plane().values()) CHECK(v == doctest::Approx(0.37));

  Plane impulse(11, 11, 0.0);
  impulse.at(5, 5) = 1.0;
  const Plane k = gaussian_filter(impulse);
  double grid = 0.0;
  for (int y = -5; y <= 5; ++y) {
    for (int x = -5; x <= 5; ++x) grid += std::exp(-(x * x + y * y) / 8.0);
  }
  CHECK(k.at(5, 5) == doctest::Approx(1.0 / grid).epsilon(1e-12));
  CHECK(k.at(5, 7) == doctest::Approx(std::exp(-4.0 / 8.0) / grid).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_blur(GrayImage(10, 16)), DimensionError);

  // Adjoint identity <Fx, y> = <x, F^T y>.
  const Plane x = fd::random_plane(14, 13, 1);
  const Plane y = fd::random_plane(14, 13, 2);
  const Plane fx = gaussian_filter(x);
  const Plane fty = gaussian_filter_adjoint(y);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lhs += fx[i] * y[i];
    rhs += x[i] * fty[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  const Plane valid = gaussian_filter_valid(x, 11, 2.0);
  CHECK(valid.height() == 4);
  CHECK(valid.width() == 3);
  CHECK(valid.at(0, 0) == doctest::Approx(fx.at(5, 5)));
}

TEST_CASE("dct2 against the defining sum") {
  const Plane x = fd::random_plane(6, 10, 3);
  CHECK(max_abs_diff(dct2(x), naive_dct(x)) < 1e-12);
  const Plane c = dct2(Plane(8, 8, 0.25));
  CHECK(c.at(0, 0) == doctest::Approx(0.25 * 8));
  double rest = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) rest += std::abs(c[i]);
  CHECK(rest < 1e-12);

  const Plane big = fd::random_plane(64, 64, 4);
  CHECK(std::abs(norm2(dct2(big)) - norm2(big)) / norm2(big) < 1e-6);
  CHECK(max_abs_diff(idct2(dct2(big)), big) < 1e-6);
  const Plane coeffs = fd::random_plane(16, 16, 5, -3.0, 3.0);
  CHECK(max_abs_diff(dct2(idct2(coeffs)), coeffs) < 1e-6);
  CHECK(idct2(Plane(8, 8, 0.0)).max() == 0.0);
  Plane dc(8, 8, 0.0);
  dc.at(0, 0) = 0.6 * 8;
  const Plane flat = idct2(dc);
  for (double v : flat.values()) CHECK(v == doctest::Approx(0.6));
}

TEST_CASE("low_freq_mask") {
  const auto m256 = low_freq_mask(256, 256, 0.038);
  CHECK(m256.pass_count() == 2490);
  CHECK(m256.passes(0, 0));
  CHECK(low_freq_mask(8, 8, 0.038).pass_count() == 2);
  const auto all = low_freq_mask(8, 8, 1.0);
  CHECK(all.pass_count() == 64);
  CHECK_THROWS_AS(low_freq_mask(8, 8, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(low_freq_mask(8, 8, 1.2), std::invalid_argument);

  // Independent ordering: count coefficients strictly inside the boundary radius.
  const auto m = low_freq_mask(64, 64, 0.038);
  double boundary = 0.0;
  for (int u = 0; u < 64; ++u) {
    for (int v = 0; v < 64; ++v) {
      if (m.passes(u, v)) boundary = std::max(boundary, std::hypot(u, v));
    }
  }
  for (int u = 0; u < 64; ++u) {
    for (int v = 0; v < 64; ++v) {
      if (std::hypot(u, v) < boundary) CHECK(m.passes(u, v));
    }
  }
  const auto small = low_freq_mask(32, 32, 0.02);
  const auto large = low_freq_mask(32, 32, 0.1);
  for (int u = 0; u < 32; ++u) {
    for (int v = 0; v < 32; ++v) {
      if (small.passes(u, v)) CHECK(large.passes(u, v));
    }
  }
}

TEST_CASE("error_map and psnr") {
  const ColorImage white(8, 8, 1, 1, 1), black(8, 8, 0, 0, 0), red(8, 8, 1, 0, 0);
  CHECK(error_map(white, white).plane().max() == 0.0);
  CHECK(error_map(white, black).plane().min() == 1.0);
  CHECK(error_map(red, black).at(3, 3) == doctest::Approx(1.0 / 3.0));
  CHECK(color_mse(red, black) == doctest::Approx(1.0 / 3.0));
  CHECK(std::isinf(psnr_from_mse(0.0)));
  CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0));
}

TEST_CASE("png and pbm round trips") {
  TempDir dir;
  const ColorImage img(fd::random_plane(16, 24, 7), fd::random_plane(16, 24, 8), fd::random_plane(16, 24, 9));
  write_png(dir.path / "c.png", img);
  const auto back = read_png_rgb(dir.path / "c.png");
  CHECK(back.height() == 16);
  CHECK(back.width() == 24);
  CHECK(max_abs_diff(back.g, img.g()) <= 0.5 / 255 + 1e-12);

  BinaryImage bits(5, 13);
  bits.set(0, 0, true);
  bits.set(4, 12, true);
  bits.set(2, 7, true);
  write_pbm(dir.path / "h.pbm", bits);
  CHECK(read_pbm(dir.path / "h.pbm") == bits);
  CHECK(read_halftone(dir.path / "h.pbm") == bits);
  write_png(dir.path / "h.png", bits);
  CHECK(read_halftone(dir.path / "h.png") == bits);

  std::ifstream raw(dir.path / "h.pbm", std::ios::binary);
  std::string header;
  std::getline(raw, header);
  CHECK(header == "P4");

  std::ofstream(dir.path / "bad.png") << "not a png";
  CHECK_THROWS_AS(read_png_rgb(dir.path / "bad.png"), IoError);
  CHECK_THROWS_AS(read_pbm(dir.path / "missing.pbm"), IoError);
}

TEST_CASE("center_crop_resize") {
  RgbRaster src{Plane(256, 512, 0.0), Plane(256, 512, 0.0), Plane(256, 512, 0.0)};
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 512; ++x) src.r.at(y, x) = x < 256 ? 0.0 : 1.0;
  }
  const auto out = center_crop_resize(src, 64);
  CHECK(out.height() == 64);
  CHECK(out.width() == 64);
  // The centered crop spans columns 128..383, so the left half is dark.
  CHECK(out.r.at(10, 10) == doctest::Approx(0.0));
  CHECK(out.r.at(10, 60) == doctest::Approx(1.0));
  CHECK_NOTHROW(to_color_image(out));
}

TEST_CASE("write_file_atomic replaces the target") {
  TempDir dir;
  write_file_atomic(dir.path / "f.txt", "one");
  write_file_atomic(dir.path / "f.txt", "two");
  std::ifstream in(dir.path / "f.txt");
  std::string s;
  in >> s;
  CHECK(s == "two");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++n;
  CHECK(n == 1);
}
