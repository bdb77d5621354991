#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

#include "revhalf/archive.hpp"
#include "revhalf/halftone.hpp"
#include "revhalf/image_io.hpp"
#include "revhalf/imaging.hpp"
#include "revhalf/random.hpp"
#include "revhalf/training.hpp"

namespace revhalf {

namespace fs = std::filesystem;

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

IngestResult ingest_images(const std::vector<fs::path>& paths, int target) {
  if (target < 8 || target % 8 != 0) throw std::invalid_argument("target size must be a positive multiple of 8");
  IngestResult out;
  for (const auto& p : paths) {
    try {
      out.images.push_back(to_color_image(center_crop_resize(read_png_rgb(p), target)));
      out.sources.push_back(p);
    } catch (const IoError& e) {
      ++out.skipped;
      out.warnings.push_back("skipped " + p.string() + ": " + e.what());
    }
  }
  return out;
}

Split split_indices(std::size_t n, std::size_t train_count, std::uint64_t seed) {
  if (train_count > n) throw std::invalid_argument("split: train count exceeds dataset size");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed({seed, 0x5b117}));
  rng.shuffle(idx.begin(), idx.end());
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_count));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(train_count), idx.end());
  return s;
}

ColorImage synthetic_scene(int size, std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0x5ce7e}));
  std::vector<Plane> ch(3, Plane(size, size));
  // Background: base color plus a few low-frequency waves per channel.
  for (auto& p : ch) {
    const double base = 0.2 + 0.6 * rng.uniform();
    std::fill(p.values().begin(), p.values().end(), base);
    for (int k = 0; k < 3; ++k) {
      const double fx = (rng.uniform() * 2.0 - 1.0) * 2.0 * std::numbers::pi * 1.5 / size;
      const double fy = (rng.uniform() * 2.0 - 1.0) * 2.0 * std::numbers::pi * 1.5 / size;
      const double ph = rng.uniform() * 2.0 * std::numbers::pi;
      const double amp = 0.12 * rng.uniform();
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) p.at(y, x) += amp * std::cos(fx * x + fy * y + ph);
      }
    }
  }
  // Soft-edged discs and boxes.
  const int shapes = 3 + static_cast<int>(rng.below(4));
  for (int s = 0; s < shapes; ++s) {
    const double cx = rng.uniform() * size;
    const double cy = rng.uniform() * size;
    const double r = size * (0.08 + 0.25 * rng.uniform());
    const bool disc = rng.uniform() < 0.5;
    const double col[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    const double soft = 1.0 + 2.0 * rng.uniform();
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        const double d = disc ? std::hypot(dx, dy) : std::max(std::abs(dx), std::abs(dy));
        const double a = std::clamp((r - d) / soft + 0.5, 0.0, 1.0);
        if (a <= 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          double& v = ch[static_cast<std::size_t>(c)].at(y, x);
          v = (1.0 - a) * v + a * col[c];
        }
      }
    }
  }
  // Mild pixel noise, like sensor grain.
  for (auto& p : ch) {
    for (double& v : p.values()) v += 0.01 * rng.normal();
  }
  return ColorImage::clipped(std::move(ch[0]), std::move(ch[1]), std::move(ch[2]));
}

std::vector<ColorImage> synthetic_dataset(int count, int size, std::uint64_t seed) {
  std::vector<ColorImage> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(synthetic_scene(size, derive_seed({seed, static_cast<std::uint64_t>(i)})));
  return out;
}

ColorImage sample_plain_color(int height, int width, std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0xc010}));
  const double r = rng.uniform();
  const double g = rng.uniform();
  const double b = rng.uniform();
  return ColorImage(height, width, r, g, b);
}

BinaryImage cached_reference(const GrayImage& gray, const std::optional<fs::path>& cache_dir) {
  if (!cache_dir) return ostromoukhov(gray);
  const auto vals = gray.plane().values();
  std::string key(reinterpret_cast<const char*>(vals.data()), vals.size() * sizeof(double));
  key += std::to_string(gray.height()) + "x" + std::to_string(gray.width());
  const fs::path file = *cache_dir / ("ref_" + hash_hex(key) + ".pbm");
  if (fs::exists(file)) {
    try {
      BinaryImage cached = read_pbm(file);
      if (cached.height() == gray.height() && cached.width() == gray.width()) return cached;
    } catch (const IoError&) {
      // Fall through and regenerate.
    }
  }
  BinaryImage ref = ostromoukhov(gray);
  fs::create_directories(*cache_dir);
  write_pbm(file, ref);
  return ref;
}

TrainingSet::TrainingSet(std::vector<ColorImage> images, std::optional<fs::path> cache_dir) {
  if (images.empty()) throw std::invalid_argument("training set is empty");
  const int h = images.front().height();
  const int w = images.front().width();
  for (auto& img : images) {
    if (img.height() != h || img.width() != w) {
      throw DimensionError("training images must share one size");
    }
    auto ycc = rgb_to_ycbcr(img);
    Sample s{std::move(img), ycc.luma, std::move(ycc.chroma), cached_reference(ycc.luma, cache_dir),
             floyd_steinberg(ycc.luma)};
    samples_.push_back(std::move(s));
  }
}

Dataset load_dataset(const TrainConfig& cfg) {
  Dataset d;
  if (cfg.dataset_dir.empty()) {
    d.train = synthetic_dataset(cfg.train_images, cfg.image_size, cfg.seed);
    d.val = synthetic_dataset(cfg.val_images, cfg.image_size, derive_seed({cfg.seed, 0x7a1}));
    for (int i = 0; i < cfg.train_images; ++i) d.train_names.push_back("synthetic_train_" + std::to_string(i));
    for (int i = 0; i < cfg.val_images; ++i) d.val_names.push_back("synthetic_val_" + std::to_string(i));
    return d;
  }
  auto ingest = ingest_images(list_images(cfg.dataset_dir), cfg.image_size);
  d.warnings = std::move(ingest.warnings);
  const std::size_t n = ingest.images.size();
  const auto want = static_cast<std::size_t>(cfg.train_images);
  if (n < want + 1) {
    throw std::invalid_argument("dataset " + cfg.dataset_dir + " has " + std::to_string(n) + " readable images, need more than " +
                                std::to_string(want));
  }
  const auto split = split_indices(n, want, cfg.seed);
  for (std::size_t i : split.train) {
    d.train.push_back(ingest.images[i]);
    d.train_names.push_back(ingest.sources[i].filename().string());
  }
  for (std::size_t k = 0; k < split.val.size() && k < static_cast<std::size_t>(cfg.val_images); ++k) {
    d.val.push_back(ingest.images[split.val[k]]);
    d.val_names.push_back(ingest.sources[split.val[k]].filename().string());
  }
  return d;
}

}  // namespace revhalf
