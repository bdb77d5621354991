#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "csv.hpp"
#include "revhalf/evaluation.hpp"
#include "revhalf/imaging.hpp"

namespace revhalf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ColorImage mirror(const ColorImage& img) {
  std::vector<Plane> planes;
  for (int c = 0; c < 3; ++c) {
    Plane p(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) p.at(y, x) = img.channel(c).at(y, img.width() - 1 - x);
    }
    planes.push_back(std::move(p));
  }
  return ColorImage(planes[0], planes[1], planes[2]);
}

/// PSNR over the pixels where `weight` is 1.
double masked_psnr(const ColorImage& a, const ColorImage& b, const Plane& weight) {
  double s = 0.0, n = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      const double d = a.channel(c)[i] - b.channel(c)[i];
      s += weight[i] * d * d;
      n += weight[i];
    }
  }
  return psnr_from_mse(s / n);
}

}  // namespace

std::string Perturbation::name() const {
  switch (kind) {
    case PerturbKind::kNone:
      return "none";
    case PerturbKind::kFlip:
      return "flip";
    case PerturbKind::kMask:
      return "mask";
    case PerturbKind::kImpulse:
      return "impulse_" + csv::num(level, 2);
  }
  return "unknown";
}

Plane mask_region(int height, int width) {
  Plane m(height, width, 0.0);
  const int mh = height / 2;
  const int mw = width / 2;
  for (int y = (height - mh) / 2; y < (height - mh) / 2 + mh; ++y) {
    for (int x = (width - mw) / 2; x < (width - mw) / 2 + mw; ++x) m.at(y, x) = 1.0;
  }
  return m;
}

BinaryImage perturb(const BinaryImage& halftone, const Perturbation& p, std::uint64_t seed) {
  switch (p.kind) {
    case PerturbKind::kNone:
      return halftone;
    case PerturbKind::kFlip: {
      BinaryImage out(halftone.height(), halftone.width());
      for (int y = 0; y < halftone.height(); ++y) {
        for (int x = 0; x < halftone.width(); ++x) out.set(y, x, halftone.at(y, halftone.width() - 1 - x) != 0);
      }
      return out;
    }
    case PerturbKind::kMask: {
      const Plane m = mask_region(halftone.height(), halftone.width());
      std::vector<std::uint8_t> bits(halftone.bits().begin(), halftone.bits().end());
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (m[i] != 0.0) bits[i] = 0;
      }
      return BinaryImage(halftone.height(), halftone.width(), std::move(bits));
    }
    case PerturbKind::kImpulse: {
      if (!(p.level >= 0.0 && p.level <= 1.0)) throw std::invalid_argument("impulse level must lie in [0,1]");
      std::vector<std::uint8_t> bits(halftone.bits().begin(), halftone.bits().end());
      std::vector<std::size_t> order(bits.size());
      std::iota(order.begin(), order.end(), 0);
      Rng rng(seed);
      rng.shuffle(order.begin(), order.end());
      const auto k = static_cast<std::size_t>(std::llround(p.level * static_cast<double>(bits.size())));
      for (std::size_t j = 0; j < k; ++j) bits[order[j]] = rng.uniform() < 0.5 ? 1 : 0;
      return BinaryImage(halftone.height(), halftone.width(), std::move(bits));
    }
  }
  throw std::invalid_argument("unknown perturbation");
}

std::vector<Perturbation> default_perturbations() {
  return {Perturbation::none(),         Perturbation::flip(),         Perturbation::mask(),
          Perturbation::impulse(0.05), Perturbation::impulse(0.1), Perturbation::impulse(0.2)};
}

RobustnessReport robustness_suite(const ModelBundle& bundle, const std::vector<ColorImage>& images,
                                  std::uint64_t seed, const std::vector<Perturbation>& perturbations) {
  if (images.empty()) throw std::invalid_argument("robustness_suite needs at least one image");
  std::vector<BinaryImage> clean;
  for (std::size_t i = 0; i < images.size(); ++i) clean.push_back(halftone_pipeline(bundle, images[i], derive_seed({seed, i})));

  RobustnessReport report;
  const double inv = 1.0 / static_cast<double>(images.size());
  for (const auto& p : perturbations) {
    RobustnessRow row{p.name(), 0.0, p.kind == PerturbKind::kMask ? 0.0 : kNaN};
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto ht = perturb(clean[i], p, derive_seed({seed, 0x9e, i}));
      const auto restored = restore_pipeline(bundle, ht);
      const ColorImage reference = p.kind == PerturbKind::kFlip ? mirror(images[i]) : images[i];
      row.psnr += inv * psnr_from_mse(color_mse(restored, reference));
      if (p.kind == PerturbKind::kMask) {
        Plane keep = mask_region(reference.height(), reference.width());
        for (auto& v : keep.values()) v = 1.0 - v;
        row.unmasked_psnr += inv * masked_psnr(restored, reference, keep);
      }
      if (i == 0) report.error_maps.push_back(error_map(restored, reference));
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string robustness_csv(const RobustnessReport& report) {
  std::string out = "# schema=robustness/1\nperturbation,psnr,unmasked_psnr\n";
  for (const auto& r : report.rows) out += r.perturbation + "," + csv::num(r.psnr) + "," + csv::num(r.unmasked_psnr) + "\n";
  return out;
}

}  // namespace revhalf
