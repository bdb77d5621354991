#include <cmath>
#include <limits>

#include "csv.hpp"
#include "revhalf/evaluation.hpp"
#include "revhalf/imaging.hpp"

namespace revhalf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Plane product(const Plane& a, const Plane& b) {
  Plane out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

void add_to_mean(ImageMetrics& acc, const ImageMetrics& m, double w) {
  acc.tone_psnr += w * m.tone_psnr;
  acc.structure_ssim += w * m.structure_ssim;
  acc.restore_psnr += w * m.restore_psnr;
  acc.restore_ssim += w * m.restore_ssim;
}

std::string name_at(const std::vector<std::string>& names, std::size_t i) {
  return i < names.size() ? names[i] : "image" + std::to_string(i);
}

}  // namespace

double tone_psnr(const Plane& a, const Plane& b) {
  require_same_shape(a, b, "tone_psnr");
  const Plane fa = gaussian_filter(a);
  const Plane fb = gaussian_filter(b);
  double s = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) s += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  if (s == 0.0) return kInfinitePsnr;
  return psnr_from_mse(s / static_cast<double>(fa.size()));
}

double tone_psnr(const BinaryImage& halftone, const GrayImage& gray) {
  return tone_psnr(halftone.to_plane(), gray.plane());
}

double structure_ssim(const Plane& a, const Plane& b) {
  require_same_shape(a, b, "structure_ssim");
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const Plane mu_a = gaussian_filter_valid(a, kSsimWindow, kSsimSigma);
  const Plane mu_b = gaussian_filter_valid(b, kSsimWindow, kSsimSigma);
  const Plane aa = gaussian_filter_valid(product(a, a), kSsimWindow, kSsimSigma);
  const Plane bb = gaussian_filter_valid(product(b, b), kSsimWindow, kSsimSigma);
  const Plane ab = gaussian_filter_valid(product(a, b), kSsimWindow, kSsimSigma);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = aa[i] - ma * ma;
    const double vb = bb[i] - mb * mb;
    const double cov = ab[i] - ma * mb;
    sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

double structure_ssim(const BinaryImage& halftone, const GrayImage& gray) {
  return structure_ssim(halftone.to_plane(), gray.plane());
}

double color_ssim(const ColorImage& a, const ColorImage& b) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += structure_ssim(a.channel(c), b.channel(c));
  return s / 3.0;
}

MetricsReport evaluate_metrics(const ModelBundle& bundle, const std::vector<ColorImage>& images,
                               const std::vector<std::string>& names, std::uint64_t seed) {
  MetricsReport report;
  report.method = "ours";
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto ht = halftone_pipeline(bundle, images[i], derive_seed({seed, i}));
    const auto gray = luminance(images[i]);
    const auto restored = restore_pipeline(bundle, ht);
    ImageMetrics m{name_at(names, i), tone_psnr(ht, gray), structure_ssim(ht, gray),
                   psnr_from_mse(color_mse(restored, images[i])), color_ssim(restored, images[i])};
    add_to_mean(report.mean, m, 1.0 / static_cast<double>(images.size()));
    report.images.push_back(std::move(m));
  }
  report.mean.name = "mean";
  return report;
}

MetricsReport evaluate_metrics(ClassicalMethod method, const std::vector<ColorImage>& images,
                               const std::vector<std::string>& names) {
  MetricsReport report;
  report.method = method == ClassicalMethod::kFloydSteinberg ? "floyd-steinberg" : "ostromoukhov";
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto gray = luminance(images[i]);
    const auto ht = classical_halftone(method, gray);
    ImageMetrics m{name_at(names, i), tone_psnr(ht, gray), structure_ssim(ht, gray), 0.0, 0.0};
    add_to_mean(report.mean, m, 1.0 / static_cast<double>(images.size()));
    m.restore_psnr = m.restore_ssim = kNaN;
    report.images.push_back(std::move(m));
  }
  report.mean.name = "mean";
  report.mean.restore_psnr = report.mean.restore_ssim = kNaN;
  return report;
}

std::string metrics_csv(const MetricsReport& report) {
  std::string out = "# schema=metrics/1 method=" + report.method + "\n";
  out += "image,tone_psnr,structure_ssim,restore_psnr,restore_ssim\n";
  auto row = [&](const ImageMetrics& m) {
    out += m.name + "," + csv::num(m.tone_psnr) + "," + csv::num(m.structure_ssim) + "," + csv::num(m.restore_psnr) +
           "," + csv::num(m.restore_ssim) + "\n";
  };
  for (const auto& m : report.images) row(m);
  row(report.mean);
  return out;
}

}  // namespace revhalf
