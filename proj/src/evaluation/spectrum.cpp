#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "csv.hpp"
#include "revhalf/evaluation.hpp"

namespace revhalf {

namespace {

constexpr int kWindowMargin = 32;

bool is_constant(const Plane& p) { return p.min() == p.max(); }

/// |DFT(z - mean)|^2 / N, unshifted.
std::vector<double> periodogram(const BinaryImage& z) {
  const int h = z.height();
  const int w = z.width();
  const std::size_t n = z.size();
  fftw_complex* in = fftw_alloc_complex(n);
  fftw_complex* out = fftw_alloc_complex(n);
  fftw_plan plan = fftw_plan_dft_2d(h, w, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  const double mean = z.mean();
  for (std::size_t i = 0; i < n; ++i) {
    in[i][0] = z.bits()[i] - mean;
    in[i][1] = 0.0;
  }
  fftw_execute(plan);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = (out[i][0] * out[i][0] + out[i][1] * out[i][1]) / static_cast<double>(n);
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(out);
  return p;
}

}  // namespace

double principal_frequency(double g) {
  if (!(g > 0.0 && g < 1.0)) throw std::invalid_argument("principal_frequency needs g in (0,1)");
  return g <= 0.5 ? std::sqrt(g) : std::sqrt(1.0 - g);
}

Halftoner classical_halftoner(ClassicalMethod method) {
  return [method](const GrayImage& gray, std::uint64_t seed) {
    if (!is_constant(gray.plane())) return classical_halftone(method, gray);
    const int m = kWindowMargin;
    const auto field = classical_halftone(method, constant_patch(gray.mean(), gray.height() + 2 * m, gray.width() + 2 * m));
    Rng rng(seed);
    // Offsets in [m/2, 3m/2] skip the start-up transient at the field edges.
    const int oy = m / 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m) + 1));
    const int ox = m / 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m) + 1));
    BinaryImage out(gray.height(), gray.width());
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) out.set(y, x, field.at(oy + y, ox + x) != 0);
    }
    return out;
  };
}

Halftoner white_noise_halftoner() {
  return [](const GrayImage& gray, std::uint64_t seed) { return white_noise_halftone(gray, seed); };
}

Halftoner network_halftoner(const ModelBundle& bundle) {
  return [&bundle](const GrayImage& gray, std::uint64_t seed) {
    return halftone_pipeline(bundle, ColorImage(gray.plane(), gray.plane(), gray.plane()), seed);
  };
}

SpectrumReport rapsd_anisotropy(const Halftoner& halftoner, double g, int size, int realizations, std::uint64_t seed) {
  if (!(g > 0.0 && g < 1.0)) throw std::invalid_argument("rapsd_anisotropy needs g in (0,1)");
  if (realizations < 1) throw std::invalid_argument("rapsd_anisotropy needs at least one realization");
  if (size < 2 || size % 2 != 0) throw std::invalid_argument("rapsd_anisotropy needs an even size");
  const std::size_t n = static_cast<std::size_t>(size) * size;
  std::vector<double> avg(n, 0.0);
  const GrayImage patch = constant_patch(g, size, size);
  for (int r = 0; r < realizations; ++r) {
    const auto z = halftoner(patch, derive_seed({seed, static_cast<std::uint64_t>(r)}));
    if (z.height() != size || z.width() != size) throw DimensionError("halftoner changed the patch size");
    const auto p = periodogram(z);
    for (std::size_t i = 0; i < n; ++i) avg[i] += p[i] / realizations;
  }

  const int rings = size / 2;
  std::vector<double> sum(static_cast<std::size_t>(rings) + 1, 0.0);
  std::vector<double> sum_sq(sum.size(), 0.0);
  std::vector<std::size_t> count(sum.size(), 0);
  for (int y = 0; y < size; ++y) {
    const int u = y < size / 2 ? y : y - size;
    for (int x = 0; x < size; ++x) {
      const int v = x < size / 2 ? x : x - size;
      if (u == 0 && v == 0) continue;
      const double radius = std::hypot(u, v) / std::numbers::sqrt2;
      const int k = std::clamp(static_cast<int>(std::ceil(radius - 1e-9)), 1, rings);
      const double p = avg[static_cast<std::size_t>(y) * size + x];
      sum[static_cast<std::size_t>(k)] += p;
      sum_sq[static_cast<std::size_t>(k)] += p * p;
      ++count[static_cast<std::size_t>(k)];
    }
  }

  SpectrumReport report;
  report.gray_level = g;
  report.principal_frequency = principal_frequency(g);
  report.realizations = realizations;
  for (int k = 1; k <= rings; ++k) {
    const auto c = static_cast<double>(count[static_cast<std::size_t>(k)]);
    const double mean = sum[static_cast<std::size_t>(k)] / c;
    const double var = c > 1 ? (sum_sq[static_cast<std::size_t>(k)] - c * mean * mean) / (c - 1) : 0.0;
    report.frequency.push_back((k - 0.5) * std::numbers::sqrt2 / size);
    report.power.push_back(mean);
    report.anisotropy_db.push_back(10.0 * std::log10(std::max(var, 0.0) / (mean * mean)));
  }
  return report;
}

double low_high_band_ratio(const SpectrumReport& report) {
  double low = 0.0, high = 0.0;
  int nl = 0, nh = 0;
  for (std::size_t i = 0; i < report.frequency.size(); ++i) {
    if (report.frequency[i] < 0.5 * report.principal_frequency) {
      low += report.power[i];
      ++nl;
    } else if (report.frequency[i] > report.principal_frequency) {
      high += report.power[i];
      ++nh;
    }
  }
  if (nl == 0 || nh == 0) throw std::invalid_argument("spectrum has no rings in one of the bands");
  return (low / nl) / (high / nh);
}

std::string spectrum_csv(const SpectrumReport& report) {
  std::string out = "# schema=spectrum/1 gray=" + csv::num(report.gray_level, 4) +
                    " principal_frequency=" + csv::num(report.principal_frequency, 4) +
                    " realizations=" + std::to_string(report.realizations) + "\n";
  out += "ring_freq,power,anisotropy_db\n";
  for (std::size_t i = 0; i < report.frequency.size(); ++i) {
    out += csv::num(report.frequency[i]) + "," + csv::sci(report.power[i]) + "," + csv::num(report.anisotropy_db[i], 4) + "\n";
  }
  return out;
}

}  // namespace revhalf
