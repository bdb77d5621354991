#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "revhalf/halftone.hpp"
#include "revhalf/image.hpp"
#include "revhalf/network.hpp"

namespace revhalf {

// ---- tone and structure -------------------------------------------------------

/// Returned by tone_psnr when the blurred inputs are identical.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// PSNR (peak 1) between the 11x11, sigma 2 blurs of the two inputs.
double tone_psnr(const Plane& a, const Plane& b);
double tone_psnr(const BinaryImage& halftone, const GrayImage& gray);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean SSIM over the valid region of an 11x11, sigma 1.5 Gaussian window.
/// Throws DimensionError on mismatched or too-small inputs.
double structure_ssim(const Plane& a, const Plane& b);
double structure_ssim(const BinaryImage& halftone, const GrayImage& gray);

/// Mean of the per-channel SSIM.
double color_ssim(const ColorImage& a, const ColorImage& b);

struct ImageMetrics {
  std::string name;
  double tone_psnr = 0.0;
  double structure_ssim = 0.0;
  double restore_psnr = 0.0;
  double restore_ssim = 0.0;
};

struct MetricsReport {
  std::string method;
  std::vector<ImageMetrics> images;
  ImageMetrics mean;
};

/// Halftone metrics for the network (with restoration) or a classical method
/// (restoration columns are NaN). `seed` drives the noise injection.
MetricsReport evaluate_metrics(const ModelBundle& bundle, const std::vector<ColorImage>& images,
                               const std::vector<std::string>& names, std::uint64_t seed);
MetricsReport evaluate_metrics(ClassicalMethod method, const std::vector<ColorImage>& images,
                               const std::vector<std::string>& names);

std::string metrics_csv(const MetricsReport& report);

// ---- spectrum -----------------------------------------------------------------

/// sqrt(g) for g <= 0.5, else sqrt(1-g). Throws std::invalid_argument outside (0,1).
double principal_frequency(double g);

struct SpectrumReport {
  double gray_level = 0.0;
  /// Ring centers in cycles/pixel, strictly increasing.
  std::vector<double> frequency;
  std::vector<double> power;
  std::vector<double> anisotropy_db;
  double principal_frequency = 0.0;
  int realizations = 0;
};

/// Dithers a constant gray patch; `seed` selects the realization.
using Halftoner = std::function<BinaryImage(const GrayImage& gray, std::uint64_t seed)>;

/// Error diffusion is deterministic, so each realization is a seed-chosen
/// window of a larger dithered field.
Halftoner classical_halftoner(ClassicalMethod method);
Halftoner white_noise_halftoner();
Halftoner network_halftoner(const ModelBundle& bundle);

/// Averaged periodogram of `realizations` dithers of constant g. Ring k
/// (1..size/2) collects frequencies with radius in (sqrt2*(k-1), sqrt2*k]
/// frequency-index units, so the rings reach the spectrum corner; DC is dropped.
SpectrumReport rapsd_anisotropy(const Halftoner& halftoner, double g, int size, int realizations,
                                std::uint64_t seed = 1);

/// Mean ring power below 0.5*f_p divided by mean ring power above f_p.
double low_high_band_ratio(const SpectrumReport& report);

std::string spectrum_csv(const SpectrumReport& report);

// ---- compression entropy ------------------------------------------------------

/// The 8 dihedral variants: rotations by 0/90/180/270, each with and without a
/// horizontal flip.
std::vector<BinaryImage> dihedral_variants(const BinaryImage& img);

struct EntropyReport {
  std::size_t raw_bytes = 0;
  std::size_t compressed_bytes = 0;
  /// 100 * (1 - compressed/raw).
  double rate = 0.0;
};

/// Each dihedral variant becomes one archive entry of 1 byte per pixel,
/// deflated independently at level 9. Throws std::invalid_argument when empty.
EntropyReport entropy_rate(const std::vector<BinaryImage>& halftones);

struct EntropyRow {
  std::string method;
  std::size_t images = 0;
  EntropyReport report;
};

std::string entropy_csv(const std::vector<EntropyRow>& rows);

// ---- robustness -----------------------------------------------------------------

enum class PerturbKind { kNone, kFlip, kMask, kImpulse };

struct Perturbation {
  PerturbKind kind = PerturbKind::kNone;
  double level = 0.0;

  std::string name() const;
  static Perturbation none() { return {}; }
  static Perturbation flip() { return {PerturbKind::kFlip, 0.0}; }
  static Perturbation mask() { return {PerturbKind::kMask, 0.0}; }
  static Perturbation impulse(double q) { return {PerturbKind::kImpulse, q}; }
};

/// flip: horizontal mirror. mask: the centered half-width, half-height square
/// (25% of the area) set to 0. impulse(q): round(q*N) pixels chosen uniformly
/// without replacement are redrawn from Bernoulli(0.5). For a fixed seed the
/// impulse sets are nested across q. Throws std::invalid_argument for q outside [0,1].
BinaryImage perturb(const BinaryImage& halftone, const Perturbation& p, std::uint64_t seed);

/// The mask region, 1 inside.
Plane mask_region(int height, int width);

struct RobustnessRow {
  std::string perturbation;
  double psnr = 0.0;
  /// NaN except for the mask case.
  double unmasked_psnr = 0.0;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
  /// Per-perturbation error map of the first image.
  std::vector<GrayImage> error_maps;
};

/// none, flip, mask, impulse 0.05/0.1/0.2 by default.
std::vector<Perturbation> default_perturbations();

/// Mean restored-RGB PSNR per perturbation. Flipped restorations are scored
/// against the flipped original.
RobustnessReport robustness_suite(const ModelBundle& bundle, const std::vector<ColorImage>& images,
                                  std::uint64_t seed, const std::vector<Perturbation>& perturbations = default_perturbations());

std::string robustness_csv(const RobustnessReport& report);

}  // namespace revhalf
