#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "revhalf/image.hpp"

namespace revhalf {

/// One error-diffusion tap, relative to the current pixel in a left-to-right scan.
/// Serpentine scanning mirrors dx on right-to-left rows.
struct DiffusionTap {
  int dy;
  int dx;
  double weight;
};

class DiffusionKernel {
 public:
  explicit DiffusionKernel(std::vector<DiffusionTap> taps);

  const std::vector<DiffusionTap>& taps() const { return taps_; }
  double weight_sum() const;

 private:
  std::vector<DiffusionTap> taps_;
};

const DiffusionKernel& floyd_steinberg_kernel();

/// Ostromoukhov's variable-coefficient kernel for an 8-bit input level.
DiffusionKernel ostromoukhov_kernel(int level);

/// Serpentine error diffusion with a kernel chosen per pixel from the *input*
/// level (0..255). Threshold at 0.5, ties to 1, no clamping of the carried error.
BinaryImage error_diffuse(const GrayImage& img, const std::function<const DiffusionKernel&(int level)>& kernel_for);

BinaryImage floyd_steinberg(const GrayImage& img);
BinaryImage ostromoukhov(const GrayImage& img);

/// i.i.d. Bernoulli(g) pixels. Throws std::invalid_argument for g outside [0,1].
BinaryImage white_noise_halftone(double g, int height, int width, std::uint64_t seed);

/// Per-pixel Bernoulli(img(y,x)); the mean-matched white-noise control.
BinaryImage white_noise_halftone(const GrayImage& img, std::uint64_t seed);

GrayImage constant_patch(double g, int height, int width);

/// Hue sweeps left to right at constant luma; chroma radius is kept inside the
/// RGB gamut so the luma survives the round trip unclipped.
ColorImage color_ramp(int height, int width, double luma);

enum class ClassicalMethod { kFloydSteinberg, kOstromoukhov };

BinaryImage classical_halftone(ClassicalMethod method, const GrayImage& img);

}  // namespace revhalf
