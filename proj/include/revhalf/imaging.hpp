#pragma once

#include <utility>
#include <vector>

#include "revhalf/image.hpp"

namespace revhalf {

// ---- color ---------------------------------------------------------------
//
// Full-range BT.601: Y = 0.299R + 0.587G + 0.114B, chroma offset to 0.5.

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;
inline constexpr double kCbScale = 1.772;
inline constexpr double kCrScale = 1.402;

struct YCbCr {
  GrayImage luma;
  ChromaImage chroma;
};

YCbCr rgb_to_ycbcr(const ColorImage& img);
GrayImage luminance(const ColorImage& img);
ColorImage ycbcr_to_rgb(const GrayImage& y, const ChromaImage& c);

/// Unclipped inverse transform on raw planes. Used by the losses, which need
/// to know where clipping kicks in.
std::vector<Plane> ycbcr_to_rgb_raw(const Plane& y, const Plane& cb, const Plane& cr);

// ---- gaussian filtering ----------------------------------------------------

inline constexpr int kToneKernelSize = 11;
inline constexpr double kToneSigma = 2.0;

/// Normalized 1-D Gaussian taps; the 2-D kernel is their outer product.
std::vector<double> gaussian_taps(int size, double sigma);

/// Separable normalized Gaussian with reflect padding (edge sample not repeated).
/// Throws DimensionError if the plane is smaller than the kernel.
Plane gaussian_filter(const Plane& in, int size = kToneKernelSize, double sigma = kToneSigma);

/// Adjoint of gaussian_filter; maps an output-space gradient to input space.
Plane gaussian_filter_adjoint(const Plane& grad_out, int size = kToneKernelSize,
                              double sigma = kToneSigma);

/// Same filter restricted to windows fully inside the image ("valid" region).
Plane gaussian_filter_valid(const Plane& in, int size, double sigma);

GrayImage gaussian_blur(const GrayImage& img);

// ---- DCT -----------------------------------------------------------------

/// Orthonormal type-II 2-D DCT. Coefficients are unbounded, hence a Plane.
Plane dct2(const Plane& img);
inline Plane dct2(const GrayImage& img) { return dct2(img.plane()); }

/// Exact inverse of dct2 (type-III, orthonormal). Also its adjoint.
Plane idct2(const Plane& coeffs);

// ---- low-frequency mask ----------------------------------------------------

class FreqMask {
 public:
  FreqMask(int height, int width, std::vector<unsigned char> pass);

  int height() const { return height_; }
  int width() const { return width_; }
  int pass_count() const { return pass_count_; }
  bool passes(int u, int v) const { return pass_[static_cast<std::size_t>(u) * width_ + v] != 0; }
  const std::vector<unsigned char>& bits() const { return pass_; }

 private:
  int height_;
  int width_;
  int pass_count_;
  std::vector<unsigned char> pass_;
};

inline constexpr double kBlueNoiseMaskFraction = 0.038;

/// Passes the floor(fraction*H*W) coefficients with the smallest radial index
/// sqrt(u^2+v^2), ties broken by u then v. DC always passes.
FreqMask low_freq_mask(int height, int width, double fraction);

// ---- error maps -------------------------------------------------------------

/// Per-pixel mean absolute RGB difference.
GrayImage error_map(const ColorImage& a, const ColorImage& b);

/// Mean squared error over all three channels.
double color_mse(const ColorImage& a, const ColorImage& b);

/// PSNR with peak 1.0. Returns +infinity for identical inputs.
double psnr_from_mse(double mse);

}  // namespace revhalf
