#pragma once

#include <optional>
#include <vector>

#include "revhalf/image.hpp"
#include "revhalf/imaging.hpp"
#include "revhalf/perceptual.hpp"

namespace revhalf {

/// Coefficients of every loss term. epsilon weights the guidance loss.
struct LossWeights {
  double alpha = 0.1;
  double beta = 0.6;
  double gamma = 0.3;
  double epsilon = 1.0;
  double zeta = 1.0;
  double eta = 0.0;
  double w_a = 2.0e-6;
  double w_b = 1.5;

  static LossWeights stage1();
  static LossWeights stage2();
  /// Weights of the luminance loss used for predictor training.
  static LossWeights lumin();

  /// Throws std::invalid_argument for negative or non-finite entries.
  void validate() const;
};

/// A scalar loss and its gradient with respect to the first image argument.
struct LossTerm {
  double value = 0.0;
  Plane grad;
};

/// mean |gate(x) - x|. The gate output is treated as a constant, so the
/// gradient is -sign(gate(x) - x) / N.
LossTerm loss_bin(const Plane& pseudo);

/// mean (G*halftone - G*gray)^2 with the 11x11, sigma 2 Gaussian G.
LossTerm loss_tone(const Plane& halftone, const Plane& gray);

/// Mean squared DCT difference over the entries passed by `mask`.
LossTerm loss_blue(const Plane& zp, const Plane& p_gray, const FreqMask& mask);

struct HalfLoss {
  double value = 0.0;
  double bin = 0.0;
  double tone = 0.0;
  double blue = 0.0;
  Plane d_pseudo;
  Plane d_halftone;
  Plane d_zp;
};

double loss_half(double bin, double tone, double blue, const LossWeights& w);
HalfLoss loss_half(const Plane& pseudo, const Plane& halftone, const Plane& gray, const Plane& zp,
                   const Plane& p_gray, const FreqMask& mask, const LossWeights& w);

/// MSE over both chroma planes; gradients with respect to the predicted planes.
struct ChromaLoss {
  double value = 0.0;
  Plane d_cb;
  Plane d_cr;
};
ChromaLoss loss_chromin(const ChromaImage& target, const Plane& cb, const Plane& cr);

/// MSE between extractor features of two RGB images; gradient w.r.t. `pred`.
struct PerceptualLoss {
  double value = 0.0;
  std::vector<Plane> grad;
};
PerceptualLoss perceptual_mse(const PerceptualExtractor& psi, const std::vector<Plane>& target,
                              const std::vector<Plane>& pred);

/// zeta * MSE(chroma) + eta * MSE(psi(I_c), psi(O_c)) with
/// O_c = ycbcr_to_rgb(luma, cb, cr). Throws std::invalid_argument if eta > 0
/// and no extractor is given.
struct RestoreLoss {
  double value = 0.0;
  double chroma = 0.0;
  double perceptual = 0.0;
  Plane d_cb;
  Plane d_cr;
  Plane d_luma;
};
RestoreLoss loss_restore(const ChromaImage& target_chroma, const Plane& cb, const Plane& cr, const ColorImage& target,
                         const Plane& luma, const LossWeights& w, const PerceptualExtractor* psi);

/// MSE(initial, gray) + w_b * (w_a * MSE(psi(refined), psi(gray)) + MAE(refined, gray)).
/// Gray planes are replicated to three channels for the extractor.
struct LuminLoss {
  double value = 0.0;
  double content = 0.0;
  double perceptual = 0.0;
  double mae = 0.0;
  Plane d_initial;
  Plane d_refined;
};
LuminLoss loss_lumin(const Plane& initial, const Plane& refined, const Plane& gray, const LossWeights& w,
                     const PerceptualExtractor* psi);

/// MSE(F(O_h), F(I_h)); gradient w.r.t. the first argument.
LossTerm loss_guidance(const Plane& f_pred, const Plane& f_ref);

/// Already-evaluated terms for stage_loss; absent terms are std::nullopt.
struct StageParts {
  std::optional<double> half = std::nullopt;
  std::optional<double> guidance = std::nullopt;
  std::optional<double> restore = std::nullopt;
  std::optional<double> lumin = std::nullopt;
};

/// stage 1: half + epsilon*G; stage 2: half + restore + epsilon*G; stage 3: lumin.
/// Throws std::invalid_argument for an unknown stage or missing parts.
double stage_loss(int stage, const StageParts& parts, const LossWeights& w);

}  // namespace revhalf
