#include "revhalf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace revhalf {

namespace {

struct Mse {
  double value;
  Plane grad;
};

Mse mse(const Plane& pred, const Plane& target) {
  require_same_shape(pred, target, "mse");
  const double n = static_cast<double>(pred.size());
  Plane g(pred.height(), pred.width());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
    g[i] = 2.0 * d / n;
  }
  return {sum / n, std::move(g)};
}

Mse mae(const Plane& pred, const Plane& target) {
  require_same_shape(pred, target, "mae");
  const double n = static_cast<double>(pred.size());
  Plane g(pred.height(), pred.width());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += std::abs(d);
    g[i] = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n;
  }
  return {sum / n, std::move(g)};
}

void axpy(Plane& y, double a, const Plane& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

Plane scaled(const Plane& x, double a) {
  Plane out = x;
  for (double& v : out.values()) v *= a;
  return out;
}

void require_psi(const PerceptualExtractor* psi, double weight) {
  if (weight > 0.0 && psi == nullptr) {
    throw std::invalid_argument("perceptual weight is positive but no feature extractor is configured");
  }
}

}  // namespace

LossWeights LossWeights::stage1() {
  LossWeights w;
  w.alpha = 0.1;
  w.beta = 0.6;
  w.gamma = 0.3;
  w.epsilon = 1.0;
  w.zeta = 0.0;
  w.eta = 0.0;
  return w;
}

LossWeights LossWeights::stage2() {
  LossWeights w;
  w.alpha = 0.4;
  w.beta = 0.6;
  w.gamma = 0.9;
  w.epsilon = 0.3;
  w.zeta = 1.0;
  w.eta = 2.0e-5;
  return w;
}

LossWeights LossWeights::lumin() {
  LossWeights w;
  w.w_a = 2.0e-6;
  w.w_b = 1.5;
  return w;
}

void LossWeights::validate() const {
  for (double v : {alpha, beta, gamma, epsilon, zeta, eta, w_a, w_b}) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("loss weights must be finite and nonnegative");
  }
}

LossTerm loss_bin(const Plane& pseudo) {
  const double n = static_cast<double>(pseudo.size());
  Plane g(pseudo.height(), pseudo.width());
  double sum = 0.0;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const double gate = pseudo[i] >= 0.5 ? 1.0 : 0.0;
    const double d = gate - pseudo[i];
    sum += std::abs(d);
    g[i] = -(d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n;
  }
  return {sum / n, std::move(g)};
}

LossTerm loss_tone(const Plane& halftone, const Plane& gray) {
  require_same_shape(halftone, gray, "loss_tone");
  auto m = mse(gaussian_filter(halftone), gaussian_filter(gray));
  return {m.value, gaussian_filter_adjoint(m.grad)};
}

LossTerm loss_blue(const Plane& zp, const Plane& p_gray, const FreqMask& mask) {
  require_same_shape(zp, p_gray, "loss_blue");
  if (mask.height() != zp.height() || mask.width() != zp.width()) throw DimensionError("loss_blue: mask size mismatch");
  const Plane a = dct2(zp);
  const Plane b = dct2(p_gray);
  const double m = static_cast<double>(mask.pass_count());
  Plane g(zp.height(), zp.width());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!mask.bits()[i]) continue;
    const double d = a[i] - b[i];
    sum += d * d;
    g[i] = 2.0 * d / m;
  }
  // idct2 is the adjoint of the orthonormal dct2.
  return {sum / m, idct2(g)};
}

double loss_half(double bin, double tone, double blue, const LossWeights& w) {
  return w.alpha * bin + w.beta * tone + w.gamma * blue;
}

HalfLoss loss_half(const Plane& pseudo, const Plane& halftone, const Plane& gray, const Plane& zp,
                   const Plane& p_gray, const FreqMask& mask, const LossWeights& w) {
  auto b = loss_bin(pseudo);
  auto t = loss_tone(halftone, gray);
  auto u = loss_blue(zp, p_gray, mask);
  HalfLoss out;
  out.bin = b.value;
  out.tone = t.value;
  out.blue = u.value;
  out.value = loss_half(b.value, t.value, u.value, w);
  out.d_pseudo = scaled(b.grad, w.alpha);
  out.d_halftone = scaled(t.grad, w.beta);
  out.d_zp = scaled(u.grad, w.gamma);
  return out;
}

ChromaLoss loss_chromin(const ChromaImage& target, const Plane& cb, const Plane& cr) {
  auto a = mse(cb, target.cb());
  auto b = mse(cr, target.cr());
  // Mean over both planes.
  return {(a.value + b.value) / 2.0, scaled(a.grad, 0.5), scaled(b.grad, 0.5)};
}

PerceptualLoss perceptual_mse(const PerceptualExtractor& psi, const std::vector<Plane>& target,
                              const std::vector<Plane>& pred) {
  const auto ft = psi.forward(target);
  const auto fp = psi.forward(pred);
  std::size_t n = 0;
  for (const auto& p : fp) n += p.size();
  double sum = 0.0;
  std::vector<Plane> g;
  for (std::size_t c = 0; c < fp.size(); ++c) {
    Plane gc(fp[c].height(), fp[c].width());
    for (std::size_t i = 0; i < fp[c].size(); ++i) {
      const double d = fp[c][i] - ft[c][i];
      sum += d * d;
      gc[i] = 2.0 * d / static_cast<double>(n);
    }
    g.push_back(std::move(gc));
  }
  return {sum / static_cast<double>(n), psi.vjp(pred, g)};
}

RestoreLoss loss_restore(const ChromaImage& target_chroma, const Plane& cb, const Plane& cr, const ColorImage& target,
                         const Plane& luma, const LossWeights& w, const PerceptualExtractor* psi) {
  require_psi(psi, w.eta);
  const auto c = loss_chromin(target_chroma, cb, cr);
  RestoreLoss out;
  out.chroma = c.value;
  out.d_cb = scaled(c.d_cb, w.zeta);
  out.d_cr = scaled(c.d_cr, w.zeta);
  out.d_luma = Plane(luma.height(), luma.width());
  if (w.eta > 0.0) {
    auto raw = ycbcr_to_rgb_raw(luma, cb, cr);
    std::vector<Plane> clipped = raw;
    for (auto& p : clipped) {
      for (double& v : p.values()) v = std::clamp(v, 0.0, 1.0);
    }
    const auto p = perceptual_mse(*psi, {target.r(), target.g(), target.b()}, clipped);
    out.perceptual = p.value;
    // Chain through clipping and the inverse color transform.
    const double kGb = kLumaB * kCbScale / kLumaG;
    const double kGr = kLumaR * kCrScale / kLumaG;
    for (std::size_t i = 0; i < luma.size(); ++i) {
      double g[3];
      for (int k = 0; k < 3; ++k) {
        const double v = raw[static_cast<std::size_t>(k)][i];
        g[k] = (v < 0.0 || v > 1.0) ? 0.0 : w.eta * p.grad[static_cast<std::size_t>(k)][i];
      }
      out.d_luma[i] += g[0] + g[1] + g[2];
      out.d_cb[i] += -kGb * g[1] + kCbScale * g[2];
      out.d_cr[i] += kCrScale * g[0] - kGr * g[1];
    }
  }
  out.value = w.zeta * out.chroma + w.eta * out.perceptual;
  return out;
}

LuminLoss loss_lumin(const Plane& initial, const Plane& refined, const Plane& gray, const LossWeights& w,
                     const PerceptualExtractor* psi) {
  require_psi(psi, w.w_a * w.w_b);
  require_same_shape(initial, gray, "loss_lumin");
  require_same_shape(refined, gray, "loss_lumin");
  auto content = mse(initial, gray);
  auto abs_err = mae(refined, gray);
  LuminLoss out;
  out.content = content.value;
  out.mae = abs_err.value;
  out.d_initial = std::move(content.grad);
  out.d_refined = scaled(abs_err.grad, w.w_b);
  if (w.w_a > 0.0 && w.w_b > 0.0) {
    const auto p = perceptual_mse(*psi, {gray, gray, gray}, {refined, refined, refined});
    out.perceptual = p.value;
    for (const auto& g : p.grad) axpy(out.d_refined, w.w_b * w.w_a, g);
  }
  out.value = out.content + w.w_b * (w.w_a * out.perceptual + out.mae);
  return out;
}

LossTerm loss_guidance(const Plane& f_pred, const Plane& f_ref) {
  auto m = mse(f_pred, f_ref);
  return {m.value, std::move(m.grad)};
}

double stage_loss(int stage, const StageParts& parts, const LossWeights& w) {
  auto need = [&](const std::optional<double>& v, const char* name) {
    if (!v) throw std::invalid_argument("stage " + std::to_string(stage) + " loss is missing " + name);
    return *v;
  };
  switch (stage) {
    case 1:
      return need(parts.half, "L_half") + w.epsilon * need(parts.guidance, "L_G");
    case 2:
      return need(parts.half, "L_half") + need(parts.restore, "L_restore") + w.epsilon * need(parts.guidance, "L_G");
    case 3:
      return need(parts.lumin, "L_lumin");
    default:
      throw std::invalid_argument("unknown stage " + std::to_string(stage));
  }
}

}  // namespace revhalf
