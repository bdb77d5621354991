#include "revhalf/network.hpp"

#include <cmath>
#include <stdexcept>

#include "revhalf/imaging.hpp"

namespace revhalf {

namespace {

using nn::Shape;
using nn::Tensor;

Conv make_conv(int cin, int cout, int k, int stride, double gain, Rng& rng) {
  const double fan_in = static_cast<double>(cin) * k * k;
  const double std = gain / std::sqrt(fan_in);
  std::vector<float> w(static_cast<std::size_t>(cout) * cin * k * k);
  for (float& v : w) v = static_cast<float>(std * rng.normal());
  return Conv{Tensor::from({cout, cin, k, k}, std::move(w), true), Tensor::zeros({1, cout, 1, 1}, true), stride};
}

// He gain for leaky ReLU.
const double kActGain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
constexpr double kResidualGain = 0.3;

Tensor act(const Tensor& x) { return nn::leaky_relu(x, kLeakySlope); }

Tensor residual(const std::pair<Conv, Conv>& block, const Tensor& x) {
  return nn::add(x, block.second(act(block.first(x))));
}

void add_conv(std::vector<NamedTensor>& out, const std::string& name, const Conv& c) {
  out.push_back({name + ".weight", c.weight});
  out.push_back({name + ".bias", c.bias});
}

std::pair<Conv, Conv> make_residual(int ch, Rng& rng) {
  return {make_conv(ch, ch, 3, 1, kActGain, rng), make_conv(ch, ch, 3, 1, kResidualGain, rng)};
}

std::vector<float> copy_values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

void require_divisible(int h, int w, int levels) {
  const int m = 1 << levels;
  if (h % m != 0 || w % m != 0 || h < m || w < m) {
    throw DimensionError("spatial size " + std::to_string(h) + "x" + std::to_string(w) + " must be divisible by " +
                         std::to_string(m));
  }
}

void require_binary(const Plane& p) {
  if (binarity(p) < 1.0) throw RangeError("halftone input must contain only 0 and 1");
}

}  // namespace

// ---- NetConfig ----------------------------------------------------------------

void NetConfig::validate() const {
  if (downscales != upscales) throw std::invalid_argument("downscales must equal upscales");
  if (downscales < 1 || downscales > 6) throw std::invalid_argument("downscales must be in [1,6]");
  if (base_channels < 4) throw std::invalid_argument("base_channels must be at least 4");
  if (residual_blocks_unet < 0 || conv_blocks < 0 || predictor_residual_enhance < 0 || guidance_residual < 0) {
    throw std::invalid_argument("block counts must be nonnegative");
  }
  if (nib_channels < 0) throw std::invalid_argument("nib_channels must be nonnegative");
}

nlohmann::json NetConfig::to_json() const {
  return {{"base_channels", base_channels},
          {"downscales", downscales},
          {"upscales", upscales},
          {"residual_blocks_unet", residual_blocks_unet},
          {"conv_blocks", conv_blocks},
          {"predictor_residual_enhance", predictor_residual_enhance},
          {"guidance_residual", guidance_residual},
          {"nib_channels", nib_channels},
          {"seed", seed}};
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
  NetConfig c;
  c.base_channels = j.at("base_channels").get<int>();
  c.downscales = j.at("downscales").get<int>();
  c.upscales = j.at("upscales").get<int>();
  c.residual_blocks_unet = j.at("residual_blocks_unet").get<int>();
  c.conv_blocks = j.at("conv_blocks").get<int>();
  c.predictor_residual_enhance = j.at("predictor_residual_enhance").get<int>();
  c.guidance_residual = j.at("guidance_residual").get<int>();
  c.nib_channels = j.at("nib_channels").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

// ---- UNet -----------------------------------------------------------------------

UNet::UNet(const std::string& prefix, int in_channels, int out_channels, int base, int levels, int residual_blocks,
           int conv_blocks, Rng& rng)
    : in_channels_(in_channels), prefix_(prefix) {
  head_ = make_conv(in_channels, base, 3, 1, kActGain, rng);
  int ch = base;
  for (int i = 0; i < levels; ++i) {
    down_.push_back(make_conv(ch, 2 * ch, 3, 2, kActGain, rng));
    ch *= 2;
  }
  for (int i = 0; i < residual_blocks; ++i) res_.push_back(make_residual(ch, rng));
  for (int i = 0; i < levels; ++i) {
    up_.push_back(make_conv(ch, ch / 2, 3, 1, kActGain, rng));
    ch /= 2;
  }
  for (int i = 0; i < conv_blocks; ++i) blocks_.push_back(make_conv(ch, ch, 3, 1, kActGain, rng));
  out_ = make_conv(ch, out_channels, 3, 1, 0.5, rng);
}

Tensor UNet::operator()(const Tensor& x) const {
  if (x.shape().c != in_channels_) {
    throw DimensionError(prefix_ + ": expected " + std::to_string(in_channels_) + " input channels, got " +
                         std::to_string(x.shape().c));
  }
  std::vector<Tensor> skips;
  Tensor h = act(head_(x));
  for (const auto& d : down_) {
    skips.push_back(h);
    h = act(d(h));
  }
  for (const auto& r : res_) h = residual(r, h);
  for (const auto& u : up_) {
    h = nn::add(act(u(nn::upsample2x(h))), skips.back());
    skips.pop_back();
  }
  for (const auto& b : blocks_) h = act(b(h));
  return out_(h);
}

void UNet::collect(std::vector<NamedTensor>& out) const {
  add_conv(out, prefix_ + ".head", head_);
  for (std::size_t i = 0; i < down_.size(); ++i) add_conv(out, prefix_ + ".down" + std::to_string(i), down_[i]);
  for (std::size_t i = 0; i < res_.size(); ++i) {
    add_conv(out, prefix_ + ".res" + std::to_string(i) + ".a", res_[i].first);
    add_conv(out, prefix_ + ".res" + std::to_string(i) + ".b", res_[i].second);
  }
  for (std::size_t i = 0; i < up_.size(); ++i) add_conv(out, prefix_ + ".up" + std::to_string(i), up_[i]);
  for (std::size_t i = 0; i < blocks_.size(); ++i) add_conv(out, prefix_ + ".block" + std::to_string(i), blocks_[i]);
  add_conv(out, prefix_ + ".out", out_);
}

// ---- ModelBundle ------------------------------------------------------------------

const char* component_name(Component c) {
  switch (c) {
    case Component::kEncoder:
      return "encoder";
    case Component::kDecoder:
      return "decoder";
    case Component::kPredictor:
      return "predictor";
    case Component::kGuidance:
      return "guidance";
  }
  return "unknown";
}

ModelBundle::ModelBundle(const NetConfig& config) : config_(config) {
  config_.validate();
  const int b = config_.base_channels;
  const int levels = config_.downscales;
  Rng enc(derive_seed({config_.seed, 1}));
  encoder_ = UNet("encoder", 3 + config_.nib_channels, 1, b, levels, config_.residual_blocks_unet,
                  config_.conv_blocks, enc);
  Rng dec(derive_seed({config_.seed, 2}));
  decoder_ = UNet("decoder", 1, 2, b, levels, config_.residual_blocks_unet, config_.conv_blocks, dec);
  Rng pred(derive_seed({config_.seed, 3}));
  content_ = UNet("predictor.content", 1, 1, b, levels, config_.residual_blocks_unet, config_.conv_blocks, pred);
  enhance_in_ = make_conv(2, b, 3, 1, kActGain, pred);
  for (int i = 0; i < config_.predictor_residual_enhance; ++i) enhance_res_.push_back(make_residual(b, pred));
  enhance_out_ = make_conv(b, 1, 3, 1, 0.1, pred);
  Rng guide(derive_seed({config_.seed, 4}));
  guidance_ = UNet("guidance", 1, 1, b, levels, config_.guidance_residual, config_.conv_blocks, guide);
}

Tensor ModelBundle::encode(const Tensor& augmented) const { return nn::sigmoid(encoder_(augmented)); }

Tensor ModelBundle::decode(const Tensor& halftone) const { return nn::sigmoid(decoder_(halftone)); }

PredictorTensors ModelBundle::predict(const Tensor& halftone) const {
  const Tensor logits = content_(halftone);
  const Tensor initial = nn::sigmoid(logits);
  Tensor h = act(enhance_in_(nn::concat_channels(halftone, initial)));
  for (const auto& r : enhance_res_) h = residual(r, h);
  const Tensor delta = enhance_out_(h);
  return {initial, nn::sigmoid(nn::add(logits, delta))};
}

Tensor ModelBundle::guide(const Tensor& halftone) const { return nn::sigmoid(guidance_(halftone)); }

std::vector<NamedTensor> ModelBundle::parameters(Component c) const {
  std::vector<NamedTensor> out;
  switch (c) {
    case Component::kEncoder:
      encoder_.collect(out);
      break;
    case Component::kDecoder:
      decoder_.collect(out);
      break;
    case Component::kPredictor:
      content_.collect(out);
      add_conv(out, "predictor.enhance.in", enhance_in_);
      for (std::size_t i = 0; i < enhance_res_.size(); ++i) {
        add_conv(out, "predictor.enhance.res" + std::to_string(i) + ".a", enhance_res_[i].first);
        add_conv(out, "predictor.enhance.res" + std::to_string(i) + ".b", enhance_res_[i].second);
      }
      add_conv(out, "predictor.enhance.out", enhance_out_);
      break;
    case Component::kGuidance:
      guidance_.collect(out);
      break;
  }
  return out;
}

std::vector<NamedTensor> ModelBundle::parameters() const {
  std::vector<NamedTensor> out;
  for (Component c : {Component::kEncoder, Component::kDecoder, Component::kPredictor, Component::kGuidance}) {
    auto part = parameters(c);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

ModelBundle ModelBundle::clone() const {
  ModelBundle copy(config_);
  auto dst = copy.parameters();
  auto src = parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto d = dst[i].tensor;
    std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), d.data().begin());
    d.set_requires_grad(src[i].tensor.requires_grad());
  }
  copy.perceptual = perceptual;
  return copy;
}

void ModelBundle::copy_component(Component c, const ModelBundle& other) {
  if (!(other.config_ == config_)) throw std::invalid_argument("copy_component: bundle configs differ");
  auto dst = parameters(c);
  auto src = other.parameters(c);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto d = dst[i].tensor;
    std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), d.data().begin());
  }
}

// ---- wrappers ------------------------------------------------------------------------

Tensor to_tensor(const std::vector<const Plane*>& planes) {
  if (planes.empty()) throw std::invalid_argument("to_tensor: no planes");
  const int h = planes[0]->height();
  const int w = planes[0]->width();
  std::vector<float> data;
  data.reserve(planes.size() * static_cast<std::size_t>(h) * w);
  for (const Plane* p : planes) {
    require_same_shape(*planes[0], *p, "to_tensor");
    for (double v : p->values()) data.push_back(static_cast<float>(v));
  }
  return Tensor::from({1, static_cast<int>(planes.size()), h, w}, std::move(data));
}

Plane plane_of(const Tensor& t, int n, int c) {
  const auto v = t.slice(n, c);
  return Plane(t.shape().h, t.shape().w, std::vector<double>(v.begin(), v.end()));
}

std::vector<Plane> nib_augment(const ColorImage& img, std::uint64_t seed, int nib_channels) {
  std::vector<Plane> out{img.r(), img.g(), img.b()};
  Rng rng(seed);
  for (int c = 0; c < nib_channels; ++c) {
    Plane noise(img.height(), img.width());
    for (double& v : noise.values()) v = rng.normal();
    out.push_back(std::move(noise));
  }
  return out;
}

Tensor augmented_batch(const std::vector<const ColorImage*>& images, const std::vector<std::uint64_t>& seeds,
                       int nib_channels) {
  if (images.empty() || images.size() != seeds.size()) throw std::invalid_argument("augmented_batch: one seed per image");
  const int h = images[0]->height();
  const int w = images[0]->width();
  const int c = 3 + nib_channels;
  std::vector<float> data;
  data.reserve(images.size() * static_cast<std::size_t>(c) * h * w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height() != h || images[i]->width() != w) throw DimensionError("augmented_batch: size mismatch");
    for (const auto& p : nib_augment(*images[i], seeds[i], nib_channels)) {
      for (double v : p.values()) data.push_back(static_cast<float>(v));
    }
  }
  return Tensor::from({static_cast<int>(images.size()), c, h, w}, std::move(data));
}

GrayImage encoder_forward(const ModelBundle& bundle, const std::vector<Plane>& augmented) {
  const auto& cfg = bundle.config();
  if (static_cast<int>(augmented.size()) != 3 + cfg.nib_channels) {
    throw DimensionError("encoder expects " + std::to_string(3 + cfg.nib_channels) + " planes");
  }
  require_divisible(augmented[0].height(), augmented[0].width(), cfg.downscales);
  std::vector<const Plane*> ptrs;
  for (const auto& p : augmented) ptrs.push_back(&p);
  nn::NoGradGuard guard;
  return GrayImage::clipped(plane_of(bundle.encode(to_tensor(ptrs))));
}

BinaryImage binary_gate(const GrayImage& pseudo) { return BinaryImage::from_plane(pseudo.plane()); }

ChromaImage decoder_forward(const ModelBundle& bundle, const BinaryImage& halftone) {
  return decoder_forward(bundle, halftone.to_plane(), false);
}

ChromaImage decoder_forward(const ModelBundle& bundle, const Plane& halftone, bool strict) {
  if (strict) require_binary(halftone);
  require_divisible(halftone.height(), halftone.width(), bundle.config().downscales);
  nn::NoGradGuard guard;
  const Tensor out = bundle.decode(to_tensor({&halftone}));
  return ChromaImage(plane_of(out, 0, 0), plane_of(out, 0, 1));
}

PredictorOutput predictor_forward(const ModelBundle& bundle, const BinaryImage& halftone) {
  return predictor_forward(bundle, halftone.to_plane(), false);
}

PredictorOutput predictor_forward(const ModelBundle& bundle, const Plane& halftone, bool strict) {
  if (strict) require_binary(halftone);
  require_divisible(halftone.height(), halftone.width(), bundle.config().downscales);
  nn::NoGradGuard guard;
  const auto out = bundle.predict(to_tensor({&halftone}));
  Plane initial = plane_of(out.initial);
  Plane refined = plane_of(out.refined);
  Plane residual(initial.height(), initial.width());
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] = refined[i] - initial[i];
  return {GrayImage(std::move(initial)), GrayImage(std::move(refined)), std::move(residual)};
}

GrayImage guidance_features(const ModelBundle& bundle, const Plane& halftone) {
  require_divisible(halftone.height(), halftone.width(), bundle.config().downscales);
  nn::NoGradGuard guard;
  return GrayImage::clipped(plane_of(bundle.guide(to_tensor({&halftone}))));
}

BinaryImage halftone_pipeline(const ModelBundle& bundle, const ColorImage& img, std::uint64_t seed) {
  return binary_gate(encoder_forward(bundle, nib_augment(img, seed, bundle.config().nib_channels)));
}

ColorImage restore_pipeline(const ModelBundle& bundle, const BinaryImage& halftone, bool neutral_chroma) {
  const auto luma = predictor_forward(bundle, halftone);
  const ChromaImage chroma = neutral_chroma ? ChromaImage::neutral(halftone.height(), halftone.width())
                                            : decoder_forward(bundle, halftone);
  return ycbcr_to_rgb(luma.refined, chroma);
}

// ---- persistence -------------------------------------------------------------------------

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  Archive a;
  a.kind = "model_bundle";
  a.version = kBundleVersion;
  a.meta["net_config"] = bundle.config().to_json();
  for (const auto& p : bundle.parameters()) {
    const auto& s = p.tensor.shape();
    a.tensors.push_back({p.name, {s.n, s.c, s.h, s.w}, copy_values(p.tensor)});
  }
  write_archive(path, a);
}

void assign_parameters(ModelBundle& bundle, const std::vector<ArchiveTensor>& tensors) {
  auto params = bundle.parameters();
  if (params.size() != tensors.size()) {
    throw std::invalid_argument("parameter count mismatch: archive has " + std::to_string(tensors.size()) +
                                ", config implies " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& s = params[i].tensor.shape();
    const auto& t = tensors[i];
    if (t.name != params[i].name || t.shape != std::vector<int>{s.n, s.c, s.h, s.w}) {
      throw std::invalid_argument("archive tensor " + t.name + " does not match parameter " + params[i].name + " " +
                                  s.str());
    }
    auto dst = params[i].tensor;
    std::copy(t.data.begin(), t.data.end(), dst.data().begin());
  }
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  if (a.kind != "model_bundle") throw std::invalid_argument(path.string() + " is not a model bundle");
  if (a.version != kBundleVersion) {
    throw std::invalid_argument("unsupported bundle version " + std::to_string(a.version));
  }
  ModelBundle bundle(NetConfig::from_json(a.meta.at("net_config")));
  assign_parameters(bundle, a.tensors);
  return bundle;
}

}  // namespace revhalf
