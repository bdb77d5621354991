#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "revhalf/archive.hpp"
#include "revhalf/image.hpp"
#include "revhalf/perceptual.hpp"
#include "revhalf/random.hpp"
#include "revhalf/tensor.hpp"

namespace revhalf {

struct NetConfig {
  int base_channels = 16;
  int downscales = 3;
  int upscales = 3;
  int residual_blocks_unet = 4;
  int conv_blocks = 2;
  int predictor_residual_enhance = 8;
  int guidance_residual = 4;
  int nib_channels = 1;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
  nlohmann::json to_json() const;
  static NetConfig from_json(const nlohmann::json& j);
  bool operator==(const NetConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  nn::Tensor tensor;
};

struct Conv {
  nn::Tensor weight;
  nn::Tensor bias;
  int stride = 1;

  nn::Tensor operator()(const nn::Tensor& x) const { return nn::conv2d(x, weight, bias, stride); }
};

inline constexpr float kLeakySlope = 0.2f;

/// U-shaped net: head conv, `levels` stride-2 downscales with channel
/// doubling, residual blocks at the bottom, `levels` bilinear upscales with
/// additive skips, `conv_blocks` full-resolution convs and an output conv.
/// Returns logits; callers apply the squashing activation.
class UNet {
 public:
  UNet() = default;
  UNet(const std::string& prefix, int in_channels, int out_channels, int base, int levels, int residual_blocks,
       int conv_blocks, Rng& rng);

  nn::Tensor operator()(const nn::Tensor& x) const;
  void collect(std::vector<NamedTensor>& out) const;
  int in_channels() const { return in_channels_; }

 private:
  int in_channels_ = 0;
  std::string prefix_;
  Conv head_;
  std::vector<Conv> down_;
  std::vector<std::pair<Conv, Conv>> res_;
  std::vector<Conv> up_;
  std::vector<Conv> blocks_;
  Conv out_;
};

enum class Component { kEncoder, kDecoder, kPredictor, kGuidance };

const char* component_name(Component c);

/// Predictor outputs for a batch: the content-aggregation estimate and the
/// detail-enhanced one. The enhancement acts on logits, so
/// refined = sigmoid(logit(initial) + delta) and residual = refined - initial.
struct PredictorTensors {
  nn::Tensor initial;
  nn::Tensor refined;
};

class ModelBundle {
 public:
  explicit ModelBundle(const NetConfig& config);
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;
  ModelBundle(ModelBundle&&) = default;
  ModelBundle& operator=(ModelBundle&&) = default;

  const NetConfig& config() const { return config_; }

  /// Batch forward passes on NCHW tensors.
  nn::Tensor encode(const nn::Tensor& augmented) const;
  nn::Tensor decode(const nn::Tensor& halftone) const;
  PredictorTensors predict(const nn::Tensor& halftone) const;
  nn::Tensor guide(const nn::Tensor& halftone) const;

  std::vector<NamedTensor> parameters(Component c) const;
  std::vector<NamedTensor> parameters() const;

  /// The final conv of the enhancement branch; zeroing it makes refined == initial.
  const Conv& enhancement_output() const { return enhance_out_; }

  /// Deep copy; parameters do not share storage with this bundle.
  ModelBundle clone() const;

  /// Copies values of all parameters of `c` from `other`.
  void copy_component(Component c, const ModelBundle& other);

  /// Optional fixed perceptual extractor; null when unavailable.
  std::shared_ptr<const PerceptualExtractor> perceptual;

 private:
  NetConfig config_;
  UNet encoder_;
  UNet decoder_;
  UNet content_;
  Conv enhance_in_;
  std::vector<std::pair<Conv, Conv>> enhance_res_;
  Conv enhance_out_;
  UNet guidance_;
};

// ---- image-level wrappers ---------------------------------------------------

nn::Tensor to_tensor(const std::vector<const Plane*>& planes);
Plane plane_of(const nn::Tensor& t, int n = 0, int c = 0);

/// Input planes followed by `nib_channels` planes of i.i.d. standard normal noise.
std::vector<Plane> nib_augment(const ColorImage& img, std::uint64_t seed, int nib_channels = 1);

/// Batch of augmented inputs; sample i uses noise seed `seeds[i]`.
nn::Tensor augmented_batch(const std::vector<const ColorImage*>& images, const std::vector<std::uint64_t>& seeds,
                           int nib_channels);

/// Pseudo halftone. Throws DimensionError unless the plane count matches the
/// encoder input and the size is divisible by 2^downscales.
GrayImage encoder_forward(const ModelBundle& bundle, const std::vector<Plane>& augmented);

/// Hard threshold, ties to 1.
BinaryImage binary_gate(const GrayImage& pseudo);

ChromaImage decoder_forward(const ModelBundle& bundle, const BinaryImage& halftone);
/// With `strict`, throws RangeError unless every value is exactly 0 or 1.
ChromaImage decoder_forward(const ModelBundle& bundle, const Plane& halftone, bool strict);

struct PredictorOutput {
  GrayImage initial;
  GrayImage refined;
  Plane residual;
};

PredictorOutput predictor_forward(const ModelBundle& bundle, const BinaryImage& halftone);
PredictorOutput predictor_forward(const ModelBundle& bundle, const Plane& halftone, bool strict);

GrayImage guidance_features(const ModelBundle& bundle, const Plane& halftone);

BinaryImage halftone_pipeline(const ModelBundle& bundle, const ColorImage& img, std::uint64_t seed);

/// With `neutral_chroma`, the decoder output is replaced by 0.5.
ColorImage restore_pipeline(const ModelBundle& bundle, const BinaryImage& halftone, bool neutral_chroma = false);

// ---- persistence --------------------------------------------------------------

inline constexpr int kBundleVersion = 1;

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);

/// Throws std::invalid_argument when the stored shapes do not match the stored config.
ModelBundle load_bundle(const std::filesystem::path& path);

/// Parameter values in `bundle` replaced from archive tensors by name.
void assign_parameters(ModelBundle& bundle, const std::vector<ArchiveTensor>& tensors);

}  // namespace revhalf
