#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "revhalf/image.hpp"

namespace revhalf {

/// Fixed feature extractor used by the perceptual loss terms. Evaluated in
/// double precision with an explicit vector-Jacobian product, so it is never
/// part of the trainable graph.
class PerceptualExtractor {
 public:
  enum class Kind { kConv, kRelu, kMaxPool };

  struct Layer {
    Kind kind = Kind::kRelu;
    int cin = 0;
    int cout = 0;
    int k = 0;
    std::vector<double> weight;  // [cout][cin][k][k]
    std::vector<double> bias;
  };

  PerceptualExtractor(std::vector<Layer> layers, std::vector<double> mean, std::vector<double> stddev);

  /// Small random conv stack (3 -> 8 -> pool -> 16), fixed by `seed`.
  static PerceptualExtractor random_fallback(std::uint64_t seed = 19);

  /// VGG-19 truncated after relu4_4. Expects an archive with tensors named
  /// conv{b}_{i}.weight [cout,cin,3,3] and conv{b}_{i}.bias [cout].
  static PerceptualExtractor load_vgg19(const std::filesystem::path& path);

  /// Input: 3 planes (RGB in [0,1]). Output: feature planes.
  std::vector<Plane> forward(const std::vector<Plane>& rgb) const;

  /// Gradient with respect to the input given the gradient at the output.
  std::vector<Plane> vjp(const std::vector<Plane>& rgb, const std::vector<Plane>& grad_out) const;

  const std::vector<Layer>& layers() const { return layers_; }

 private:
  std::vector<Layer> layers_;
  std::vector<double> mean_;
  std::vector<double> stddev_;
};

}  // namespace revhalf
