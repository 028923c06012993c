#ifndef SPF_BACKBONE_HPP_
#define SPF_BACKBONE_HPP_

#include <array>
#include <optional>
#include <random>
#include <string>

#include "spf/nn.hpp"
#include "spf/tensor.hpp"

namespace spf {

enum class BackboneVariant { kFull, kTiny };

std::string to_string(BackboneVariant variant);
// Throws ConfigError for names other than "full" and "tiny".
BackboneVariant parse_backbone_variant(const std::string& name);

// Per-channel standardization applied to [0,1] RGB input.
struct ChannelNormalization {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  static ChannelNormalization identity() { return {}; }
  // Statistics the published MobileNet weights were trained with.
  static ChannelNormalization imagenet() {
    return {{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
  }
  bool operator==(const ChannelNormalization&) const = default;
};

struct BackboneConfig {
  BackboneVariant variant = BackboneVariant::kTiny;
  // Unset: ImageNet statistics for "full", identity for "tiny".
  std::optional<ChannelNormalization> normalization;
};

// Smallest feature map the decoder accepts, per side.
inline constexpr int kMinFeatureExtent = 4;

// Checks the image tensor invariants: (3, H, W), H and W >= 32 and divisible
// by 32, finite values in [0,1].
void validate_image(const Tensor& image);

struct BackboneTrace {
  nn::LayerTrace layers;
};

/**
 * Depthwise-separable feature extractor.
 *
 * "full" is MobileNet v1 (stride 32, 1024 channels) with batch norm folded
 * into the convolution biases; "tiny" is a three-block network with stride 8
 * and 32 channels used for tests and desk-scale experiments. Every
 * convolution is followed by ReLU6.
 */
class Backbone {
 public:
  explicit Backbone(const BackboneConfig& config = {});

  BackboneVariant variant() const { return variant_; }
  int stride() const;
  int channels() const;
  const ChannelNormalization& normalization() const { return norm_; }

  // Throws ShapeError when the image does not divide into a feature map of
  // at least kMinFeatureExtent per side.
  void check_input(const Tensor& image) const;

  Tensor forward(const Tensor& image, BackboneTrace* trace = nullptr) const;
  // Accumulates parameter gradients; returns the gradient w.r.t. the raw image.
  Tensor backward(const BackboneTrace& trace, const Tensor& grad_features);

  void init_xavier(std::mt19937_64& rng);
  void collect(nn::ParameterList& out);

 private:
  BackboneVariant variant_;
  ChannelNormalization norm_;
  nn::ConvStack layers_;
  std::vector<std::string> names_;
};

Tensor extract_features(const Tensor& image, const Backbone& backbone);

}  // namespace spf

#endif  // SPF_BACKBONE_HPP_
