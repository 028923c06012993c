#include "spf/backbone.hpp"

#include <cmath>

#include "spf/error.hpp"

namespace spf {

namespace {

struct SeparableBlock {
  int out_channels;
  int stride;
};

// MobileNet v1 body after the stem convolution.
constexpr SeparableBlock kFullBlocks[] = {
    {64, 1},  {128, 2}, {128, 1}, {256, 2}, {256, 1}, {512, 2}, {512, 1},
    {512, 1}, {512, 1}, {512, 1}, {512, 1}, {1024, 2}, {1024, 1},
};
constexpr int kFullStem = 32;

constexpr SeparableBlock kTinyBlocks[] = {{16, 2}, {32, 2}, {32, 1}};
constexpr int kTinyStem = 8;

}  // namespace

std::string to_string(BackboneVariant variant) {
  return variant == BackboneVariant::kFull ? "full" : "tiny";
}

BackboneVariant parse_backbone_variant(const std::string& name) {
  if (name == "full") return BackboneVariant::kFull;
  if (name == "tiny") return BackboneVariant::kTiny;
  throw ConfigError("unknown backbone variant '" + name + "' (expected full or tiny)");
}

void validate_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("image must have shape (3, H, W), got " + shape_string(image.shape()));
  }
  const int h = image.dim(1);
  const int w = image.dim(2);
  if (h < 32 || w < 32 || h % 32 != 0 || w % 32 != 0) {
    throw ShapeError("image extent " + std::to_string(h) + "x" + std::to_string(w) +
                     " must be at least 32 and divisible by 32");
  }
  for (double v : image.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw DataError("image values must be finite and within [0,1]");
    }
  }
}

Backbone::Backbone(const BackboneConfig& config) : variant_(config.variant) {
  const bool full = variant_ == BackboneVariant::kFull;
  norm_ = config.normalization.value_or(full ? ChannelNormalization::imagenet()
                                             : ChannelNormalization::identity());
  const int stem = full ? kFullStem : kTinyStem;
  layers_.add({.in_channels = 3, .out_channels = stem, .kernel = 3, .stride = 2, .padding = 1},
              nn::Activation::kRelu6);
  names_.push_back("stem");

  auto add_blocks = [&](std::span<const SeparableBlock> blocks) {
    int channels = stem;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      layers_.add({.in_channels = channels,
                   .out_channels = channels,
                   .kernel = 3,
                   .stride = b.stride,
                   .padding = 1,
                   .groups = channels},
                  nn::Activation::kRelu6);
      layers_.add({.in_channels = channels,
                   .out_channels = b.out_channels,
                   .kernel = 1,
                   .stride = 1,
                   .padding = 0},
                  nn::Activation::kRelu6);
      const std::string block = "block" + std::to_string(i + 1);
      names_.push_back(block + ".dw");
      names_.push_back(block + ".pw");
      channels = b.out_channels;
    }
  };
  if (full) {
    add_blocks(kFullBlocks);
  } else {
    add_blocks(kTinyBlocks);
  }
}

int Backbone::stride() const { return variant_ == BackboneVariant::kFull ? 32 : 8; }

int Backbone::channels() const { return variant_ == BackboneVariant::kFull ? 1024 : 32; }

void Backbone::check_input(const Tensor& image) const {
  validate_image(image);
  const int h = image.dim(1);
  const int w = image.dim(2);
  const int s = stride();
  if (h % s != 0 || w % s != 0) {
    throw ShapeError("image extent " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by the backbone stride " + std::to_string(s));
  }
  if (h / s < kMinFeatureExtent || w / s < kMinFeatureExtent) {
    throw ShapeError("image extent " + std::to_string(h) + "x" + std::to_string(w) +
                     " yields a " + std::to_string(h / s) + "x" + std::to_string(w / s) +
                     " feature map; the " + to_string(variant_) + " backbone needs at least " +
                     std::to_string(kMinFeatureExtent * s) + " pixels per side");
  }
}

Tensor Backbone::forward(const Tensor& image, BackboneTrace* trace) const {
  check_input(image);
  Tensor x = image;
  for (int c = 0; c < 3; ++c) {
    const double mean = norm_.mean[static_cast<std::size_t>(c)];
    const double inv_std = 1.0 / norm_.std[static_cast<std::size_t>(c)];
    for (double& v : x.channel(c)) v = (v - mean) * inv_std;
  }
  return layers_.forward(x, trace ? &trace->layers : nullptr);
}

Tensor Backbone::backward(const BackboneTrace& trace, const Tensor& grad_features) {
  Tensor grad = layers_.backward(trace.layers, grad_features);
  for (int c = 0; c < 3; ++c) {
    const double inv_std = 1.0 / norm_.std[static_cast<std::size_t>(c)];
    for (double& v : grad.channel(c)) v *= inv_std;
  }
  return grad;
}

void Backbone::init_xavier(std::mt19937_64& rng) { layers_.init_xavier(rng); }

void Backbone::collect(nn::ParameterList& out) { layers_.collect("backbone/", names_, out); }

Tensor extract_features(const Tensor& image, const Backbone& backbone) {
  return backbone.forward(image);
}

}  // namespace spf
