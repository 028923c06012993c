#ifndef SPF_MODEL_HPP_
#define SPF_MODEL_HPP_

#include <array>
#include <cstdint>

#include "spf/adaptation.hpp"
#include "spf/backbone.hpp"
#include "spf/decoder.hpp"
#include "spf/priors.hpp"

namespace spf {

struct ModelConfig {
  BackboneConfig backbone;
  double beta = kDefaultBeta;
};

// Intermediate values kept by a training forward pass.
struct ForwardTrace {
  BackboneTrace backbone;
  Tensor priors;
  nn::LayerTrace merge;
  Tensor candidates;
  SelectorTrace selector;
};

struct ModelOutput {
  Tensor features;  // backbone output, also consumed by the domain branch
  SelectionResult selection;
  std::array<Point, kNumCandidates> coords{};

  // Coordinates of the selected channels in ascending channel order.
  Scanpath scanpath() const;
};

// Loss gradients w.r.t. the model outputs.
struct OutputGrad {
  std::array<double, kNumCandidates> v{};
  std::array<Point, kNumCandidates> coords{};
  // Extra gradient on the backbone features (the domain branch); may be empty.
  Tensor features;
};

/**
 * Backbone -> priors -> merge -> channel selection -> per-channel
 * soft-argmax, plus the domain classifier branch on the backbone output.
 *
 * forward() never mutates parameters and may run concurrently; backward()
 * accumulates into the parameter gradients and needs exclusive access.
 */
class ScanpathModel {
 public:
  explicit ScanpathModel(const ModelConfig& config = {});

  const ModelConfig& config() const { return config_; }
  double beta() const { return config_.beta; }

  // Xavier-uniform weights, zero biases, grid-initialized priors.
  void initialize(std::uint64_t seed);

  ModelOutput forward(const Tensor& image, ForwardTrace* trace = nullptr) const;
  // Returns the gradient w.r.t. the input image.
  Tensor backward(const ForwardTrace& trace, const ModelOutput& output, const OutputGrad& grad);

  Scanpath predict(const Tensor& image) const;

  // Every learnable parameter, named "<namespace>/<layer>.<field>".
  nn::ParameterList parameters();
  void zero_grad();

  Backbone& backbone() { return backbone_; }
  const Backbone& backbone() const { return backbone_; }
  PriorBank& priors() { return priors_; }
  const PriorBank& priors() const { return priors_; }
  MergeNetwork& merge() { return merge_; }
  const MergeNetwork& merge() const { return merge_; }
  ChannelSelector& selector() { return selector_; }
  const ChannelSelector& selector() const { return selector_; }
  DomainClassifier& domain() { return domain_; }
  const DomainClassifier& domain() const { return domain_; }

 private:
  ModelConfig config_;
  Backbone backbone_;
  PriorBank priors_;
  MergeNetwork merge_;
  ChannelSelector selector_;
  DomainClassifier domain_;
};

Scanpath predict_scanpath(const Tensor& image, const ScanpathModel& model);

// v[k] * d[k] for every candidate channel.
Tensor weight_candidates(const Tensor& candidates, std::span<const double, kNumCandidates> v);

}  // namespace spf

#endif  // SPF_MODEL_HPP_
