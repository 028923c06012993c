#ifndef SPF_DECODER_HPP_
#define SPF_DECODER_HPP_

#include <array>
#include <span>
#include <utility>

#include "spf/nn.hpp"
#include "spf/scanpath.hpp"
#include "spf/tensor.hpp"

namespace spf {

// Candidate fixation channels produced by the merge network.
inline constexpr int kNumCandidates = 20;
inline constexpr double kDefaultBeta = 10.0;

// Output channel widths of the eight 3x3 merge convolutions.
inline constexpr std::array<int, 8> kMergeSchedule = {256, 192, 128, 96, 64, 48, 32,
                                                      kNumCandidates};

/// Fuses backbone features with the rendered priors into 20 candidate maps.
class MergeNetwork {
 public:
  MergeNetwork(int feature_channels, int prior_channels);

  int feature_channels() const { return feature_channels_; }

  // Throws ShapeError when the spatial extents of the two inputs differ.
  Tensor forward(const Tensor& features, const Tensor& priors, nn::LayerTrace* trace) const;
  // Returns (grad features, grad priors).
  std::pair<Tensor, Tensor> backward(const nn::LayerTrace& trace, const Tensor& grad_out);

  void init_xavier(std::mt19937_64& rng);
  void collect(nn::ParameterList& out);

  nn::ConvStack& layers() { return layers_; }

 private:
  int feature_channels_;
  int prior_channels_;
  nn::ConvStack layers_;
};

Tensor merge(const Tensor& features, const Tensor& priors, const MergeNetwork& network);

struct SelectionResult {
  std::array<double, kNumCandidates> v{};    // activation probabilities
  std::array<int, kNumCandidates> mask{};    // binarized selection, 0 or 1
  int count() const;
};

// mask[k] = v[k] > mean(v). When no entry exceeds the mean, the argmax of v
// (lowest index on ties) is kept alone.
std::array<int, kNumCandidates> binarize_selection(std::span<const double, kNumCandidates> v);

struct SelectorTrace {
  Tensor max_pool;
  Tensor avg_pool;
  std::array<std::size_t, kNumCandidates> argmax{};
  nn::LayerTrace max_branch;
  nn::LayerTrace avg_branch;
  nn::LayerTrace head;
};

/// Channel-selection network: global max and average pooling feed two
/// 20-40-40-20 MLPs whose concatenation feeds a 40-40-40-20 sigmoid MLP.
class ChannelSelector {
 public:
  ChannelSelector();

  SelectionResult forward(const Tensor& candidates, SelectorTrace* trace) const;
  // Gradient flows through v only; the mask is not differentiated.
  Tensor backward(const SelectorTrace& trace, std::span<const double, kNumCandidates> grad_v,
                  const Shape& candidate_shape);

  void init_xavier(std::mt19937_64& rng);
  void collect(nn::ParameterList& out);

  nn::Mlp& max_branch() { return max_branch_; }
  nn::Mlp& avg_branch() { return avg_branch_; }
  nn::Mlp& head() { return head_; }
  const nn::Mlp& max_branch() const { return max_branch_; }
  const nn::Mlp& avg_branch() const { return avg_branch_; }
  const nn::Mlp& head() const { return head_; }

 private:
  nn::Mlp max_branch_;
  nn::Mlp avg_branch_;
  nn::Mlp head_;
};

SelectionResult select_channels(const Tensor& candidates, const ChannelSelector& selector);

// Softmax-weighted expected position of a (height x width) map, with pixel
// (i, j) at (j/(W-1), i/(H-1)).
Point soft_argmax(std::span<const double> map, int height, int width, double beta);
Point soft_argmax(const Tensor& map, double beta);

// Accumulates d(grad . soft_argmax(map)) / d(map) into grad_map.
void soft_argmax_backward(std::span<const double> map, int height, int width, double beta,
                          Point grad, std::span<double> grad_map);

}  // namespace spf

#endif  // SPF_DECODER_HPP_
