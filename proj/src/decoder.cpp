#include "spf/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spf/error.hpp"

namespace spf {

void validate_scanpath(const Scanpath& scanpath) {
  if (scanpath.empty()) throw DataError("scanpath is empty");
  for (const auto& p : scanpath) {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
      throw DataError("scanpath point outside the unit square");
    }
  }
}

// ---------------------------------------------------------------- merge

MergeNetwork::MergeNetwork(int feature_channels, int prior_channels)
    : feature_channels_(feature_channels), prior_channels_(prior_channels) {
  int in = feature_channels + prior_channels;
  for (int out : kMergeSchedule) {
    layers_.add({.in_channels = in, .out_channels = out, .kernel = 3, .stride = 1, .padding = 1},
                nn::Activation::kRelu);
    in = out;
  }
}

Tensor MergeNetwork::forward(const Tensor& features, const Tensor& priors,
                             nn::LayerTrace* trace) const {
  if (features.rank() != 3 || priors.rank() != 3 || features.dim(1) != priors.dim(1) ||
      features.dim(2) != priors.dim(2)) {
    throw ShapeError("feature volume " + shape_string(features.shape()) +
                     " and prior maps " + shape_string(priors.shape()) +
                     " differ in spatial extent");
  }
  if (features.dim(0) != feature_channels_ || priors.dim(0) != prior_channels_) {
    throw ShapeError("merge network expects " + std::to_string(feature_channels_) + "+" +
                     std::to_string(prior_channels_) + " channels");
  }
  return layers_.forward(concat_channels(features, priors), trace);
}

std::pair<Tensor, Tensor> MergeNetwork::backward(const nn::LayerTrace& trace,
                                                 const Tensor& grad_out) {
  const Tensor grad_in = layers_.backward(trace, grad_out);
  const int h = grad_in.dim(1);
  const int w = grad_in.dim(2);
  Tensor grad_features({feature_channels_, h, w});
  Tensor grad_priors({prior_channels_, h, w});
  auto src = grad_in.values();
  std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(grad_features.numel()),
            grad_features.values().begin());
  std::copy(src.begin() + static_cast<std::ptrdiff_t>(grad_features.numel()), src.end(),
            grad_priors.values().begin());
  return {std::move(grad_features), std::move(grad_priors)};
}

void MergeNetwork::init_xavier(std::mt19937_64& rng) { layers_.init_xavier(rng); }

void MergeNetwork::collect(nn::ParameterList& out) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < layers_.size(); ++i) names.push_back("conv" + std::to_string(i));
  layers_.collect("merge/", names, out);
}

Tensor merge(const Tensor& features, const Tensor& priors, const MergeNetwork& network) {
  return network.forward(features, priors, nullptr);
}

// ---------------------------------------------------------------- selection

int SelectionResult::count() const {
  int n = 0;
  for (int m : mask) n += m;
  return n;
}

std::array<int, kNumCandidates> binarize_selection(std::span<const double, kNumCandidates> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  // Rounding can push the mean outside the observed range.
  const double mean = std::clamp(sum / kNumCandidates, *lo, *hi);
  std::array<int, kNumCandidates> mask{};
  bool any = false;
  for (int k = 0; k < kNumCandidates; ++k) {
    mask[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)] > mean ? 1 : 0;
    any = any || mask[static_cast<std::size_t>(k)];
  }
  if (!any) {
    const auto best = std::max_element(v.begin(), v.end());
    mask[static_cast<std::size_t>(best - v.begin())] = 1;
  }
  return mask;
}

ChannelSelector::ChannelSelector()
    : max_branch_({kNumCandidates, 40, 40, kNumCandidates}, nn::Activation::kNone),
      avg_branch_({kNumCandidates, 40, 40, kNumCandidates}, nn::Activation::kNone),
      head_({2 * kNumCandidates, 40, 40, kNumCandidates}, nn::Activation::kSigmoid) {}

SelectionResult ChannelSelector::forward(const Tensor& candidates, SelectorTrace* trace) const {
  if (candidates.rank() != 3 || candidates.dim(0) != kNumCandidates) {
    throw ShapeError("channel selection expects (20, H, W), got " +
                     shape_string(candidates.shape()));
  }
  if (!candidates.all_finite()) throw NumericError("non-finite candidate maps");

  Tensor max_pool({kNumCandidates});
  Tensor avg_pool({kNumCandidates});
  std::array<std::size_t, kNumCandidates> argmax{};
  for (int k = 0; k < kNumCandidates; ++k) {
    const auto ch = candidates.channel(k);
    const auto it = std::max_element(ch.begin(), ch.end());
    argmax[static_cast<std::size_t>(k)] = static_cast<std::size_t>(it - ch.begin());
    max_pool[static_cast<std::size_t>(k)] = *it;
    double sum = 0.0;
    for (double x : ch) sum += x;
    avg_pool[static_cast<std::size_t>(k)] = sum / static_cast<double>(ch.size());
  }

  SelectorTrace local;
  SelectorTrace& t = trace ? *trace : local;
  const Tensor a = max_branch_.forward(max_pool, &t.max_branch);
  const Tensor b = avg_branch_.forward(avg_pool, &t.avg_branch);
  Tensor joined({2 * kNumCandidates});
  std::copy(a.values().begin(), a.values().end(), joined.values().begin());
  std::copy(b.values().begin(), b.values().end(), joined.values().begin() + kNumCandidates);
  const Tensor v = head_.forward(joined, &t.head);
  if (!v.all_finite()) throw NumericError("non-finite selection probabilities");

  t.max_pool = std::move(max_pool);
  t.avg_pool = std::move(avg_pool);
  t.argmax = argmax;

  SelectionResult result;
  std::copy(v.values().begin(), v.values().end(), result.v.begin());
  result.mask = binarize_selection(result.v);
  return result;
}

Tensor ChannelSelector::backward(const SelectorTrace& trace,
                                 std::span<const double, kNumCandidates> grad_v,
                                 const Shape& candidate_shape) {
  Tensor gv({kNumCandidates});
  std::copy(grad_v.begin(), grad_v.end(), gv.values().begin());
  const Tensor g_joined = head_.backward(trace.head, gv);
  Tensor ga({kNumCandidates});
  Tensor gb({kNumCandidates});
  std::copy(g_joined.values().begin(), g_joined.values().begin() + kNumCandidates,
            ga.values().begin());
  std::copy(g_joined.values().begin() + kNumCandidates, g_joined.values().end(),
            gb.values().begin());
  const Tensor g_max = max_branch_.backward(trace.max_branch, ga);
  const Tensor g_avg = avg_branch_.backward(trace.avg_branch, gb);

  Tensor grad(candidate_shape);
  for (int k = 0; k < kNumCandidates; ++k) {
    auto ch = grad.channel(k);
    const double avg_share = g_avg[static_cast<std::size_t>(k)] / static_cast<double>(ch.size());
    for (double& x : ch) x = avg_share;
    ch[trace.argmax[static_cast<std::size_t>(k)]] += g_max[static_cast<std::size_t>(k)];
  }
  return grad;
}

void ChannelSelector::init_xavier(std::mt19937_64& rng) {
  max_branch_.init_xavier(rng);
  avg_branch_.init_xavier(rng);
  head_.init_xavier(rng);
}

void ChannelSelector::collect(nn::ParameterList& out) {
  max_branch_.collect("select/max_mlp", out);
  avg_branch_.collect("select/avg_mlp", out);
  head_.collect("select/head_mlp", out);
}

SelectionResult select_channels(const Tensor& candidates, const ChannelSelector& selector) {
  return selector.forward(candidates, nullptr);
}

// ---------------------------------------------------------------- soft-argmax

namespace {

double grid_coordinate(int index, int extent) {
  return extent > 1 ? static_cast<double>(index) / (extent - 1) : 0.5;
}

// Writes softmax(beta * map) into probs.
void softmax(std::span<const double> map, double beta, std::vector<double>& probs) {
  probs.resize(map.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (double m : map) peak = std::max(peak, beta * m);
  double total = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    probs[i] = std::exp(beta * map[i] - peak);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
}

}  // namespace

Point soft_argmax(std::span<const double> map, int height, int width, double beta) {
  if (map.size() != static_cast<std::size_t>(height) * width || map.empty()) {
    throw ShapeError("soft-argmax map size does not match its extent");
  }
  if (!(beta > 0.0)) throw DomainError("soft-argmax beta must be positive");
  std::vector<double> probs;
  softmax(map, beta, probs);
  Point out;
  for (int i = 0; i < height; ++i) {
    const double y = grid_coordinate(i, height);
    for (int j = 0; j < width; ++j) {
      const double p = probs[static_cast<std::size_t>(i) * width + j];
      out.x += p * grid_coordinate(j, width);
      out.y += p * y;
    }
  }
  return out;
}

Point soft_argmax(const Tensor& map, double beta) {
  if (map.rank() != 2) throw ShapeError("soft-argmax expects a rank-2 map");
  return soft_argmax(map.values(), map.dim(0), map.dim(1), beta);
}

void soft_argmax_backward(std::span<const double> map, int height, int width, double beta,
                          Point grad, std::span<double> grad_map) {
  std::vector<double> probs;
  softmax(map, beta, probs);
  Point mean;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double p = probs[static_cast<std::size_t>(i) * width + j];
      mean.x += p * grid_coordinate(j, width);
      mean.y += p * grid_coordinate(i, height);
    }
  }
  for (int i = 0; i < height; ++i) {
    const double y = grid_coordinate(i, height);
    for (int j = 0; j < width; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * width + j;
      const double x = grid_coordinate(j, width);
      grad_map[idx] += beta * probs[idx] * (grad.x * (x - mean.x) + grad.y * (y - mean.y));
    }
  }
}

}  // namespace spf
