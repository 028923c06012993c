#include "spf/model.hpp"

#include "spf/error.hpp"

namespace spf {

Scanpath ModelOutput::scanpath() const {
  Scanpath out;
  for (int k = 0; k < kNumCandidates; ++k) {
    if (selection.mask[static_cast<std::size_t>(k)]) out.push_back(coords[static_cast<std::size_t>(k)]);
  }
  return out;
}

Tensor weight_candidates(const Tensor& candidates, std::span<const double, kNumCandidates> v) {
  Tensor weighted = candidates;
  for (int k = 0; k < kNumCandidates; ++k) {
    for (double& x : weighted.channel(k)) x *= v[static_cast<std::size_t>(k)];
  }
  return weighted;
}

ScanpathModel::ScanpathModel(const ModelConfig& config)
    : config_(config),
      backbone_(config.backbone),
      merge_(backbone_.channels(), kNumPriors),
      domain_(backbone_.channels()) {
  if (!(config.beta > 0.0)) throw ConfigError("soft-argmax beta must be positive");
}

void ScanpathModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  backbone_.init_xavier(rng);
  priors_.init_grid();
  merge_.init_xavier(rng);
  selector_.init_xavier(rng);
  domain_.init_xavier(rng);
}

ModelOutput ScanpathModel::forward(const Tensor& image, ForwardTrace* trace) const {
  ModelOutput out;
  out.features = backbone_.forward(image, trace ? &trace->backbone : nullptr);
  Tensor priors = priors_.render(out.features.dim(1), out.features.dim(2));
  Tensor candidates = merge_.forward(out.features, priors, trace ? &trace->merge : nullptr);
  out.selection = selector_.forward(candidates, trace ? &trace->selector : nullptr);

  const Tensor weighted = weight_candidates(candidates, out.selection.v);
  const int h = weighted.dim(1);
  const int w = weighted.dim(2);
  for (int k = 0; k < kNumCandidates; ++k) {
    out.coords[static_cast<std::size_t>(k)] = soft_argmax(weighted.channel(k), h, w, config_.beta);
  }
  if (trace) {
    trace->priors = std::move(priors);
    trace->candidates = std::move(candidates);
  }
  return out;
}

Tensor ScanpathModel::backward(const ForwardTrace& trace, const ModelOutput& output,
                               const OutputGrad& grad) {
  const Tensor& d = trace.candidates;
  const Tensor weighted = weight_candidates(d, output.selection.v);
  const int h = d.dim(1);
  const int w = d.dim(2);

  Tensor grad_d = Tensor::zeros_like(d);
  std::array<double, kNumCandidates> grad_v = grad.v;
  std::vector<double> grad_weighted(static_cast<std::size_t>(h) * w);
  for (int k = 0; k < kNumCandidates; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    std::fill(grad_weighted.begin(), grad_weighted.end(), 0.0);
    soft_argmax_backward(weighted.channel(k), h, w, config_.beta, grad.coords[ks], grad_weighted);
    const auto dk = d.channel(k);
    auto gk = grad_d.channel(k);
    double dv = 0.0;
    for (std::size_t i = 0; i < gk.size(); ++i) {
      gk[i] = output.selection.v[ks] * grad_weighted[i];
      dv += dk[i] * grad_weighted[i];
    }
    grad_v[ks] += dv;
  }
  grad_d += selector_.backward(trace.selector, grad_v, d.shape());

  auto [grad_features, grad_priors] = merge_.backward(trace.merge, grad_d);
  priors_.backward(trace.priors, grad_priors);
  if (!grad.features.empty()) grad_features += grad.features;
  return backbone_.backward(trace.backbone, grad_features);
}

Scanpath ScanpathModel::predict(const Tensor& image) const { return forward(image).scanpath(); }

nn::ParameterList ScanpathModel::parameters() {
  nn::ParameterList out;
  backbone_.collect(out);
  priors_.collect(out);
  merge_.collect(out);
  selector_.collect(out);
  domain_.collect(out);
  return out;
}

void ScanpathModel::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

Scanpath predict_scanpath(const Tensor& image, const ScanpathModel& model) {
  return model.predict(image);
}

}  // namespace spf
