#include "spf/adaptation.hpp"

#include <algorithm>
#include <cmath>

#include "spf/error.hpp"

namespace spf {

namespace {
constexpr double kProbEpsilon = 1e-7;
}

std::string to_string(GrlSchedule schedule) {
  return schedule == GrlSchedule::kRamp ? "ramp" : "constant";
}

GrlSchedule parse_grl_schedule(const std::string& name) {
  if (name == "constant") return GrlSchedule::kConstant;
  if (name == "ramp") return GrlSchedule::kRamp;
  throw ConfigError("unknown GRL schedule '" + name + "' (expected constant or ramp)");
}

void GrlConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("GRL lambda must be a finite nonnegative number");
  }
  if (schedule == GrlSchedule::kRamp && ramp_steps < 1) {
    throw ConfigError("GRL ramp needs at least one step");
  }
}

double GrlConfig::lambda_at(long step) const {
  if (schedule == GrlSchedule::kConstant) return lambda;
  const double p = std::min(1.0, static_cast<double>(step) / ramp_steps);
  return lambda * (2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0);
}

Tensor grl_forward(const Tensor& x) { return x; }

Tensor grl_backward(const Tensor& grad, double lambda) {
  Tensor out = grad;
  for (double& g : out.values()) g = -lambda * g;
  return out;
}

Tensor grl_backward(const Tensor& grad, const GrlConfig& config) {
  return grl_backward(grad, config.lambda);
}

DomainClassifier::DomainClassifier(int feature_channels, int hidden)
    : feature_channels_(feature_channels),
      mlp_({feature_channels, hidden, 1}, nn::Activation::kSigmoid) {}

double DomainClassifier::forward(const Tensor& features, DomainTrace* trace) const {
  if (features.rank() != 3 || features.dim(0) != feature_channels_) {
    throw ShapeError("domain classifier expects " + std::to_string(feature_channels_) +
                     " feature channels, got " + shape_string(features.shape()));
  }
  const Tensor x = grl_forward(features);
  Tensor pooled({feature_channels_});
  for (int c = 0; c < feature_channels_; ++c) {
    double sum = 0.0;
    for (double v : x.channel(c)) sum += v;
    pooled[static_cast<std::size_t>(c)] = sum / static_cast<double>(x.channel(c).size());
  }
  DomainTrace local;
  DomainTrace& t = trace ? *trace : local;
  t.feature_shape = features.shape();
  const double prob = mlp_.forward(pooled, &t.mlp)[0];
  t.prob = prob;
  return prob;
}

Tensor DomainClassifier::backward(const DomainTrace& trace, double grad_prob, double lambda) {
  const Tensor g_pooled = mlp_.backward(trace.mlp, Tensor({1}, {grad_prob}));
  Tensor grad(trace.feature_shape);
  for (int c = 0; c < feature_channels_; ++c) {
    auto ch = grad.channel(c);
    const double share = g_pooled[static_cast<std::size_t>(c)] / static_cast<double>(ch.size());
    std::fill(ch.begin(), ch.end(), share);
  }
  return grl_backward(grad, lambda);
}

void DomainClassifier::init_xavier(std::mt19937_64& rng) { mlp_.init_xavier(rng); }

void DomainClassifier::collect(nn::ParameterList& out) { mlp_.collect("domain/mlp", out); }

double classify_domain(const Tensor& features, const DomainClassifier& classifier) {
  return classifier.forward(features, nullptr);
}

double domain_bce(double prob, DomainLabel label, double* grad) {
  const double p = std::clamp(prob, kProbEpsilon, 1.0 - kProbEpsilon);
  const bool painting = label == DomainLabel::kPainting;
  if (grad) *grad = painting ? -1.0 / p : 1.0 / (1.0 - p);
  return painting ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace spf
