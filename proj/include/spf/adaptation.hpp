#ifndef SPF_ADAPTATION_HPP_
#define SPF_ADAPTATION_HPP_

#include <string>

#include "spf/nn.hpp"
#include "spf/tensor.hpp"

namespace spf {

// Which corpus an image was drawn from; used as the pseudo-label of the
// domain classifier.
enum class DomainLabel { kNatural = 0, kPainting = 1 };

enum class GrlSchedule { kConstant, kRamp };

std::string to_string(GrlSchedule schedule);
GrlSchedule parse_grl_schedule(const std::string& name);

struct GrlConfig {
  double lambda = 1.0;
  GrlSchedule schedule = GrlSchedule::kConstant;
  // Length of the ramp 0 -> lambda for the ramp schedule.
  int ramp_steps = 1000;

  void validate() const;
  // Effective multiplier at an optimizer step. The ramp follows
  // lambda * (2 / (1 + exp(-10 p)) - 1) with p = step / ramp_steps.
  double lambda_at(long step) const;
};

// Identity.
Tensor grl_forward(const Tensor& x);
// Returns -lambda * grad.
Tensor grl_backward(const Tensor& grad, double lambda);
Tensor grl_backward(const Tensor& grad, const GrlConfig& config);

struct DomainTrace {
  Shape feature_shape;
  nn::LayerTrace mlp;
  double prob = 0.5;
};

/// Domain branch: GRL, global average pool, C-64-1 MLP, sigmoid. The output
/// is the probability that the features come from a painting.
class DomainClassifier {
 public:
  explicit DomainClassifier(int feature_channels, int hidden = 64);

  double forward(const Tensor& features, DomainTrace* trace) const;
  // Accumulates head gradients for dL/dprob and returns the gradient that
  // crosses the reversal layer, i.e. -lambda * dL/dfeatures.
  Tensor backward(const DomainTrace& trace, double grad_prob, double lambda);

  void init_xavier(std::mt19937_64& rng);
  void collect(nn::ParameterList& out);

  nn::Mlp& mlp() { return mlp_; }

 private:
  int feature_channels_;
  nn::Mlp mlp_;
};

double classify_domain(const Tensor& features, const DomainClassifier& classifier);

// Binary cross-entropy of a PAINTING probability against the pseudo-label.
// Writes dLoss/dprob when grad is non-null.
double domain_bce(double prob, DomainLabel label, double* grad = nullptr);

}  // namespace spf

#endif  // SPF_ADAPTATION_HPP_
