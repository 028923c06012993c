#include <cmath>

#include "spf/error.hpp"
#include "spf/training.hpp"

namespace spf {

Adam::Adam(nn::ParameterList params, const AdamOptions& options)
    : params_(std::move(params)), options_(options) {
  if (!(options.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros_like(p.param->value));
    v_.push_back(Tensor::zeros_like(p.param->value));
  }
}

void Adam::step() {
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double step_size = options_.learning_rate / correction1;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto value = params_[i].param->value.values();
    auto grad = params_[i].param->grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * grad[j];
      v[j] = b2 * v[j] + (1.0 - b2) * grad[j] * grad[j];
      value[j] -= step_size * m[j] / (std::sqrt(v[j] / correction2) + options_.epsilon);
    }
  }
}

}  // namespace spf
