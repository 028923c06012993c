#ifndef SPF_NN_HPP_
#define SPF_NN_HPP_

#include <random>
#include <string>
#include <vector>

#include "spf/tensor.hpp"

namespace spf::nn {

// Learnable array with its accumulated gradient.
struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(Shape shape) : value(shape), grad(shape) {}
  void zero_grad() { grad.fill(0.0); }
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};
using ParameterList = std::vector<NamedParameter>;

void xavier_uniform(Tensor& weight, int fan_in, int fan_out, std::mt19937_64& rng,
                    double gain = 1.0);

enum class Activation { kNone, kRelu, kRelu6, kSigmoid };

// Xavier gain for a layer followed by act: sqrt(2) for rectifiers, 1 otherwise.
double xavier_gain(Activation act);

void activate(Tensor& x, Activation act);
// Multiplies grad in place by the activation derivative, expressed through
// the activation's output.
void activation_backward(const Tensor& output, Tensor& grad, Activation act);

/// 2-D convolution over a single (C, H, W) sample, grouped, zero padded.
class Conv2d {
 public:
  struct Options {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    int groups = 1;
  };

  explicit Conv2d(const Options& options);

  const Options& options() const { return options_; }
  int output_extent(int input_extent) const;

  Tensor forward(const Tensor& x) const;
  // Accumulates weight/bias gradients and returns the input gradient.
  Tensor backward(const Tensor& x, const Tensor& grad_out);

  void init_xavier(std::mt19937_64& rng, double gain = 1.0);
  void collect(const std::string& prefix, ParameterList& out);

  Parameter weight;  // (out, in / groups, k, k)
  Parameter bias;    // (out)

 private:
  void check_input(const Tensor& x) const;
  Options options_;
};

/// Fully connected layer on rank-1 tensors.
class Linear {
 public:
  Linear(int in_features, int out_features);

  int in_features() const { return weight.value.dim(1); }
  int out_features() const { return weight.value.dim(0); }

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& grad_out);

  void init_xavier(std::mt19937_64& rng, double gain = 1.0);
  void collect(const std::string& prefix, ParameterList& out);

  Parameter weight;  // (out, in)
  Parameter bias;    // (out)
};

// Post-activation outputs of every layer; activations[0] is the input.
struct LayerTrace {
  std::vector<Tensor> activations;
};

/// Chain of convolutions, each followed by its activation.
class ConvStack {
 public:
  ConvStack() = default;
  void add(const Conv2d::Options& options, Activation act);

  std::size_t size() const { return layers_.size(); }
  Conv2d& layer(std::size_t i) { return layers_[i]; }
  const Conv2d& layer(std::size_t i) const { return layers_[i]; }

  Tensor forward(const Tensor& x, LayerTrace* trace) const;
  Tensor backward(const LayerTrace& trace, Tensor grad_out);

  void init_xavier(std::mt19937_64& rng);
  void collect(const std::string& prefix, const std::vector<std::string>& names,
               ParameterList& out);

 private:
  std::vector<Conv2d> layers_;
  std::vector<Activation> acts_;
};

/// Multi-layer perceptron: ReLU between layers, configurable output activation.
class Mlp {
 public:
  Mlp(const std::vector<int>& widths, Activation output_act);

  Tensor forward(const Tensor& x, LayerTrace* trace) const;
  Tensor backward(const LayerTrace& trace, Tensor grad_out);

  std::size_t depth() const { return layers_.size(); }
  Linear& layer(std::size_t i) { return layers_[i]; }
  const Linear& layer(std::size_t i) const { return layers_[i]; }
  Activation activation(std::size_t i) const;

  void init_xavier(std::mt19937_64& rng);
  void collect(const std::string& prefix, ParameterList& out);

 private:
  std::vector<Linear> layers_;
  Activation output_act_;
};

double sigmoid(double x);

}  // namespace spf::nn

#endif  // SPF_NN_HPP_
