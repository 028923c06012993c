#include "spf/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "spf/error.hpp"

namespace spf::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Unfolds the channels [c0, c0 + count) of x into a (count*k*k, Ho*Wo) matrix.
void im2col(const Tensor& x, int c0, int count, int kernel, int stride, int pad, int out_h,
            int out_w, RowMatrix& col) {
  const int in_h = x.dim(1);
  const int in_w = x.dim(2);
  col.resize(static_cast<Eigen::Index>(count) * kernel * kernel,
             static_cast<Eigen::Index>(out_h) * out_w);
  for (int c = 0; c < count; ++c) {
    const double* plane = x.data() + static_cast<std::size_t>(c0 + c) * in_h * in_w;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* row = col.row((c * kernel + ky) * kernel + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[oy * out_w + ox] = (iy >= 0 && iy < in_h && ix >= 0 && ix < in_w)
                                       ? plane[iy * in_w + ix]
                                       : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const RowMatrix& col, int c0, int count, int kernel, int stride, int pad,
            int out_h, int out_w, Tensor& dx) {
  const int in_h = dx.dim(1);
  const int in_w = dx.dim(2);
  for (int c = 0; c < count; ++c) {
    double* plane = dx.data() + static_cast<std::size_t>(c0 + c) * in_h * in_w;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* row = col.row((c * kernel + ky) * kernel + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= in_w) continue;
            plane[iy * in_w + ix] += row[oy * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void xavier_uniform(Tensor& weight, int fan_in, int fan_out, std::mt19937_64& rng,
                    double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : weight.values()) w = dist(rng);
}

double xavier_gain(Activation act) {
  return act == Activation::kRelu || act == Activation::kRelu6 ? std::sqrt(2.0) : 1.0;
}

void activate(Tensor& x, Activation act) {
  switch (act) {
    case Activation::kNone:
      return;
    case Activation::kRelu:
      for (double& v : x.values()) v = std::max(v, 0.0);
      return;
    case Activation::kRelu6:
      for (double& v : x.values()) v = std::clamp(v, 0.0, 6.0);
      return;
    case Activation::kSigmoid:
      for (double& v : x.values()) v = sigmoid(v);
      return;
  }
}

void activation_backward(const Tensor& output, Tensor& grad, Activation act) {
  auto out = output.values();
  auto g = grad.values();
  switch (act) {
    case Activation::kNone:
      return;
    case Activation::kRelu:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (out[i] <= 0.0) g[i] = 0.0;
      }
      return;
    case Activation::kRelu6:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (out[i] <= 0.0 || out[i] >= 6.0) g[i] = 0.0;
      }
      return;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= out[i] * (1.0 - out[i]);
      return;
  }
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const Options& options) : options_(options) {
  if (options.in_channels <= 0 || options.out_channels <= 0 || options.kernel <= 0 ||
      options.stride <= 0 || options.padding < 0 || options.groups <= 0 ||
      options.in_channels % options.groups != 0 || options.out_channels % options.groups != 0) {
    throw ShapeError("invalid convolution options");
  }
  weight = Parameter({options.out_channels, options.in_channels / options.groups,
                      options.kernel, options.kernel});
  bias = Parameter({options.out_channels});
}

int Conv2d::output_extent(int input_extent) const {
  return (input_extent + 2 * options_.padding - options_.kernel) / options_.stride + 1;
}

void Conv2d::check_input(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != options_.in_channels) {
    throw ShapeError("convolution expects " + std::to_string(options_.in_channels) +
                     " input channels, got " + shape_string(x.shape()));
  }
  if (output_extent(x.dim(1)) <= 0 || output_extent(x.dim(2)) <= 0) {
    throw ShapeError("input " + shape_string(x.shape()) + " too small for convolution");
  }
}

Tensor Conv2d::forward(const Tensor& x) const {
  check_input(x);
  const auto& o = options_;
  const int out_h = output_extent(x.dim(1));
  const int out_w = output_extent(x.dim(2));
  const int cin_g = o.in_channels / o.groups;
  const int cout_g = o.out_channels / o.groups;
  const int patch = cin_g * o.kernel * o.kernel;
  const int spatial = out_h * out_w;

  Tensor y({o.out_channels, out_h, out_w});
  RowMatrix col;
  for (int g = 0; g < o.groups; ++g) {
    im2col(x, g * cin_g, cin_g, o.kernel, o.stride, o.padding, out_h, out_w, col);
    ConstMatrixMap w(weight.value.data() + static_cast<std::size_t>(g) * cout_g * patch, cout_g,
                     patch);
    MatrixMap out(y.data() + static_cast<std::size_t>(g) * cout_g * spatial, cout_g, spatial);
    out.noalias() = w * col;
  }
  for (int c = 0; c < o.out_channels; ++c) {
    const double b = bias.value[static_cast<std::size_t>(c)];
    for (double& v : y.channel(c)) v += b;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& grad_out) {
  check_input(x);
  const auto& o = options_;
  const int out_h = output_extent(x.dim(1));
  const int out_w = output_extent(x.dim(2));
  if (grad_out.shape() != Shape{o.out_channels, out_h, out_w}) {
    throw ShapeError("convolution gradient has shape " + shape_string(grad_out.shape()));
  }
  const int cin_g = o.in_channels / o.groups;
  const int cout_g = o.out_channels / o.groups;
  const int patch = cin_g * o.kernel * o.kernel;
  const int spatial = out_h * out_w;

  Tensor dx = Tensor::zeros_like(x);
  RowMatrix col;
  RowMatrix dcol;
  for (int g = 0; g < o.groups; ++g) {
    im2col(x, g * cin_g, cin_g, o.kernel, o.stride, o.padding, out_h, out_w, col);
    ConstMatrixMap dy(grad_out.data() + static_cast<std::size_t>(g) * cout_g * spatial, cout_g,
                      spatial);
    const std::size_t w_offset = static_cast<std::size_t>(g) * cout_g * patch;
    MatrixMap dw(weight.grad.data() + w_offset, cout_g, patch);
    dw.noalias() += dy * col.transpose();
    ConstMatrixMap w(weight.value.data() + w_offset, cout_g, patch);
    dcol.noalias() = w.transpose() * dy;
    col2im(dcol, g * cin_g, cin_g, o.kernel, o.stride, o.padding, out_h, out_w, dx);
  }
  for (int c = 0; c < o.out_channels; ++c) {
    double sum = 0.0;
    for (double v : grad_out.channel(c)) sum += v;
    bias.grad[static_cast<std::size_t>(c)] += sum;
  }
  return dx;
}

void Conv2d::init_xavier(std::mt19937_64& rng, double gain) {
  const int k2 = options_.kernel * options_.kernel;
  xavier_uniform(weight.value, options_.in_channels / options_.groups * k2,
                 options_.out_channels / options_.groups * k2, rng, gain);
  bias.value.fill(0.0);
}

void Conv2d::collect(const std::string& prefix, ParameterList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features)
    : weight({out_features, in_features}), bias({out_features}) {}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() != 1 || x.dim(0) != in_features()) {
    throw ShapeError("linear layer expects " + std::to_string(in_features()) +
                     " features, got " + shape_string(x.shape()));
  }
  Tensor y({out_features()});
  ConstMatrixMap w(weight.value.data(), out_features(), in_features());
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), in_features());
  Eigen::Map<const Eigen::VectorXd> b(bias.value.data(), out_features());
  Eigen::Map<Eigen::VectorXd>(y.data(), out_features()) = w * xv + b;
  return y;
}

Tensor Linear::backward(const Tensor& x, const Tensor& grad_out) {
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), in_features());
  Eigen::Map<const Eigen::VectorXd> dy(grad_out.data(), out_features());
  MatrixMap dw(weight.grad.data(), out_features(), in_features());
  dw.noalias() += dy * xv.transpose();
  Eigen::Map<Eigen::VectorXd>(bias.grad.data(), out_features()) += dy;
  ConstMatrixMap w(weight.value.data(), out_features(), in_features());
  Tensor dx({in_features()});
  Eigen::Map<Eigen::VectorXd>(dx.data(), in_features()).noalias() = w.transpose() * dy;
  return dx;
}

void Linear::init_xavier(std::mt19937_64& rng, double gain) {
  xavier_uniform(weight.value, in_features(), out_features(), rng, gain);
  bias.value.fill(0.0);
}

void Linear::collect(const std::string& prefix, ParameterList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------- ConvStack

void ConvStack::add(const Conv2d::Options& options, Activation act) {
  layers_.emplace_back(options);
  acts_.push_back(act);
}

Tensor ConvStack::forward(const Tensor& x, LayerTrace* trace) const {
  if (trace) {
    trace->activations.clear();
    trace->activations.reserve(layers_.size() + 1);
    trace->activations.push_back(x);
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    activate(h, acts_[i]);
    if (trace) trace->activations.push_back(h);
  }
  return h;
}

Tensor ConvStack::backward(const LayerTrace& trace, Tensor grad_out) {
  for (std::size_t i = layers_.size(); i-- > 0;) {
    activation_backward(trace.activations[i + 1], grad_out, acts_[i]);
    grad_out = layers_[i].backward(trace.activations[i], grad_out);
  }
  return grad_out;
}

void ConvStack::init_xavier(std::mt19937_64& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].init_xavier(rng, xavier_gain(acts_[i]));
}

void ConvStack::collect(const std::string& prefix, const std::vector<std::string>& names,
                        ParameterList& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string name = i < names.size() ? names[i] : "conv" + std::to_string(i);
    layers_[i].collect(prefix + name, out);
  }
}

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(const std::vector<int>& widths, Activation output_act) : output_act_(output_act) {
  if (widths.size() < 2) throw ShapeError("an MLP needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(widths[i], widths[i + 1]);
  }
}

Activation Mlp::activation(std::size_t i) const {
  return i + 1 == layers_.size() ? output_act_ : Activation::kRelu;
}

Tensor Mlp::forward(const Tensor& x, LayerTrace* trace) const {
  if (trace) {
    trace->activations.clear();
    trace->activations.push_back(x);
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    activate(h, activation(i));
    if (trace) trace->activations.push_back(h);
  }
  return h;
}

Tensor Mlp::backward(const LayerTrace& trace, Tensor grad_out) {
  for (std::size_t i = layers_.size(); i-- > 0;) {
    activation_backward(trace.activations[i + 1], grad_out, activation(i));
    grad_out = layers_[i].backward(trace.activations[i], grad_out);
  }
  return grad_out;
}

void Mlp::init_xavier(std::mt19937_64& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].init_xavier(rng, xavier_gain(activation(i)));
}

void Mlp::collect(const std::string& prefix, ParameterList& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".fc" + std::to_string(i), out);
  }
}

}  // namespace spf::nn
