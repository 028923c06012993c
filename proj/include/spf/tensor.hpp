#ifndef SPF_TENSOR_HPP_
#define SPF_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace spf {

using Shape = std::vector<int>;

std::string shape_string(const Shape& shape);

/**
 * Dense row-major array of doubles. Feature volumes use (C, H, W); vectors
 * are rank 1. Value type: copies are deep.
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 accessors.
  double& at(int c, int h, int w) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  double at(int c, int h, int w) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }

  // Contiguous view of one channel of a rank-3 tensor.
  std::span<double> channel(int c);
  std::span<const double> channel(int c) const;

  void fill(double value);
  void reshape(Shape shape);
  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double scale);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_numel(const Shape& shape);

// Stacks rank-3 tensors with equal spatial extent along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace spf

#endif  // SPF_TENSOR_HPP_
