#ifndef SPF_PRIORS_HPP_
#define SPF_PRIORS_HPP_

#include <array>

#include "spf/nn.hpp"
#include "spf/tensor.hpp"

namespace spf {

inline constexpr int kNumPriors = 16;
inline constexpr double kMinPriorSigma = 1e-3;

// Mean and standard deviation of one Gaussian prior, in normalized image
// coordinates (x along the width, y along the height).
struct GaussianPriorParams {
  double mu_x = 0.5;
  double mu_y = 0.5;
  double sigma_x = 0.25;
  double sigma_y = 0.25;
};

// d(sum_ij grad_map(i,j) * map(i,j)) / d(params)
struct GaussianPriorGrad {
  double mu_x = 0.0;
  double mu_y = 0.0;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
};

// Bivariate Gaussian density sampled at pixel centers x = j/(W-1), y = i/(H-1).
// Throws DomainError for a non-positive sigma and ShapeError for H or W < 2.
Tensor render_prior_map(const GaussianPriorParams& p, int height, int width);

GaussianPriorGrad prior_map_backward(const GaussianPriorParams& p, const Tensor& map,
                                     std::span<const double> grad_map);

/// The 16 learnable prior maps. Parameters live in one (16, 4) array laid
/// out as (mu_x, mu_y, sigma_x, sigma_y) per row.
class PriorBank {
 public:
  PriorBank();

  GaussianPriorParams params(int k) const;
  void set_params(int k, const GaussianPriorParams& p);

  // Means on a 4x4 grid over [0.2, 0.8]^2, sigmas 0.25.
  void init_grid();
  // Projects every entry back onto mu in [0,1], sigma >= kMinPriorSigma.
  void clamp();

  Tensor render(int height, int width) const;
  void backward(const Tensor& rendered, const Tensor& grad);

  void collect(nn::ParameterList& out);

  nn::Parameter table;
};

}  // namespace spf

#endif  // SPF_PRIORS_HPP_
