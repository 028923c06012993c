#include "spf/priors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spf/error.hpp"

namespace spf {

namespace {

void check_prior(const GaussianPriorParams& p, int height, int width) {
  if (!(p.sigma_x > 0.0) || !(p.sigma_y > 0.0)) {
    throw DomainError("Gaussian prior sigma must be positive");
  }
  if (height < 2 || width < 2) {
    throw ShapeError("prior maps need at least 2x2 pixels");
  }
}

}  // namespace

Tensor render_prior_map(const GaussianPriorParams& p, int height, int width) {
  check_prior(p, height, width);
  Tensor map({height, width});
  const double norm = 1.0 / (2.0 * std::numbers::pi * p.sigma_x * p.sigma_y);
  const double inv_2sx2 = 1.0 / (2.0 * p.sigma_x * p.sigma_x);
  const double inv_2sy2 = 1.0 / (2.0 * p.sigma_y * p.sigma_y);
  for (int i = 0; i < height; ++i) {
    const double dy = static_cast<double>(i) / (height - 1) - p.mu_y;
    for (int j = 0; j < width; ++j) {
      const double dx = static_cast<double>(j) / (width - 1) - p.mu_x;
      map[static_cast<std::size_t>(i) * width + j] =
          norm * std::exp(-(dx * dx * inv_2sx2 + dy * dy * inv_2sy2));
    }
  }
  return map;
}

GaussianPriorGrad prior_map_backward(const GaussianPriorParams& p, const Tensor& map,
                                     std::span<const double> grad_map) {
  const int height = map.dim(0);
  const int width = map.dim(1);
  const double sx2 = p.sigma_x * p.sigma_x;
  const double sy2 = p.sigma_y * p.sigma_y;
  GaussianPriorGrad g;
  for (int i = 0; i < height; ++i) {
    const double dy = static_cast<double>(i) / (height - 1) - p.mu_y;
    for (int j = 0; j < width; ++j) {
      const double dx = static_cast<double>(j) / (width - 1) - p.mu_x;
      const std::size_t idx = static_cast<std::size_t>(i) * width + j;
      const double gf = grad_map[idx] * map[idx];
      g.mu_x += gf * dx / sx2;
      g.mu_y += gf * dy / sy2;
      g.sigma_x += gf * (dx * dx / (sx2 * p.sigma_x) - 1.0 / p.sigma_x);
      g.sigma_y += gf * (dy * dy / (sy2 * p.sigma_y) - 1.0 / p.sigma_y);
    }
  }
  return g;
}

PriorBank::PriorBank() : table({kNumPriors, 4}) { init_grid(); }

GaussianPriorParams PriorBank::params(int k) const {
  const double* row = table.value.data() + static_cast<std::size_t>(k) * 4;
  return {row[0], row[1], row[2], row[3]};
}

void PriorBank::set_params(int k, const GaussianPriorParams& p) {
  double* row = table.value.data() + static_cast<std::size_t>(k) * 4;
  row[0] = p.mu_x;
  row[1] = p.mu_y;
  row[2] = p.sigma_x;
  row[3] = p.sigma_y;
}

void PriorBank::init_grid() {
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      set_params(r * 4 + c, {0.2 + 0.2 * c, 0.2 + 0.2 * r, 0.25, 0.25});
    }
  }
}

void PriorBank::clamp() {
  for (int k = 0; k < kNumPriors; ++k) {
    auto p = params(k);
    p.mu_x = std::clamp(p.mu_x, 0.0, 1.0);
    p.mu_y = std::clamp(p.mu_y, 0.0, 1.0);
    p.sigma_x = std::max(p.sigma_x, kMinPriorSigma);
    p.sigma_y = std::max(p.sigma_y, kMinPriorSigma);
    set_params(k, p);
  }
}

Tensor PriorBank::render(int height, int width) const {
  Tensor out({kNumPriors, height, width});
  for (int k = 0; k < kNumPriors; ++k) {
    const Tensor map = render_prior_map(params(k), height, width);
    std::copy(map.values().begin(), map.values().end(), out.channel(k).begin());
  }
  return out;
}

void PriorBank::backward(const Tensor& rendered, const Tensor& grad) {
  const int height = rendered.dim(1);
  const int width = rendered.dim(2);
  for (int k = 0; k < kNumPriors; ++k) {
    Tensor map({height, width});
    std::copy(rendered.channel(k).begin(), rendered.channel(k).end(), map.values().begin());
    const auto g = prior_map_backward(params(k), map, grad.channel(k));
    double* row = table.grad.data() + static_cast<std::size_t>(k) * 4;
    row[0] += g.mu_x;
    row[1] += g.mu_y;
    row[2] += g.sigma_x;
    row[3] += g.sigma_y;
  }
}

void PriorBank::collect(nn::ParameterList& out) { out.push_back({"priors/gaussians", &table}); }

}  // namespace spf
