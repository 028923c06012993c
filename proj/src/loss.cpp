#include <algorithm>
#include <cmath>

#include "spf/error.hpp"
#include "spf/training.hpp"

namespace spf {

Scanpath truncate_scanpath(const Scanpath& gt) {
  if (gt.size() <= static_cast<std::size_t>(kNumCandidates)) return gt;
  return Scanpath(gt.begin(), gt.begin() + kNumCandidates);
}

std::array<double, kNumCandidates> length_target(std::size_t gt_length) {
  std::array<double, kNumCandidates> m{};
  const std::size_t n = std::min<std::size_t>(gt_length, kNumCandidates);
  for (std::size_t k = 0; k < n; ++k) m[k] = 1.0;
  return m;
}

LossBreakdown scanpath_loss(std::span<const double, kNumCandidates> v,
                            std::span<const Point, kNumCandidates> coords, int predicted_length,
                            const Scanpath& gt, double coord_weight, OutputGrad* grad) {
  if (gt.empty()) throw DataError("ground-truth scanpath is empty");
  const auto target = length_target(gt.size());
  const std::size_t n = std::min<std::size_t>(gt.size(), kNumCandidates);

  LossBreakdown loss;
  for (std::size_t k = 0; k < kNumCandidates; ++k) {
    const double p = std::clamp(v[k], kBceEpsilon, 1.0 - kBceEpsilon);
    loss.bce -= target[k] * std::log(p) + (1.0 - target[k]) * std::log(1.0 - p);
    if (grad) grad->v[k] = (p - target[k]) / (p * (1.0 - p)) / kNumCandidates;
  }
  loss.bce /= kNumCandidates;

  const double lp = predicted_length;
  const double lg = static_cast<double>(gt.size());
  loss.length = std::sqrt(std::abs(lp * lp - lg * lg));

  for (std::size_t k = 0; k < n; ++k) {
    const double dx = coords[k].x - gt[k].x;
    const double dy = coords[k].y - gt[k].y;
    loss.coord += dx * dx + dy * dy;
    if (grad) {
      grad->coords[k].x = coord_weight * dx / static_cast<double>(n);
      grad->coords[k].y = coord_weight * dy / static_cast<double>(n);
    }
  }
  loss.coord /= 2.0 * static_cast<double>(n);
  if (grad) {
    for (std::size_t k = n; k < kNumCandidates; ++k) grad->coords[k] = {};
  }

  loss.total = loss.bce + kLengthWeight * loss.length + coord_weight * loss.coord;
  return loss;
}

LossBreakdown scanpath_loss(const ModelOutput& output, const Scanpath& gt, double coord_weight,
                            OutputGrad* grad) {
  return scanpath_loss(output.selection.v, output.coords, output.selection.count(), gt,
                       coord_weight, grad);
}

}  // namespace spf
