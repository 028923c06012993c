#ifndef SPF_METRICS_HPP_
#define SPF_METRICS_HPP_

#include <utility>
#include <vector>

#include "spf/scanpath.hpp"
#include "spf/tensor.hpp"

namespace spf {

/// Nonnegative single-channel map, (H, W).
class SaliencyMap {
 public:
  SaliencyMap() = default;
  explicit SaliencyMap(Tensor values);

  int height() const { return values_.dim(0); }
  int width() const { return values_.dim(1); }
  double at(int i, int j) const { return values_[static_cast<std::size_t>(i) * width() + j]; }
  const Tensor& values() const { return values_; }

 private:
  Tensor values_;
};

// Nearest pixel (row, col) of a normalized point on an H x W grid.
std::pair<int, int> nearest_pixel(Point p, int height, int width);

struct SaccadeVector {
  Point start;
  double dx = 0.0;
  double dy = 0.0;
  double amplitude() const;
};

std::vector<SaccadeVector> saccades(const Scanpath& scanpath);

struct MultiMatchOptions {
  // Merge near-collinear and short consecutive saccades before comparing.
  bool simplify = false;
  double direction_threshold_deg = 45.0;
  double amplitude_threshold = 0.1;
};

struct MultiMatchScores {
  double shape = 0.0;
  double direction = 0.0;
  double length = 0.0;
  double position = 0.0;
  double mean() const { return (shape + direction + length + position) / 4.0; }
};

// Indices of aligned saccade pairs and the total alignment cost.
struct SaccadeAlignment {
  std::vector<std::pair<int, int>> pairs;
  double cost = 0.0;
};

// Monotone alignment minimizing the summed |a_i - b_j| of matched pairs plus
// the magnitude of every skipped vector.
SaccadeAlignment align_saccades(const std::vector<SaccadeVector>& a,
                                const std::vector<SaccadeVector>& b);

// Similarities from an alignment: shape |a-b| / 2sqrt2, direction angle / pi,
// length ||a|-|b|| / sqrt2, position |start_a - start_b| / sqrt2, each
// averaged over pairs and reported as 1 - dissimilarity.
MultiMatchScores score_alignment(const std::vector<SaccadeVector>& a,
                                 const std::vector<SaccadeVector>& b,
                                 const SaccadeAlignment& alignment);

Scanpath simplify_scanpath(const Scanpath& scanpath, const MultiMatchOptions& options);

// Throws DataError when either scanpath has fewer than 2 fixations.
MultiMatchScores multimatch(const Scanpath& a, const Scanpath& b,
                            const MultiMatchOptions& options = {});

// Mean standardized saliency at the fixations' nearest pixels. A constant
// map yields 0.0 and sets *degenerate (a warning goes to stderr).
double nss(const Scanpath& scanpath, const SaliencyMap& saliency, bool* degenerate = nullptr);

// Linear-interpolated q-quantile of the map values.
double saliency_quantile(const SaliencyMap& saliency, double q);

// Fraction of fixations whose nearest pixel is >= the q-quantile of the map.
double congruency(const Scanpath& scanpath, const SaliencyMap& saliency, double quantile = 0.9);

// sigma of roughly one degree of visual angle for a 36-degree-high display.
inline double default_sigma_px(int height) { return height / 36.0; }

// Unit impulses at the nearest pixels, smoothed with a Gaussian (std
// sigma_px, truncated at 3 sigma, zero outside the image) and scaled to max
// 1. Throws DataError when there are no fixations.
SaliencyMap fixations_to_saliency(const std::vector<Scanpath>& scanpaths, int height, int width,
                                  double sigma_px);

}  // namespace spf

#endif  // SPF_METRICS_HPP_
