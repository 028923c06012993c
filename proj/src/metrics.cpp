#include "spf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

#include "spf/error.hpp"

namespace spf {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

double angle_between(const SaccadeVector& a, const SaccadeVector& b) {
  double diff = std::abs(std::atan2(a.dy, a.dx) - std::atan2(b.dy, b.dx));
  if (diff > std::numbers::pi) diff = 2.0 * std::numbers::pi - diff;
  return diff;
}

double difference(const SaccadeVector& a, const SaccadeVector& b) {
  return std::hypot(a.dx - b.dx, a.dy - b.dy);
}

}  // namespace

SaliencyMap::SaliencyMap(Tensor values) : values_(std::move(values)) {
  if (values_.rank() != 2) {
    throw ShapeError("saliency map must be rank 2, got " + shape_string(values_.shape()));
  }
  for (double v : values_.values()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw DataError("saliency map values must be finite and nonnegative");
    }
  }
}

std::pair<int, int> nearest_pixel(Point p, int height, int width) {
  const int i = static_cast<int>(std::lround(std::clamp(p.y, 0.0, 1.0) * (height - 1)));
  const int j = static_cast<int>(std::lround(std::clamp(p.x, 0.0, 1.0) * (width - 1)));
  return {i, j};
}

double SaccadeVector::amplitude() const { return std::hypot(dx, dy); }

std::vector<SaccadeVector> saccades(const Scanpath& scanpath) {
  std::vector<SaccadeVector> out;
  for (std::size_t i = 0; i + 1 < scanpath.size(); ++i) {
    out.push_back({scanpath[i], scanpath[i + 1].x - scanpath[i].x,
                   scanpath[i + 1].y - scanpath[i].y});
  }
  return out;
}

SaccadeAlignment align_saccades(const std::vector<SaccadeVector>& a,
                                const std::vector<SaccadeVector>& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  enum Move : unsigned char { kNone, kMatch, kSkipA, kSkipB };
  std::vector<double> cost((n + 1) * (m + 1), 0.0);
  std::vector<Move> move((n + 1) * (m + 1), kNone);
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };

  for (std::size_t i = 1; i <= n; ++i) {
    cost[at(i, 0)] = cost[at(i - 1, 0)] + a[i - 1].amplitude();
    move[at(i, 0)] = kSkipA;
  }
  for (std::size_t j = 1; j <= m; ++j) {
    cost[at(0, j)] = cost[at(0, j - 1)] + b[j - 1].amplitude();
    move[at(0, j)] = kSkipB;
  }
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      double best = cost[at(i - 1, j - 1)] + difference(a[i - 1], b[j - 1]);
      Move choice = kMatch;
      const double skip_a = cost[at(i - 1, j)] + a[i - 1].amplitude();
      if (skip_a < best) {
        best = skip_a;
        choice = kSkipA;
      }
      const double skip_b = cost[at(i, j - 1)] + b[j - 1].amplitude();
      if (skip_b < best) {
        best = skip_b;
        choice = kSkipB;
      }
      cost[at(i, j)] = best;
      move[at(i, j)] = choice;
    }
  }

  SaccadeAlignment result;
  result.cost = cost[at(n, m)];
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    switch (move[at(i, j)]) {
      case kMatch:
        result.pairs.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
        --i;
        --j;
        break;
      case kSkipA:
        --i;
        break;
      case kSkipB:
        --j;
        break;
      case kNone:
        i = j = 0;
        break;
    }
  }
  std::reverse(result.pairs.begin(), result.pairs.end());
  return result;
}

MultiMatchScores score_alignment(const std::vector<SaccadeVector>& a,
                                 const std::vector<SaccadeVector>& b,
                                 const SaccadeAlignment& alignment) {
  MultiMatchScores s;
  if (alignment.pairs.empty()) return s;
  double shape = 0.0;
  double direction = 0.0;
  double length = 0.0;
  double position = 0.0;
  for (const auto& [i, j] : alignment.pairs) {
    const auto& u = a[static_cast<std::size_t>(i)];
    const auto& v = b[static_cast<std::size_t>(j)];
    shape += difference(u, v);
    direction += angle_between(u, v);
    length += std::abs(u.amplitude() - v.amplitude());
    position += std::hypot(u.start.x - v.start.x, u.start.y - v.start.y);
  }
  const double n = static_cast<double>(alignment.pairs.size());
  s.shape = 1.0 - shape / n / (2.0 * kSqrt2);
  s.direction = 1.0 - direction / n / std::numbers::pi;
  s.length = 1.0 - length / n / kSqrt2;
  s.position = 1.0 - position / n / kSqrt2;
  return s;
}

Scanpath simplify_scanpath(const Scanpath& scanpath, const MultiMatchOptions& options) {
  Scanpath path = scanpath;
  const double max_angle = options.direction_threshold_deg * std::numbers::pi / 180.0;
  bool changed = true;
  while (changed && path.size() > 2) {
    changed = false;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      const SaccadeVector in{path[i - 1], path[i].x - path[i - 1].x, path[i].y - path[i - 1].y};
      const SaccadeVector out{path[i], path[i + 1].x - path[i].x, path[i + 1].y - path[i].y};
      const bool collinear = in.amplitude() > 0.0 && out.amplitude() > 0.0 &&
                             angle_between(in, out) < max_angle;
      const bool short_pair = in.amplitude() < options.amplitude_threshold &&
                              out.amplitude() < options.amplitude_threshold;
      if (collinear || short_pair) {
        path.erase(path.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return path;
}

MultiMatchScores multimatch(const Scanpath& a, const Scanpath& b,
                            const MultiMatchOptions& options) {
  if (a.size() < 2 || b.size() < 2) {
    throw DataError("MultiMatch needs at least two fixations per scanpath");
  }
  const Scanpath pa = options.simplify ? simplify_scanpath(a, options) : a;
  const Scanpath pb = options.simplify ? simplify_scanpath(b, options) : b;
  const auto sa = saccades(pa);
  const auto sb = saccades(pb);
  return score_alignment(sa, sb, align_saccades(sa, sb));
}

double nss(const Scanpath& scanpath, const SaliencyMap& saliency, bool* degenerate) {
  if (scanpath.empty()) throw DataError("NSS needs at least one fixation");
  const auto values = saliency.values().values();
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const bool flat = *lo == *hi || !(sd > 0.0);
  if (degenerate) *degenerate = flat;
  if (flat) {
    std::cerr << "warning: NSS on a constant saliency map is defined as 0\n";
    return 0.0;
  }
  double total = 0.0;
  for (const auto& p : scanpath) {
    const auto [i, j] = nearest_pixel(p, saliency.height(), saliency.width());
    total += (saliency.at(i, j) - mean) / sd;
  }
  return total / static_cast<double>(scanpath.size());
}

double saliency_quantile(const SaliencyMap& saliency, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile must lie in [0,1]");
  const auto v = saliency.values().values();
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double congruency(const Scanpath& scanpath, const SaliencyMap& saliency, double quantile) {
  if (scanpath.empty()) throw DataError("congruency needs at least one fixation");
  const double threshold = saliency_quantile(saliency, quantile);
  std::size_t inside = 0;
  for (const auto& p : scanpath) {
    const auto [i, j] = nearest_pixel(p, saliency.height(), saliency.width());
    if (saliency.at(i, j) >= threshold) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(scanpath.size());
}

SaliencyMap fixations_to_saliency(const std::vector<Scanpath>& scanpaths, int height, int width,
                                  double sigma_px) {
  if (height < 1 || width < 1) throw ShapeError("saliency map extent must be positive");
  if (sigma_px < 0.0) throw DomainError("sigma_px must be nonnegative");
  Tensor impulses({height, width});
  std::size_t count = 0;
  for (const auto& sp : scanpaths) {
    for (const auto& p : sp) {
      const auto [i, j] = nearest_pixel(p, height, width);
      impulses[static_cast<std::size_t>(i) * width + j] += 1.0;
      ++count;
    }
  }
  if (count == 0) throw DataError("no fixations to build a saliency map from");

  const int radius = static_cast<int>(std::floor(3.0 * sigma_px));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1), 1.0);
  if (sigma_px > 0.0) {
    for (int d = -radius; d <= radius; ++d) {
      kernel[static_cast<std::size_t>(d + radius)] =
          std::exp(-static_cast<double>(d * d) / (2.0 * sigma_px * sigma_px));
    }
  }

  // Separable pass; taps falling outside the image are dropped.
  Tensor rows({height, width});
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int jj = j + d;
        if (jj < 0 || jj >= width) continue;
        acc += kernel[static_cast<std::size_t>(d + radius)] *
               impulses[static_cast<std::size_t>(i) * width + jj];
      }
      rows[static_cast<std::size_t>(i) * width + j] = acc;
    }
  }
  Tensor out({height, width});
  double peak = 0.0;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int ii = i + d;
        if (ii < 0 || ii >= height) continue;
        acc += kernel[static_cast<std::size_t>(d + radius)] *
               rows[static_cast<std::size_t>(ii) * width + j];
      }
      out[static_cast<std::size_t>(i) * width + j] = acc;
      peak = std::max(peak, acc);
    }
  }
  out *= 1.0 / peak;
  return SaliencyMap(std::move(out));
}

}  // namespace spf
