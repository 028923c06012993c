// Acceptance suite: one PASS/FAIL line per criterion. Criteria 1-9 gate the
// exit status; criterion 10 needs full datasets and is reported as skipped.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

#include "spf/adaptation.hpp"
#include "spf/cli.hpp"
#include "spf/decoder.hpp"
#include "spf/metrics.hpp"
#include "spf/priors.hpp"
#include "spf/training.hpp"
#include "support.hpp"

using namespace spf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(int id, const std::string& title, double limit_s, const std::function<Outcome()>& fn) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  const bool in_time = limit_s <= 0.0 || secs < limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++g_failures;
  const std::string limit = limit_s > 0.0 ? fmt::format(" (limit {:g} s)", limit_s) : "";
  fmt::print("[{}] {}. {}: {}; {:.2f} s{}\n", pass ? "PASS" : "FAIL", id, title, o.detail, secs,
             limit);
  std::fflush(stdout);
}

// ------------------------------------------------------------ 1 soft-argmax

Outcome soft_argmax_correctness() {
  std::mt19937_64 rng(101);
  double max_value_err = 0.0;
  double max_grad_rel = 0.0;
  for (int n = 0; n < 50; ++n) {
    const int h = test::uniform_int(rng, 3, 8);
    const int w = test::uniform_int(rng, 3, 10);
    const double beta = n % 2 == 0 ? 1.0 : 10.0;
    const Tensor m = test::random_tensor({h, w}, rng);
    // Direct evaluation of the weighted coordinate sum.
    double z = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double e = std::exp(beta * m[static_cast<std::size_t>(i * w + j)]);
        z += e;
        sx += e * j / (w - 1.0);
        sy += e * i / (h - 1.0);
      }
    }
    const Point p = soft_argmax(m, beta);
    max_value_err = std::max({max_value_err, std::abs(p.x - sx / z), std::abs(p.y - sy / z)});

    for (int axis = 0; axis < 2; ++axis) {
      const Point g = axis == 0 ? Point{1.0, 0.0} : Point{0.0, 1.0};
      std::vector<double> grad(m.numel(), 0.0);
      soft_argmax_backward(m.values(), h, w, beta, g, grad);
      auto coord = [&](const Tensor& t) {
        const Point p = soft_argmax(t, beta);
        return axis == 0 ? p.x : p.y;
      };
      const double eps = 1e-4;
      double diff = 0.0;
      double norm = 0.0;
      for (std::size_t i = 0; i < m.numel(); ++i) {
        double f[4];
        const double offsets[4] = {-2 * eps, -eps, eps, 2 * eps};
        for (int k = 0; k < 4; ++k) {
          Tensor t = m;
          t[i] += offsets[k];
          f[k] = coord(t);
        }
        const double fd = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * eps);
        diff += (fd - grad[i]) * (fd - grad[i]);
        norm += fd * fd;
      }
      max_grad_rel = std::max(max_grad_rel, std::sqrt(diff / norm));
    }
  }
  return {max_value_err <= 1e-6 && max_grad_rel <= 1e-4,
          fmt::format("50 maps, max value error {:.2e} (tol 1e-6), max gradient relative error "
                      "{:.2e} (tol 1e-4, norm-wise per map)",
                      max_value_err, max_grad_rel)};
}

// ------------------------------------------------------------ 2 reversal layer

Outcome grl_contract() {
  std::mt19937_64 rng(202);
  bool identity = true;
  bool negation = true;
  for (int n = 0; n < 20; ++n) {
    const Tensor x = test::random_tensor({8, 4, 5}, rng, -10.0, 10.0);
    const Tensor y = grl_forward(x);
    identity = identity && std::memcmp(x.data(), y.data(), x.numel() * sizeof(double)) == 0 &&
               x.shape() == y.shape();
    const Tensor g = grl_backward(x, 1.0);
    for (std::size_t i = 0; i < x.numel(); ++i) negation = negation && g[i] == -x[i];
  }

  // Reversed branch vs a clone with the reversal disabled (multiplier -1
  // passes the gradient through unchanged).
  DomainClassifier head(8);
  head.init_xavier(rng);
  DomainClassifier clone = head;
  int head_agree = 0;
  int head_total = 0;
  int feature_flipped = 0;
  int feature_total = 0;
  for (int n = 0; n < 10; ++n) {
    const Tensor f = test::random_tensor({8, 3, 3}, rng, 0.0, 3.0);
    const DomainLabel label = n % 2 ? DomainLabel::kPainting : DomainLabel::kNatural;
    for (DomainClassifier* c : {&head, &clone}) {
      for (std::size_t l = 0; l < c->mlp().depth(); ++l) {
        c->mlp().layer(l).weight.zero_grad();
        c->mlp().layer(l).bias.zero_grad();
      }
    }
    DomainTrace t1;
    DomainTrace t2;
    double d1 = 0.0;
    double d2 = 0.0;
    domain_bce(head.forward(f, &t1), label, &d1);
    domain_bce(clone.forward(f, &t2), label, &d2);
    const Tensor g_rev = head.backward(t1, d1, 1.0);
    const Tensor g_plain = clone.backward(t2, d2, -1.0);
    for (std::size_t l = 0; l < head.mlp().depth(); ++l) {
      const auto& a = head.mlp().layer(l).weight.grad;
      const auto& b = clone.mlp().layer(l).weight.grad;
      for (std::size_t i = 0; i < a.numel(); ++i) {
        if (b[i] == 0.0) continue;
        ++head_total;
        head_agree += (a[i] > 0) == (b[i] > 0);
      }
    }
    for (std::size_t i = 0; i < f.numel(); ++i) {
      if (g_plain[i] == 0.0) continue;
      ++feature_total;
      feature_flipped += g_rev[i] == -g_plain[i];
    }
  }
  const bool pass = identity && negation && head_total > 0 && head_agree == head_total &&
                    feature_total > 0 && feature_flipped == feature_total;
  return {pass, fmt::format("forward identity bitwise: {}; backward exact negation: {}; head "
                            "gradient signs match GRL-free clone {}/{}; upstream gradients "
                            "reversed {}/{}",
                            identity, negation, head_agree, head_total, feature_flipped,
                            feature_total)};
}

// ------------------------------------------------------------ 3 priors

Outcome gaussian_priors() {
  std::mt19937_64 rng(303);
  double max_rel = 0.0;
  for (int n = 0; n < 20; ++n) {
    const GaussianPriorParams p{test::uniform(rng, 0, 1), test::uniform(rng, 0, 1),
                                test::uniform(rng, 0.05, 0.5), test::uniform(rng, 0.05, 0.5)};
    const int h = 9;
    const int w = 12;
    const Tensor map = render_prior_map(p, h, w);
    for (int px = 0; px < 20; ++px) {
      std::vector<double> sel(map.numel(), 0.0);
      const std::size_t idx = static_cast<std::size_t>(test::uniform_int(rng, 0, h * w - 1));
      sel[idx] = 1.0;
      const GaussianPriorGrad g = prior_map_backward(p, map, sel);
      const double eps = 1e-6;
      auto fd = [&](double GaussianPriorParams::*field) {
        GaussianPriorParams a = p;
        GaussianPriorParams b = p;
        a.*field += eps;
        b.*field -= eps;
        return (render_prior_map(a, h, w)[idx] - render_prior_map(b, h, w)[idx]) / (2 * eps);
      };
      const std::pair<double, double> pairs[] = {{g.mu_x, fd(&GaussianPriorParams::mu_x)},
                                                 {g.mu_y, fd(&GaussianPriorParams::mu_y)},
                                                 {g.sigma_x, fd(&GaussianPriorParams::sigma_x)},
                                                 {g.sigma_y, fd(&GaussianPriorParams::sigma_y)}};
      for (auto [an, num] : pairs) {
        const double scale = std::max(std::abs(an), std::abs(num));
        if (scale > 1e-8) max_rel = std::max(max_rel, std::abs(an - num) / scale);
      }
    }
  }

  int peak_ok = 0;
  int mirror_ok = 0;
  for (int n = 0; n < 100; ++n) {
    const GaussianPriorParams p{test::uniform(rng, 0, 1), test::uniform(rng, 0, 1),
                                test::uniform(rng, 0.02, 0.6), test::uniform(rng, 0.02, 0.6)};
    const int h = test::uniform_int(rng, 2, 15);
    const int w = test::uniform_int(rng, 2, 15);
    const Tensor map = render_prior_map(p, h, w);
    const auto best = std::max_element(map.values().begin(), map.values().end()) -
                      map.values().begin();
    const int ei = static_cast<int>(std::floor(p.mu_y * (h - 1) + 0.5));
    const int ej = static_cast<int>(std::floor(p.mu_x * (w - 1) + 0.5));
    // Ties (mean exactly between two grid points) accept either neighbour.
    const int bi = static_cast<int>(best) / w;
    const int bj = static_cast<int>(best) % w;
    const bool tie = std::abs(map[static_cast<std::size_t>(ei * w + ej)] - map[best]) <=
                     1e-12 * map[best];
    peak_ok += (bi == ei && bj == ej) || tie;

    const Tensor mx = render_prior_map({1.0 - p.mu_x, p.mu_y, p.sigma_x, p.sigma_y}, h, w);
    const Tensor my = render_prior_map({p.mu_x, 1.0 - p.mu_y, p.sigma_x, p.sigma_y}, h, w);
    bool mirrored = true;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double v = map[static_cast<std::size_t>(i * w + j)];
        const double a = mx[static_cast<std::size_t>(i * w + (w - 1 - j))];
        const double b = my[static_cast<std::size_t>((h - 1 - i) * w + j)];
        mirrored = mirrored && std::abs(v - a) <= 1e-9 * std::max(1.0, v) &&
                   std::abs(v - b) <= 1e-9 * std::max(1.0, v);
      }
    }
    mirror_ok += mirrored;
  }
  return {max_rel <= 1e-4 && peak_ok == 100 && mirror_ok == 100,
          fmt::format("max gradient relative error {:.2e} (tol 1e-4) over 20 draws x 20 pixels; "
                      "peak at nearest grid point {}/100; reflection symmetry {}/100",
                      max_rel, peak_ok, mirror_ok)};
}

// ------------------------------------------------------------ 4 selection

Outcome channel_selection() {
  std::mt19937_64 rng(404);
  int agree = 0;
  int degenerate = 0;
  int degenerate_ok = 0;
  for (int n = 0; n < 1000; ++n) {
    std::array<double, kNumCandidates> v;
    if (n % 50 == 0) {
      v.fill(test::uniform(rng, 0.0, 1.0));
    } else {
      for (double& x : v) x = test::uniform(rng, 0.0, 1.0);
      if (n % 7 == 0) v[static_cast<std::size_t>(n % 20)] = v[static_cast<std::size_t>((n + 3) % 20)];
    }
    // Extended precision keeps the mean of equal values exact.
    long double mean = 0.0L;
    for (double x : v) mean += x;
    mean /= 20.0L;
    int expected[20];
    int ones = 0;
    for (int k = 0; k < 20; ++k) {
      expected[k] = static_cast<long double>(v[static_cast<std::size_t>(k)]) > mean ? 1 : 0;
      ones += expected[k];
    }
    const bool fallback = ones == 0;
    if (fallback) {
      int arg = 0;
      for (int k = 1; k < 20; ++k) {
        if (v[static_cast<std::size_t>(k)] > v[static_cast<std::size_t>(arg)]) arg = k;
      }
      expected[arg] = 1;
    }
    const auto mask = binarize_selection(v);
    bool same = true;
    int count = 0;
    for (int k = 0; k < 20; ++k) {
      same = same && mask[static_cast<std::size_t>(k)] == expected[k];
      count += mask[static_cast<std::size_t>(k)];
    }
    agree += same;
    if (fallback) {
      ++degenerate;
      degenerate_ok += count == 1;
    }
  }
  return {agree == 1000 && degenerate > 0 && degenerate_ok == degenerate,
          fmt::format("{}/1000 masks match scalar recomputation; degenerate all-equal cases with "
                      "length exactly 1: {}/{}",
                      agree, degenerate_ok, degenerate)};
}

// ------------------------------------------------------------ 5 loss audit

double oracle_loss(const std::array<double, 20>& v, const std::array<Point, 20>& c, int lp,
                   const Scanpath& gt, double wc) {
  const std::size_t n = std::min<std::size_t>(gt.size(), 20);
  double bce = 0.0;
  for (std::size_t k = 0; k < 20; ++k) {
    const double p = std::min(std::max(v[k], 1e-7), 1.0 - 1e-7);
    const double t = k < n ? 1.0 : 0.0;
    bce += -(t * std::log(p) + (1 - t) * std::log(1 - p));
  }
  bce /= 20;
  const double lg = static_cast<double>(gt.size());
  const double len = std::sqrt(std::fabs(lp * lp - lg * lg));
  double se = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    se += std::pow(c[k].x - gt[k].x, 2) + std::pow(c[k].y - gt[k].y, 2);
  }
  return bce + 0.001 * len + wc * se / (2.0 * n);
}

Outcome loss_audit() {
  std::mt19937_64 rng(505);
  double max_err = 0.0;
  for (int n = 0; n < 100; ++n) {
    std::array<double, 20> v;
    std::array<Point, 20> c;
    for (double& x : v) x = test::uniform(rng, 0.0, 1.0);
    for (auto& p : c) p = {test::uniform(rng, 0, 1), test::uniform(rng, 0, 1)};
    const auto gt =
        test::random_scanpath(static_cast<std::size_t>(test::uniform_int(rng, 1, 20)), rng);
    const int lp = test::uniform_int(rng, 1, 20);
    const double wc = n % 4 == 0 ? 0.0 : test::uniform(rng, 0.1, 2.0);
    max_err = std::max(max_err, std::abs(scanpath_loss(v, c, lp, gt, wc).total -
                                         oracle_loss(v, c, lp, gt, wc)));
  }
  std::array<double, 20> v;
  v.fill(0.5);
  std::array<Point, 20> c{};
  const auto gt5 = test::random_scanpath(5, rng);
  const auto l = scanpath_loss(v, c, 3, gt5, 1.0);
  const double contribution = kLengthWeight * l.length;
  return {max_err <= 1e-6 && contribution == 0.004,
          fmt::format("100 cases, max deviation from independent implementation {:.2e} (tol "
                      "1e-6); len(pred)=3, len(gt)=5 contributes {}",
                      max_err, contribution)};
}

// ------------------------------------------------------------ 6 overfit

// One colored blob per fixation; the color encodes the fixation's rank.
Tensor fixation_image(const Scanpath& sp, int size) {
  static const double palette[5][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {0, 1, 1}};
  Tensor img({3, size, size}, 0.0);
  for (std::size_t f = 0; f < sp.size(); ++f) {
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        const double dx = j / (size - 1.0) - sp[f].x;
        const double dy = i / (size - 1.0) - sp[f].y;
        const double g = std::exp(-(dx * dx + dy * dy) / (2 * 0.08 * 0.08));
        for (int c = 0; c < 3; ++c) {
          img.at(c, i, j) = std::min(1.0, img.at(c, i, j) + palette[f][c] * g);
        }
      }
    }
  }
  return img;
}

Outcome overfit_smoke() {
  std::mt19937_64 rng(606);
  InMemorySource data;
  std::vector<Scanpath> targets;
  for (int k = 0; k < 8; ++k) {
    Scanpath sp = test::random_scanpath(static_cast<std::size_t>(test::uniform_int(rng, 2, 5)), rng);
    for (auto& p : sp) p = {0.15 + 0.7 * p.x, 0.15 + 0.7 * p.y};
    targets.push_back(sp);
    data.add({"syn" + std::to_string(k), fixation_image(sp, 32), sp});
  }
  ScanpathModel model;
  model.initialize(6);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.coord_weight = 100.0;
  cfg.batch_size = 8;
  cfg.epochs = 300;
  cfg.seed = 6;
  const TrainResult r = train(model, data, nullptr, cfg);
  const double initial = r.log.front().loss.total;
  const double final_loss = r.log.back().loss.total;

  double position = 0.0;
  int scored = 0;
  for (std::size_t k = 0; k < 8; ++k) {
    const Scanpath pred = model.predict(data.load(k).image);
    if (pred.size() < 2) continue;
    position += multimatch(pred, targets[k]).position;
    ++scored;
  }
  const double mean_position = scored == 8 ? position / 8 : 0.0;
  const double ratio = final_loss / initial;
  return {r.log.size() == 300 && ratio < 0.25 && mean_position > 0.90,
          fmt::format("{} steps, loss {:.4f} -> {:.4f} (ratio {:.3f}, need < 0.25); mean "
                      "MultiMatch position {:.3f} over {}/8 scanpaths (need > 0.90)",
                      r.log.size(), initial, final_loss, ratio, mean_position, scored)};
}

// ------------------------------------------------------------ 7 adaptation

Tensor painting_style(Tensor img, std::mt19937_64& rng) {
  // Warm color cast plus brush-like horizontal stripes.
  const double phase = test::uniform(rng, 0.0, 6.28);
  for (int i = 0; i < img.dim(1); ++i) {
    const double stripe = 0.15 * std::sin(i * 1.7 + phase);
    for (int j = 0; j < img.dim(2); ++j) {
      img.at(0, i, j) = std::clamp(0.7 * img.at(0, i, j) + 0.3 + stripe, 0.0, 1.0);
      img.at(1, i, j) = std::clamp(0.8 * img.at(1, i, j) + 0.1 + stripe, 0.0, 1.0);
      img.at(2, i, j) = std::clamp(0.5 * img.at(2, i, j), 0.0, 1.0);
    }
  }
  return img;
}

void build_domains(std::uint64_t seed, int count, InMemorySource& natural, InMemorySource& target) {
  std::mt19937_64 rng(seed);
  for (int k = 0; k < count; ++k) {
    const Point c{test::uniform(rng, 0.2, 0.8), test::uniform(rng, 0.2, 0.8)};
    Scanpath sp = test::random_scanpath(static_cast<std::size_t>(test::uniform_int(rng, 2, 4)), rng);
    sp.front() = c;
    natural.add({"nat" + std::to_string(k), test::blob_image(32, 32, c, test::uniform(rng, 0.1, 0.25)), sp});
    const Point d{test::uniform(rng, 0.2, 0.8), test::uniform(rng, 0.2, 0.8)};
    target.add({"pnt" + std::to_string(k),
                painting_style(test::blob_image(32, 32, d, test::uniform(rng, 0.1, 0.25)), rng), {}});
  }
}

std::vector<double> pooled_features(const ScanpathModel& model, const Tensor& image) {
  const Tensor f = model.backbone().forward(image);
  const int hw = f.dim(1) * f.dim(2);
  std::vector<double> out(static_cast<std::size_t>(f.dim(0)), 0.0);
  for (int c = 0; c < f.dim(0); ++c) {
    for (int i = 0; i < hw; ++i) out[static_cast<std::size_t>(c)] += f[static_cast<std::size_t>(c * hw + i)];
    out[static_cast<std::size_t>(c)] /= hw;
  }
  return out;
}

// Logistic regression on standardized pooled backbone features, fitted on
// the training domains and scored on the held-out ones.
double fresh_probe_accuracy(const ScanpathModel& model, const InMemorySource& natural,
                            const InMemorySource& target, const InMemorySource& held_natural,
                            const InMemorySource& held_target) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < natural.size(); ++i) {
    xs.push_back(pooled_features(model, natural.load(i).image));
    ys.push_back(0.0);
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    xs.push_back(pooled_features(model, target.load(i).image));
    ys.push_back(1.0);
  }
  const std::size_t d = xs.front().size();
  const double n = static_cast<double>(xs.size());
  std::vector<double> mu(d, 0.0);
  std::vector<double> sd(d, 0.0);
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < d; ++k) mu[k] += x[k] / n;
  }
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < d; ++k) sd[k] += (x[k] - mu[k]) * (x[k] - mu[k]) / n;
  }
  for (double& s : sd) s = std::sqrt(s) + 1e-8;
  auto standardize = [&](std::vector<double> x) {
    for (std::size_t k = 0; k < d; ++k) x[k] = (x[k] - mu[k]) / sd[k];
    return x;
  };
  for (auto& x : xs) x = standardize(x);
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  for (int it = 0; it < 2000; ++it) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = b;
      for (std::size_t k = 0; k < d; ++k) z += w[k] * xs[i][k];
      const double err = 1.0 / (1.0 + std::exp(-z)) - ys[i];
      for (std::size_t k = 0; k < d; ++k) gw[k] += err * xs[i][k] / n;
      gb += err / n;
    }
    for (std::size_t k = 0; k < d; ++k) w[k] -= 0.5 * (gw[k] + 1e-3 * w[k]);
    b -= 0.5 * gb;
  }
  auto painting = [&](const Tensor& image) {
    const auto x = standardize(pooled_features(model, image));
    double z = b;
    for (std::size_t k = 0; k < d; ++k) z += w[k] * x[k];
    return z > 0.0;
  };
  std::size_t correct = 0;
  for (std::size_t i = 0; i < held_natural.size(); ++i) correct += !painting(held_natural.load(i).image);
  for (std::size_t i = 0; i < held_target.size(); ++i) correct += painting(held_target.load(i).image);
  return static_cast<double>(correct) / static_cast<double>(held_natural.size() + held_target.size());
}

struct AdaptationRun {
  double head_accuracy = 0.0;  // mean over evaluations in steps 100-200
  double probe_accuracy = 0.0;
  long steps = 0;
};

AdaptationRun run_adaptation(double lambda, const InMemorySource& natural,
                             const InMemorySource& target, const InMemorySource& held_natural,
                             const InMemorySource& held_target) {
  ScanpathModel model;
  model.initialize(7);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 8;
  cfg.seed = 7;
  // 200 optimizer steps: 4 natural samples per step.
  cfg.epochs = static_cast<int>(200 / ((natural.size() + 3) / 4));
  AdaptationRun run;
  double sum = 0.0;
  int evaluations = 0;
  adapt(model, natural, target, cfg, GrlConfig{lambda, GrlSchedule::kConstant, 1},
        [&](const StepRecord& r) {
          run.steps = r.step + 1;
          if (r.step + 1 >= 100 && (r.step + 1) % 10 == 0) {
            sum += domain_accuracy(model, held_natural, held_target);
            ++evaluations;
          }
        });
  run.head_accuracy = evaluations ? sum / evaluations : 0.0;
  run.probe_accuracy = fresh_probe_accuracy(model, natural, target, held_natural, held_target);
  return run;
}

Outcome adversarial_adaptation() {
  InMemorySource natural;
  InMemorySource target;
  InMemorySource held_natural;
  InMemorySource held_target;
  build_domains(71, 40, natural, target);
  build_domains(72, 20, held_natural, held_target);
  const AdaptationRun r0 = run_adaptation(0.0, natural, target, held_natural, held_target);
  const AdaptationRun r1 = run_adaptation(1.0, natural, target, held_natural, held_target);
  return {r0.steps == 200 && r1.steps == 200 && r0.head_accuracy > 0.95 &&
              r1.head_accuracy <= 0.65,
          fmt::format("held-out domain-head accuracy, mean over steps 100-200: lambda=0 {:.3f} "
                      "(need > 0.95), lambda=1 {:.3f} (need <= 0.65); fresh linear probe on "
                      "adapted features (informational): lambda=0 {:.3f}, lambda=1 {:.3f}",
                      r0.head_accuracy, r1.head_accuracy, r0.probe_accuracy, r1.probe_accuracy)};
}

// ------------------------------------------------------------ 8 metrics

void enumerate(const std::vector<SaccadeVector>& a, const std::vector<SaccadeVector>& b,
               std::size_t i, std::size_t j, double cost, std::vector<std::pair<int, int>>& pairs,
               double& best, std::vector<std::vector<std::pair<int, int>>>& argbest) {
  if (i == a.size() && j == b.size()) {
    if (cost < best - 1e-12) {
      best = cost;
      argbest.clear();
    }
    if (cost <= best + 1e-12) argbest.push_back(pairs);
    return;
  }
  if (i < a.size() && j < b.size()) {
    pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    enumerate(a, b, i + 1, j + 1, cost + std::hypot(a[i].dx - b[j].dx, a[i].dy - b[j].dy), pairs,
              best, argbest);
    pairs.pop_back();
  }
  if (i < a.size()) {
    enumerate(a, b, i + 1, j, cost + std::hypot(a[i].dx, a[i].dy), pairs, best, argbest);
  }
  if (j < b.size()) {
    enumerate(a, b, i, j + 1, cost + std::hypot(b[j].dx, b[j].dy), pairs, best, argbest);
  }
}

std::array<double, 4> brute_scores(const Scanpath& a, const Scanpath& b,
                                   const std::vector<std::pair<int, int>>& pairs) {
  std::array<double, 4> s{};
  for (auto [i, j] : pairs) {
    const double ax = a[i + 1].x - a[i].x;
    const double ay = a[i + 1].y - a[i].y;
    const double bx = b[j + 1].x - b[j].x;
    const double by = b[j + 1].y - b[j].y;
    s[0] += std::hypot(ax - bx, ay - by);
    const double cosang = (ax * bx + ay * by) / (std::hypot(ax, ay) * std::hypot(bx, by));
    s[1] += std::acos(std::clamp(cosang, -1.0, 1.0));
    s[2] += std::abs(std::hypot(ax, ay) - std::hypot(bx, by));
    s[3] += std::hypot(a[i].x - b[j].x, a[i].y - b[j].y);
  }
  const double n = static_cast<double>(pairs.size());
  return {1 - s[0] / n / (2 * std::numbers::sqrt2), 1 - s[1] / n / std::numbers::pi,
          1 - s[2] / n / std::numbers::sqrt2, 1 - s[3] / n / std::numbers::sqrt2};
}

Outcome metrics_oracles() {
  std::mt19937_64 rng(808);
  int mm_ok = 0;
  for (int n = 0; n < 200; ++n) {
    const auto a = test::random_scanpath(static_cast<std::size_t>(test::uniform_int(rng, 2, 6)), rng);
    const auto b = test::random_scanpath(static_cast<std::size_t>(test::uniform_int(rng, 2, 6)), rng);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<std::pair<int, int>>> argbest;
    std::vector<std::pair<int, int>> scratch;
    enumerate(saccades(a), saccades(b), 0, 0, 0.0, scratch, best, argbest);
    const auto got = multimatch(a, b);
    bool match = false;
    for (const auto& pairs : argbest) {
      const auto ref = brute_scores(a, b, pairs);
      match = match || (std::abs(got.shape - ref[0]) < 1e-9 && std::abs(got.direction - ref[1]) < 1e-9 &&
                        std::abs(got.length - ref[2]) < 1e-9 && std::abs(got.position - ref[3]) < 1e-9);
    }
    mm_ok += match;
  }

  int nss_ok = 0;
  int cong_ok = 0;
  for (int n = 0; n < 500; ++n) {
    const int h = test::uniform_int(rng, 4, 12);
    const int w = test::uniform_int(rng, 4, 12);
    const Tensor base = test::random_tensor({h, w}, rng, 0.0, 1.0);
    const auto sp = test::random_scanpath(static_cast<std::size_t>(test::uniform_int(rng, 1, 8)), rng);
    const double alpha = test::uniform(rng, 0.01, 100.0);
    const double c = test::uniform(rng, 0.0, 10.0);
    Tensor affine = base;
    Tensor monotone = base;
    for (double& v : affine.values()) v = alpha * v + c;
    for (double& v : monotone.values()) v = std::log1p(v) + std::exp(2.0 * v);
    const double n0 = nss(sp, SaliencyMap(base));
    const double n1 = nss(sp, SaliencyMap(affine));
    nss_ok += std::abs(n0 - n1) <= 1e-9 * std::max(1.0, std::abs(n0));
    const double q = test::uniform(rng, 0.5, 0.95);
    cong_ok += congruency(sp, SaliencyMap(base), q) == congruency(sp, SaliencyMap(monotone), q);
  }

  int self_ok = 0;
  for (int n = 0; n < 100; ++n) {
    const auto a = test::random_scanpath(static_cast<std::size_t>(test::uniform_int(rng, 2, 12)), rng);
    const auto s = multimatch(a, a);
    self_ok += s.shape == 1.0 && s.direction == 1.0 && s.length == 1.0 && s.position == 1.0;
  }
  return {mm_ok == 200 && nss_ok == 500 && cong_ok == 500 && self_ok == 100,
          fmt::format("MultiMatch = brute force {}/200; NSS affine invariance {}/500; congruency "
                      "monotone invariance {}/500; multimatch(a,a) = (1,1,1,1) {}/100",
                      mm_ok, nss_ok, cong_ok, self_ok)};
}

// ------------------------------------------------------------ 9 determinism

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome pipeline_determinism() {
  test::TempDir dir("acceptance_det");
  const auto manifest = test::write_fixture_dataset(dir / "data", 4, 2, 909);
  auto train_into = [&](const std::string& name) {
    return cli::run({"train", "--manifest", manifest.string(), "--out", (dir / name).string(),
                     "--backbone", "tiny", "--height", "32", "--width", "32", "--epochs", "2",
                     "--batch-size", "3", "--learning-rate", "1e-3", "--seed", "11"})
        .exit_code;
  };
  const int c1 = train_into("run1");
  const int c2 = train_into("run2");
  const std::string log1 = slurp(dir / "run1" / "loss_log.txt");
  const std::string log2 = slurp(dir / "run2" / "loss_log.txt");
  const bool logs_equal = c1 == 0 && c2 == 0 && !log1.empty() && log1 == log2;

  const std::string bytes1 = slurp(dir / "run1" / "checkpoint.spfc");
  const bool runs_equal = bytes1 == slurp(dir / "run2" / "checkpoint.spfc");
  const Checkpoint ck = load_checkpoint(dir / "run1" / "checkpoint.spfc");
  save_checkpoint(ck, dir / "resaved.spfc");
  const bool roundtrip = !bytes1.empty() && slurp(dir / "resaved.spfc") == bytes1;
  const Checkpoint again = load_checkpoint(dir / "resaved.spfc");
  const bool arrays_equal = again.arrays == ck.arrays && again.metadata == ck.metadata;
  return {logs_equal && roundtrip && arrays_equal,
          fmt::format("identical loss logs: {}; identical checkpoints across runs: {}; "
                      "save/load/save byte-identical: {}; arrays bitwise equal: {}",
                      logs_equal, runs_equal, roundtrip, arrays_equal)};
}

}  // namespace

int main() {
  fmt::print("acceptance suite\n");
  report(1, "Soft-ArgMax correctness", 10, soft_argmax_correctness);
  report(2, "GRL contract", 5, grl_contract);
  report(3, "Gaussian priors", 10, gaussian_priors);
  report(4, "Channel selection", 5, channel_selection);
  report(5, "Loss audit", 0, loss_audit);
  report(6, "Overfit smoke test", 300, overfit_smoke);
  report(7, "Adversarial adaptation (toy)", 180, adversarial_adaptation);
  report(8, "Metrics oracles", 30, metrics_oracles);
  report(9, "Pipeline determinism", 0, pipeline_determinism);
  fmt::print("[SKIP] 10. Extended full-scale track (non-gating): needs the full Salicon and "
             "painting corpora; see README\n");
  fmt::print("{} of 9 gating criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
