#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "spf/error.hpp"
#include "spf/training.hpp"

namespace spf {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(coord_weight >= 0.0)) throw ConfigError("coord_weight must be nonnegative");
}

json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"seed", seed},
          {"coord_weight", coord_weight}};
}

std::string format_log_line(const StepRecord& r) {
  return fmt::format("{}, {}, {}, {}, {}, {}, {}", r.step, r.epoch, r.loss.total, r.loss.bce,
                     r.loss.length, r.loss.coord, r.loss.domain);
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::string batch_locator(int epoch, std::size_t batch, const std::vector<std::string>& ids) {
  std::string joined;
  for (const auto& id : ids) joined += (joined.empty() ? "" : ",") + id;
  return fmt::format("epoch {} batch {} [{}]", epoch, batch, joined);
}

void accumulate(LossBreakdown& sum, const LossBreakdown& x, double scale) {
  sum.total += scale * x.total;
  sum.bce += scale * x.bce;
  sum.length += scale * x.length;
  sum.coord += scale * x.coord;
  sum.domain += scale * x.domain;
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.total) && std::isfinite(l.bce) && std::isfinite(l.length) &&
         std::isfinite(l.coord) && std::isfinite(l.domain);
}

// Forward + backward of the supervised loss for one sample; gradients are
// scaled by `scale`. `branch`, when set, maps the backbone features to an
// extra feature gradient (the reversed domain gradient).
LossBreakdown supervised_step(ScanpathModel& model, const Sample& sample, double coord_weight,
                              double scale, const std::function<Tensor(const Tensor&)>& branch) {
  validate_scanpath(sample.scanpath);
  const Scanpath gt = truncate_scanpath(sample.scanpath);
  ForwardTrace trace;
  const ModelOutput out = model.forward(sample.image, &trace);
  OutputGrad grad;
  const LossBreakdown loss = scanpath_loss(out, gt, coord_weight, &grad);
  if (!finite(loss)) return loss;
  for (auto& g : grad.v) g *= scale;
  for (auto& c : grad.coords) {
    c.x *= scale;
    c.y *= scale;
  }
  if (branch) grad.features = branch(out.features);
  model.backward(trace, out, grad);
  return loss;
}

void check_non_empty(const SampleSource& source, const char* what) {
  if (source.size() == 0) throw DataError(std::string(what) + " dataset is empty");
}

}  // namespace

double evaluate_loss(const ScanpathModel& model, const SampleSource& source, double coord_weight) {
  if (source.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Sample s = source.load(i);
    const ModelOutput out = model.forward(s.image);
    total += scanpath_loss(out, truncate_scanpath(s.scanpath), coord_weight).total;
  }
  return total / static_cast<double>(source.size());
}

TrainResult train(ScanpathModel& model, const SampleSource& train_set,
                  const SampleSource* validation, const TrainConfig& config,
                  const StepCallback& on_step) {
  config.validate();
  check_non_empty(train_set, "training");

  Adam optimizer(model.parameters(), {.learning_rate = config.learning_rate});
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    BatchIterator batches(train_set, config.batch_size, epoch_seed(config.seed, epoch));
    double epoch_total = 0.0;
    std::size_t epoch_batches = 0;
    while (auto batch = batches.next()) {
      model.zero_grad();
      const double scale = 1.0 / static_cast<double>(batch->samples.size());
      LossBreakdown mean;
      std::vector<std::string> ids;
      for (const auto& s : batch->samples) ids.push_back(s.id);
      for (const auto& s : batch->samples) {
        LossBreakdown l;
        try {
          l = supervised_step(model, s, config.coord_weight, scale, {});
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " at " +
                             batch_locator(epoch, batch->index, ids));
        }
        if (!finite(l)) {
          throw NumericError("non-finite loss at " + batch_locator(epoch, batch->index, ids));
        }
        accumulate(mean, l, scale);
      }
      optimizer.step();
      model.priors().clamp();

      const StepRecord record{step++, epoch, mean};
      result.log.push_back(record);
      if (on_step) on_step(record);
      epoch_total += mean.total;
      ++epoch_batches;
    }
    if (epoch_batches == 0) throw DataError("every batch of epoch " + std::to_string(epoch) + " failed to load");
    result.epoch_loss.push_back(epoch_total / static_cast<double>(epoch_batches));

    double score = result.epoch_loss.back();
    if (validation && validation->size() > 0) {
      score = evaluate_loss(model, *validation, config.coord_weight);
      result.validation_loss.push_back(score);
    }
    if (score < best || epoch == 0) {
      best = score;
      result.best_epoch = epoch;
      json meta;
      meta["epoch"] = epoch;
      meta["seed"] = config.seed;
      meta["train_config"] = config.to_json();
      meta["selection_loss"] = score;
      result.checkpoint = snapshot(model, meta);
    }
  }
  return result;
}

// ---------------------------------------------------------------- adaptation

MixedBatchSampler::MixedBatchSampler(std::size_t natural_size, std::size_t target_size,
                                     int batch_size, std::uint64_t seed)
    : natural_size_(natural_size), target_size_(target_size), seed_(seed) {
  if (natural_size == 0 || target_size == 0) {
    throw DataError("adaptation needs non-empty natural and target corpora");
  }
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  natural_per_batch_ = std::max(1, batch_size / 2);
  target_per_batch_ = std::max(1, batch_size - natural_per_batch_);
}

std::size_t MixedBatchSampler::batches_per_epoch() const {
  const auto n = static_cast<std::size_t>(natural_per_batch_);
  return (natural_size_ + n - 1) / n;
}

std::vector<MixedBatchSampler::Draw> MixedBatchSampler::epoch(int epoch_index) {
  const auto natural_order = shuffled_indices(natural_size_, epoch_seed(seed_, epoch_index));
  std::vector<Draw> draws;
  for (std::size_t start = 0; start < natural_order.size();
       start += static_cast<std::size_t>(natural_per_batch_)) {
    Draw d;
    const std::size_t end =
        std::min(natural_order.size(), start + static_cast<std::size_t>(natural_per_batch_));
    d.natural.assign(natural_order.begin() + static_cast<std::ptrdiff_t>(start),
                     natural_order.begin() + static_cast<std::ptrdiff_t>(end));
    for (int t = 0; t < target_per_batch_; ++t) {
      if (target_cursor_ == target_order_.size()) {
        target_order_ =
            shuffled_indices(target_size_, epoch_seed(~seed_, target_pass_++));
        target_cursor_ = 0;
      }
      d.target.push_back(target_order_[target_cursor_++]);
    }
    draws.push_back(std::move(d));
  }
  return draws;
}

TrainResult adapt(ScanpathModel& model, const SampleSource& labeled_natural,
                  const SampleSource& unlabeled_target, const TrainConfig& config,
                  const GrlConfig& grl, const StepCallback& on_step) {
  config.validate();
  grl.validate();
  check_non_empty(labeled_natural, "natural");
  check_non_empty(unlabeled_target, "target");

  MixedBatchSampler sampler(labeled_natural.size(), unlabeled_target.size(), config.batch_size,
                            config.seed);
  Adam optimizer(model.parameters(), {.learning_rate = config.learning_rate});
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_total = 0.0;
    std::size_t epoch_batches = 0;
    const auto draws = sampler.epoch(epoch);
    for (std::size_t b = 0; b < draws.size(); ++b) {
      const auto& draw = draws[b];
      std::vector<Sample> natural;
      std::vector<Sample> target;
      std::vector<std::string> ids;
      try {
        for (std::size_t i : draw.natural) natural.push_back(labeled_natural.load(i));
        for (std::size_t i : draw.target) target.push_back(unlabeled_target.load(i));
      } catch (const DataError& e) {
        fmt::print(stderr, "warning: skipping adaptation batch {}: {}\n", b, e.what());
        continue;
      }
      for (const auto& s : natural) ids.push_back(s.id);
      for (const auto& s : target) ids.push_back(s.id);

      const double lambda = grl.lambda_at(step);
      const double sup_scale = 1.0 / static_cast<double>(natural.size());
      const double dom_scale = 1.0 / static_cast<double>(natural.size() + target.size());
      model.zero_grad();
      LossBreakdown mean;
      double domain_sum = 0.0;

      // Domain branch on a feature volume; returns the reversed gradient or
      // an empty tensor when lambda is zero.
      auto domain_branch = [&](const Tensor& features, DomainLabel label) {
        DomainTrace dt;
        const double prob = model.domain().forward(features, &dt);
        double g = 0.0;
        domain_sum += domain_bce(prob, label, &g);
        Tensor reversed = model.domain().backward(dt, g * dom_scale, lambda);
        return lambda == 0.0 ? Tensor() : reversed;
      };

      for (const auto& s : natural) {
        LossBreakdown l;
        try {
          l = supervised_step(
              model, s, config.coord_weight, sup_scale,
              [&](const Tensor& f) { return domain_branch(f, DomainLabel::kNatural); });
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " at " + batch_locator(epoch, b, ids));
        }
        if (!finite(l)) {
          throw NumericError("non-finite loss at " + batch_locator(epoch, b, ids));
        }
        accumulate(mean, l, sup_scale);
      }
      for (const auto& s : target) {
        BackboneTrace bt;
        const Tensor features = model.backbone().forward(s.image, &bt);
        const Tensor reversed = domain_branch(features, DomainLabel::kPainting);
        if (!reversed.empty()) model.backbone().backward(bt, reversed);
      }
      mean.domain = domain_sum * dom_scale;
      mean.total += mean.domain;
      if (!finite(mean)) throw NumericError("non-finite loss at " + batch_locator(epoch, b, ids));

      optimizer.step();
      model.priors().clamp();

      const StepRecord record{step++, epoch, mean};
      result.log.push_back(record);
      if (on_step) on_step(record);
      epoch_total += mean.total;
      ++epoch_batches;
    }
    if (epoch_batches == 0) throw DataError("every batch of epoch " + std::to_string(epoch) + " failed to load");
    result.epoch_loss.push_back(epoch_total / static_cast<double>(epoch_batches));
    const double score = result.epoch_loss.back();
    if (score < best || epoch == 0) {
      best = score;
      result.best_epoch = epoch;
      json meta;
      meta["epoch"] = epoch;
      meta["seed"] = config.seed;
      meta["train_config"] = config.to_json();
      meta["grl"] = {{"lambda", grl.lambda},
                     {"schedule", to_string(grl.schedule)},
                     {"ramp_steps", grl.ramp_steps}};
      meta["selection_loss"] = score;
      result.checkpoint = snapshot(model, meta);
    }
  }
  return result;
}

double domain_accuracy(const ScanpathModel& model, const SampleSource& natural,
                       const SampleSource& target) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < natural.size(); ++i) {
    const Tensor f = model.backbone().forward(natural.load(i).image);
    if (classify_domain(f, model.domain()) < 0.5) ++correct;
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    const Tensor f = model.backbone().forward(target.load(i).image);
    if (classify_domain(f, model.domain()) >= 0.5) ++correct;
  }
  const std::size_t total = natural.size() + target.size();
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace spf
