#ifndef SPF_TRAINING_HPP_
#define SPF_TRAINING_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spf/adaptation.hpp"
#include "spf/data.hpp"
#include "spf/model.hpp"

namespace spf {

// ---------------------------------------------------------------- loss

inline constexpr double kLengthWeight = 0.001;
inline constexpr double kBceEpsilon = 1e-7;

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double length = 0.0;  // sqrt(|len(pred)^2 - len(gt)^2|), unweighted
  double coord = 0.0;
  double domain = 0.0;
};

// Ground-truth scanpath reduced to at most kNumCandidates fixations.
Scanpath truncate_scanpath(const Scanpath& gt);

// Target mask for v: ones on the first min(len(gt), 20) channels.
std::array<double, kNumCandidates> length_target(std::size_t gt_length);

/**
 * Scanpath loss for one sample:
 *   bce    mean binary cross-entropy of v (clipped to [eps, 1-eps]) against
 *          length_target(len(gt))
 *   length sqrt(|predicted_length^2 - len(gt)^2|)
 *   coord  mean squared error between coords[k] and gt[k] over both axes,
 *          k < min(len(gt), 20)
 *   total  bce + 0.001 * length + coord_weight * coord
 * When grad is non-null, writes dtotal/dv and dtotal/dcoords into it (the
 * length term is piecewise constant and contributes no gradient).
 * Throws DataError for an empty ground truth.
 */
LossBreakdown scanpath_loss(std::span<const double, kNumCandidates> v,
                            std::span<const Point, kNumCandidates> coords, int predicted_length,
                            const Scanpath& gt, double coord_weight, OutputGrad* grad = nullptr);

LossBreakdown scanpath_loss(const ModelOutput& output, const Scanpath& gt, double coord_weight,
                            OutputGrad* grad = nullptr);

// ---------------------------------------------------------------- optimizer

struct AdamOptions {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive moment estimation without weight decay.
class Adam {
 public:
  Adam(nn::ParameterList params, const AdamOptions& options);

  void step();
  long steps() const { return steps_; }

 private:
  nn::ParameterList params_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long steps_ = 0;
};

// ---------------------------------------------------------------- checkpoint

inline constexpr const char* kCheckpointFormat = "spf-ckpt-1";

/**
 * Named arrays plus a metadata document. On disk:
 *
 *   spf-ckpt-1\n
 *   <header byte count>\n
 *   <header JSON: {"metadata": {...}, "arrays": [{name, shape, offset}]}>
 *   <array payloads, little-endian float64, in header order>
 */
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Tensor> arrays;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
// Throws FormatError on a bad magic/version or truncated payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Architecture description stored under metadata["model"].
nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

// Captures every parameter plus "sam/beta" and the model config.
Checkpoint snapshot(ScanpathModel& model, nlohmann::json metadata = nlohmann::json::object());
// Copies arrays into the model. With only_namespace set, restores just that
// namespace (e.g. "backbone" for pretrained weights); otherwise all
// parameters must be present. Throws FormatError on missing or misshapen
// arrays.
void restore(ScanpathModel& model, const Checkpoint& checkpoint,
             const std::string& only_namespace = {});
ScanpathModel model_from_checkpoint(const Checkpoint& checkpoint);

// ---------------------------------------------------------------- training

struct TrainConfig {
  double learning_rate = 5e-5;
  int epochs = 70;
  int batch_size = 8;
  std::uint64_t seed = 0;
  double coord_weight = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct StepRecord {
  long step = 0;
  int epoch = 0;
  LossBreakdown loss;
};

// "step, epoch, total, bce, length, coord, domain"
std::string format_log_line(const StepRecord& record);

using StepCallback = std::function<void(const StepRecord&)>;

struct TrainResult {
  Checkpoint checkpoint;   // best epoch (lowest validation loss, else training loss)
  std::vector<StepRecord> log;
  std::vector<double> epoch_loss;       // mean training total per epoch
  std::vector<double> validation_loss;  // empty without a validation source
  int best_epoch = 0;
};

// Per-epoch shuffling seed derived from the run seed.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch);

// Mean scanpath loss over a source, forward only.
double evaluate_loss(const ScanpathModel& model, const SampleSource& source, double coord_weight);

/// Minibatch Adam on the scanpath loss; the prior bank is clamped after
/// every step. Throws NumericError naming the batch on a non-finite loss.
TrainResult train(ScanpathModel& model, const SampleSource& train_set,
                  const SampleSource* validation, const TrainConfig& config,
                  const StepCallback& on_step = {});

// Half-natural, half-target index draws for one adaptation epoch.
class MixedBatchSampler {
 public:
  MixedBatchSampler(std::size_t natural_size, std::size_t target_size, int batch_size,
                    std::uint64_t seed);

  struct Draw {
    std::vector<std::size_t> natural;
    std::vector<std::size_t> target;
  };

  int natural_per_batch() const { return natural_per_batch_; }
  int target_per_batch() const { return target_per_batch_; }
  std::size_t batches_per_epoch() const;

  // Draws for one epoch; natural indices follow BatchIterator's epoch order,
  // target indices cycle through a reshuffled permutation.
  std::vector<Draw> epoch(int epoch_index);

 private:
  std::size_t natural_size_;
  std::size_t target_size_;
  int natural_per_batch_;
  int target_per_batch_;
  std::uint64_t seed_;
  std::vector<std::size_t> target_order_;
  std::size_t target_cursor_ = 0;
  int target_pass_ = 0;
};

/// Unsupervised adaptation: each step combines the scanpath loss on the
/// natural half with the domain loss on the whole batch, the latter reaching
/// the backbone through the gradient reversal layer.
TrainResult adapt(ScanpathModel& model, const SampleSource& labeled_natural,
                  const SampleSource& unlabeled_target, const TrainConfig& config,
                  const GrlConfig& grl, const StepCallback& on_step = {});

// Fraction of samples the domain head assigns to the right corpus.
double domain_accuracy(const ScanpathModel& model, const SampleSource& natural,
                       const SampleSource& target);

}  // namespace spf

#endif  // SPF_TRAINING_HPP_
