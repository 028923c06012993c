#include "spf/cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "spf/data.hpp"
#include "spf/error.hpp"
#include "spf/image_io.hpp"
#include "spf/metrics.hpp"
#include "spf/render.hpp"
#include "spf/training.hpp"

namespace spf::cli {

using nlohmann::json;

namespace {

struct RunFlags {
  std::string manifest;
  std::string val_manifest;
  std::string natural_manifest;
  std::string target_manifest;
  std::string init_checkpoint;
  std::string out;
  std::string weights;
  double learning_rate = 5e-5;
  int epochs = 70;
  int batch_size = 8;
  std::uint64_t seed = 0;
  double coord_weight = 1.0;
  std::string backbone = "full";
  int height = 192;
  int width = 256;
  double beta = kDefaultBeta;
  double grl_lambda = 1.0;
  std::string grl_schedule = "constant";
  int grl_ramp_steps = 1000;
};

struct ConvertFlags {
  std::string kind;
  std::string src;
  std::string dst;
  std::string split = "train";
};

struct PredictFlags {
  std::string checkpoint;
  std::string input;
  std::string out;
};

struct EvaluateFlags {
  std::string predictions;
  std::string manifest;
  std::string report;
  double quantile = 0.9;
  bool simplify = false;
  double sigma_px = 0.0;
};

struct RenderFlags {
  std::string image;
  std::vector<std::string> scanpaths;
  std::string image_id;
  std::string out;
};

// Fills options that were not given on the command line from a flat
// key = value file. Keys may use '_' or '-'.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::ParseError& e) {
    throw ConfigError("malformed config file " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty()) {
      throw ConfigError("config file " + path + ": sections are not supported (key " +
                        item.fullname() + ")");
    }
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = cmd->get_option_no_throw("--" + name);
    if (!opt || name == "config") {
      throw ConfigError("config file " + path + ": unknown key '" + item.name + "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw ConfigError("config file " + path + ": key '" + item.name + "': " + e.what());
    }
  }
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kExitConfig;
    case ErrorKind::kData:
      return kExitData;
    case ErrorKind::kRuntime:
      return kExitRuntime;
  }
  return kExitRuntime;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--out", f.out, "Output directory (default: $SPF_OUT/<command>)");
  cmd->add_option("--learning-rate", f.learning_rate, "Adam learning rate");
  cmd->add_option("--epochs", f.epochs, "Number of epochs");
  cmd->add_option("--batch-size", f.batch_size, "Samples per optimizer step");
  cmd->add_option("--seed", f.seed, "Seed for initialization and shuffling");
  cmd->add_option("--coord-weight", f.coord_weight,
                  "Weight of the coordinate MSE term (0 disables it)");
  cmd->add_option("--backbone", f.backbone, "Backbone variant: full or tiny");
  cmd->add_option("--height", f.height, "Input height in pixels");
  cmd->add_option("--width", f.width, "Input width in pixels");
  cmd->add_option("--beta", f.beta, "Soft-argmax sharpness");
  cmd->add_option("--weights", f.weights, "Checkpoint holding pretrained backbone weights");
}

TrainConfig train_config(const RunFlags& f) {
  TrainConfig c;
  c.learning_rate = f.learning_rate;
  c.epochs = f.epochs;
  c.batch_size = f.batch_size;
  c.seed = f.seed;
  c.coord_weight = f.coord_weight;
  c.validate();
  return c;
}

ModelConfig model_config(const RunFlags& f) {
  ModelConfig m;
  m.backbone.variant = parse_backbone_variant(f.backbone);
  m.beta = f.beta;
  if (!(f.beta > 0.0)) throw ConfigError("beta must be positive");
  const int stride = m.backbone.variant == BackboneVariant::kFull ? 32 : 8;
  if (f.height < 32 || f.width < 32 || f.height % 32 || f.width % 32 ||
      f.height / stride < kMinFeatureExtent || f.width / stride < kMinFeatureExtent) {
    throw ConfigError(fmt::format("resolution {}x{} is invalid for the {} backbone", f.height,
                                  f.width, f.backbone));
  }
  return m;
}

std::filesystem::path output_dir(const std::string& flag, const char* command) {
  return flag.empty() ? default_output_root() / command : std::filesystem::path(flag);
}

ScanpathModel build_model(const RunFlags& f) {
  ScanpathModel model(model_config(f));
  model.initialize(f.seed);
  if (!f.weights.empty()) restore(model, load_checkpoint(f.weights), "backbone");
  return model;
}

json run_metadata(const RunFlags& f) {
  return {{"resolution", {f.height, f.width}}, {"weights", f.weights}};
}

class LossLogWriter {
 public:
  explicit LossLogWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw DataError("cannot write loss log " + path.string());
  }
  void operator()(const StepRecord& r) { out_ << format_log_line(r) << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json summary_json(const TrainResult& r) {
  return {{"best_epoch", r.best_epoch},
          {"epoch_loss", r.epoch_loss},
          {"validation_loss", r.validation_loss},
          {"steps", r.log.size()}};
}

CommandResult finish_run(TrainResult& result, const RunFlags& f, const std::filesystem::path& dir,
                         json extra) {
  const json meta = run_metadata(f);
  for (const auto& [k, v] : meta.items()) result.checkpoint.metadata[k] = v;
  for (auto& [k, v] : extra.items()) result.checkpoint.metadata[k] = v;
  save_checkpoint(result.checkpoint, dir / "checkpoint.spfc");
  write_json(summary_json(result), dir / "summary.json");
  CommandResult r;
  r.report_path = dir / "checkpoint.spfc";
  r.message = fmt::format("best epoch {}, checkpoint {}", result.best_epoch,
                          r.report_path->string());
  return r;
}

CommandResult cmd_train(const RunFlags& f) {
  const TrainConfig config = train_config(f);
  ScanpathModel model = build_model(f);
  if (f.manifest.empty()) throw ConfigError("--manifest is required");
  ManifestSource train_set(load_manifest(f.manifest), f.height, f.width, true);
  std::optional<ManifestSource> val;
  if (!f.val_manifest.empty()) val.emplace(load_manifest(f.val_manifest), f.height, f.width, true);

  const auto dir = output_dir(f.out, "train");
  std::filesystem::create_directories(dir);
  LossLogWriter log(dir / "loss_log.txt");
  TrainResult result =
      train(model, train_set, val ? &*val : nullptr, config, [&](const StepRecord& r) { log(r); });
  return finish_run(result, f, dir, json::object());
}

CommandResult cmd_adapt(const RunFlags& f) {
  const TrainConfig config = train_config(f);
  GrlConfig grl;
  grl.lambda = f.grl_lambda;
  grl.schedule = parse_grl_schedule(f.grl_schedule);
  grl.ramp_steps = f.grl_ramp_steps;
  grl.validate();
  ScanpathModel model = build_model(f);
  if (!f.init_checkpoint.empty()) {
    const Checkpoint init = load_checkpoint(f.init_checkpoint);
    if (init.metadata.contains("model") &&
        model_config_from_json(init.metadata.at("model")).backbone.variant !=
            model.config().backbone.variant) {
      throw ConfigError("--init-checkpoint backbone differs from --backbone");
    }
    restore(model, init);
  }
  if (f.natural_manifest.empty() || f.target_manifest.empty()) {
    throw ConfigError("--natural-manifest and --target-manifest are required");
  }
  ManifestSource natural(load_manifest(f.natural_manifest), f.height, f.width, true);
  ManifestSource target(load_manifest(f.target_manifest), f.height, f.width, false);

  const auto dir = output_dir(f.out, "adapt");
  std::filesystem::create_directories(dir);
  LossLogWriter log(dir / "loss_log.txt");
  TrainResult result = adapt(model, natural, target, config, grl, [&](const StepRecord& r) { log(r); });
  return finish_run(result, f, dir, {{"init_checkpoint", f.init_checkpoint}});
}

CommandResult cmd_convert(const ConvertFlags& f) {
  const DatasetManifest m = convert_raw(parse_source_kind(f.kind), f.src, f.dst, parse_split(f.split));
  CommandResult r;
  r.report_path = std::filesystem::path(f.dst) / (f.split + "_manifest.json");
  r.message = fmt::format("{} images, {} scanpaths, {} dropped", m.entries.size(),
                          m.record_count(), m.dropped_records);
  return r;
}

CommandResult cmd_predict(const PredictFlags& f) {
  const Checkpoint ck = load_checkpoint(f.checkpoint);
  const ScanpathModel model = model_from_checkpoint(ck);
  int height = 192;
  int width = 256;
  if (ck.metadata.contains("resolution")) {
    height = ck.metadata.at("resolution").at(0).get<int>();
    width = ck.metadata.at("resolution").at(1).get<int>();
  }

  std::vector<std::pair<std::string, std::filesystem::path>> images;
  const std::filesystem::path input(f.input);
  if (input.extension() == ".json") {
    const DatasetManifest m = load_manifest(input);
    for (const auto& e : m.entries) images.emplace_back(e.image_id, m.resolve(e.image));
  } else {
    if (!std::filesystem::exists(input)) throw DataError("input not found: " + f.input);
    images.emplace_back(input.stem().string(), input);
  }

  std::vector<ScanpathRecord> records;
  for (const auto& [id, path] : images) {
    ScanpathRecord r;
    r.image_id = id;
    r.observer_id = "model";
    std::tie(r.source_height, r.source_width) = image_extent(path);
    r.points = model.predict(load_image(path, height, width));
    records.push_back(std::move(r));
  }
  const std::filesystem::path out(f.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  write_scanpath_file(records, out);
  CommandResult r;
  r.report_path = out;
  r.message = fmt::format("{} scanpath(s) written to {}", records.size(), f.out);
  return r;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

CommandResult cmd_evaluate(const EvaluateFlags& f) {
  if (!(f.quantile >= 0.0 && f.quantile <= 1.0)) throw ConfigError("--quantile must lie in [0,1]");
  if (f.sigma_px < 0.0) throw ConfigError("--sigma-px must be nonnegative");
  const auto predictions = read_scanpath_file(f.predictions);
  if (predictions.empty()) throw DataError("prediction file " + f.predictions + " is empty");
  const DatasetManifest gt = load_manifest(f.manifest);

  std::map<std::string, const ScanpathRecord*> by_image;
  for (const auto& p : predictions) by_image.try_emplace(p.image_id, &p);

  MultiMatchOptions mm_options;
  mm_options.simplify = f.simplify;

  json per_image = json::array();
  std::vector<double> shape, direction, length, position, mm, nss_values, congruency_values;
  std::size_t missing = 0;
  std::size_t fallback_maps = 0;
  for (const auto& entry : gt.entries) {
    const auto it = by_image.find(entry.image_id);
    if (it == by_image.end()) {
      ++missing;
      continue;
    }
    const Scanpath& pred = it->second->points;
    json row;
    row["image_id"] = entry.image_id;
    row["prediction_length"] = pred.size();

    MultiMatchScores sum;
    std::size_t compared = 0;
    if (pred.size() >= 2) {
      for (const auto& obs : entry.scanpaths) {
        if (obs.points.size() < 2) continue;
        const auto s = multimatch(pred, obs.points, mm_options);
        sum.shape += s.shape;
        sum.direction += s.direction;
        sum.length += s.length;
        sum.position += s.position;
        ++compared;
      }
    }
    row["observers_compared"] = compared;
    if (compared > 0) {
      const double n = static_cast<double>(compared);
      const MultiMatchScores avg{sum.shape / n, sum.direction / n, sum.length / n,
                                 sum.position / n};
      row["multimatch"] = {{"shape", avg.shape},
                           {"direction", avg.direction},
                           {"length", avg.length},
                           {"position", avg.position},
                           {"mm_score", avg.mean()}};
      shape.push_back(avg.shape);
      direction.push_back(avg.direction);
      length.push_back(avg.length);
      position.push_back(avg.position);
      mm.push_back(avg.mean());
    } else {
      row["multimatch"] = nullptr;
    }

    std::optional<SaliencyMap> saliency;
    double sigma = f.sigma_px;
    if (entry.saliency) {
      saliency.emplace(load_grayscale(gt.resolve(*entry.saliency)));
      row["saliency_source"] = "map";
    } else if (!entry.scanpaths.empty()) {
      std::vector<Scanpath> fixations;
      for (const auto& obs : entry.scanpaths) fixations.push_back(obs.points);
      const int h = entry.scanpaths.front().source_height;
      const int w = entry.scanpaths.front().source_width;
      if (sigma == 0.0) sigma = default_sigma_px(h);
      saliency.emplace(fixations_to_saliency(fixations, h, w, sigma));
      row["saliency_source"] = "observer_fixations";
      row["sigma_px"] = sigma;
      ++fallback_maps;
    }
    if (saliency) {
      bool degenerate = false;
      const double n = nss(pred, *saliency, &degenerate);
      const double c = congruency(pred, *saliency, f.quantile);
      row["nss"] = n;
      row["nss_degenerate"] = degenerate;
      row["congruency"] = c;
      nss_values.push_back(n);
      congruency_values.push_back(c);
    } else {
      row["nss"] = nullptr;
      row["congruency"] = nullptr;
      row["saliency_source"] = nullptr;
    }
    per_image.push_back(std::move(row));
  }
  if (per_image.empty()) {
    throw DataError("no prediction matches an image of " + f.manifest);
  }

  json report;
  report["configuration"] = {
      {"congruency_quantile", f.quantile},
      {"multimatch_simplification", f.simplify},
      {"multimatch_direction_threshold_deg", mm_options.direction_threshold_deg},
      {"multimatch_amplitude_threshold", mm_options.amplitude_threshold},
      {"multimatch_dimensions", {"shape", "direction", "length", "position"}},
      {"sigma_px", f.sigma_px == 0.0 ? json("height/36") : json(f.sigma_px)},
      {"nss_lookup", "nearest_pixel"}};
  report["inputs"] = {{"predictions", f.predictions}, {"manifest", f.manifest}};
  report["per_image"] = std::move(per_image);
  report["means"] = {{"shape", mean_of(shape)},
                     {"direction", mean_of(direction)},
                     {"length", mean_of(length)},
                     {"position", mean_of(position)},
                     {"mm_score", mean_of(mm)},
                     {"nss", mean_of(nss_values)},
                     {"congruency", mean_of(congruency_values)}};
  report["counts"] = {{"images_evaluated", report["per_image"].size()},
                      {"images_without_prediction", missing},
                      {"multimatch_images", mm.size()},
                      {"saliency_from_fixations", fallback_maps}};
  if (fallback_maps > 0) {
    report["notes"] = {
        "saliency maps absent for some images; NSS and congruency for those use observer "
        "fixations smoothed with a Gaussian"};
  }

  const std::filesystem::path out(f.report);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  write_json(report, out);
  CommandResult r;
  r.report_path = out;
  r.message = fmt::format("evaluated {} image(s); report {}", report["per_image"].size(), f.report);
  return r;
}

CommandResult cmd_render(const RenderFlags& f) {
  std::vector<LabeledScanpath> paths;
  for (const auto& file : f.scanpaths) {
    for (auto& r : read_scanpath_file(file)) {
      if (!f.image_id.empty() && r.image_id != f.image_id) continue;
      paths.push_back({r.observer_id, std::move(r.points)});
    }
  }
  if (paths.empty()) throw DataError("no scanpaths to render");
  const std::filesystem::path out(f.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  const RenderSummary s = render_scanpaths(f.image, paths, out);
  CommandResult r;
  r.report_path = out;
  r.message = fmt::format("{} marker(s) over {} scanpath(s)", s.markers, paths.size());
  return r;
}

}  // namespace

std::filesystem::path default_output_root() {
  const char* env = std::getenv("SPF_OUT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("spf_out");
}

CommandResult run(const std::vector<std::string>& args) {
  CLI::App app{"Scanpath prediction toolkit", "spf"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  ConvertFlags convert;
  auto* convert_cmd = app.add_subcommand("convert", "Convert a raw dataset layout to a manifest");
  convert_cmd->add_option("--kind", convert.kind, "salicon, mit1003 or folder")->required();
  convert_cmd->add_option("--src", convert.src, "Raw dataset directory")->required();
  convert_cmd->add_option("--dst", convert.dst, "Output directory for the manifest")->required();
  convert_cmd->add_option("--split", convert.split, "train, val or test");

  RunFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Supervised scanpath training");
  std::string train_config_file;
  train_cmd->add_option("--config", train_config_file,
                        "Flat key = value file; command-line flags override it");
  train_cmd->add_option("--manifest", train_flags.manifest, "Training manifest");
  train_cmd->add_option("--val-manifest", train_flags.val_manifest, "Validation manifest");
  add_run_flags(train_cmd, train_flags);

  RunFlags adapt_flags;
  auto* adapt_cmd = app.add_subcommand("adapt", "Unsupervised domain adaptation");
  std::string adapt_config_file;
  adapt_cmd->add_option("--config", adapt_config_file,
                        "Flat key = value file; command-line flags override it");
  adapt_cmd->add_option("--natural-manifest", adapt_flags.natural_manifest,
                        "Labeled natural-image manifest");
  adapt_cmd->add_option("--target-manifest", adapt_flags.target_manifest,
                        "Unlabeled target-domain manifest");
  adapt_cmd->add_option("--init-checkpoint", adapt_flags.init_checkpoint,
                        "Start from a trained checkpoint");
  adapt_cmd->add_option("--grl-lambda", adapt_flags.grl_lambda, "Gradient reversal multiplier");
  adapt_cmd->add_option("--grl-schedule", adapt_flags.grl_schedule, "constant or ramp");
  adapt_cmd->add_option("--grl-ramp-steps", adapt_flags.grl_ramp_steps,
                        "Steps of the lambda ramp");
  add_run_flags(adapt_cmd, adapt_flags);

  PredictFlags predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict scanpaths for images");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "Model checkpoint")->required();
  predict_cmd->add_option("--input", predict.input, "Image file or manifest (.json)")->required();
  predict_cmd->add_option("--out", predict.out, "Output scanpath file")->required();

  EvaluateFlags evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evaluate_cmd->add_option("--predictions", evaluate.predictions, "Predicted scanpath file")
      ->required();
  evaluate_cmd->add_option("--manifest", evaluate.manifest, "Ground-truth manifest")->required();
  evaluate_cmd->add_option("--report", evaluate.report, "Output report (JSON)")->required();
  evaluate_cmd->add_option("--quantile", evaluate.quantile, "Congruency salient-region quantile");
  evaluate_cmd->add_flag("--simplify", evaluate.simplify, "Simplify scanpaths before MultiMatch");
  evaluate_cmd->add_option("--sigma-px", evaluate.sigma_px,
                           "Fixation smoothing sigma in pixels (0: height/36)");

  RenderFlags render;
  auto* render_cmd = app.add_subcommand("render", "Draw scanpaths over an image");
  render_cmd->add_option("--image", render.image, "Stimulus image")->required();
  render_cmd->add_option("--scanpaths", render.scanpaths, "Scanpath files")->required()->default_str("");
  render_cmd->add_option("--image-id", render.image_id, "Only draw records of this image");
  render_cmd->add_option("--out", render.out, "Output image")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return {app.exit(e), std::nullopt, ""};
  } catch (const CLI::CallForAllHelp& e) {
    return {app.exit(e), std::nullopt, ""};
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return {kExitConfig, std::nullopt, e.what()};
  }

  try {
    if (*train_cmd && !train_config_file.empty()) apply_config_file(train_cmd, train_config_file);
    if (*adapt_cmd && !adapt_config_file.empty()) apply_config_file(adapt_cmd, adapt_config_file);
    CommandResult result;
    if (*convert_cmd) result = cmd_convert(convert);
    if (*train_cmd) result = cmd_train(train_flags);
    if (*adapt_cmd) result = cmd_adapt(adapt_flags);
    if (*predict_cmd) result = cmd_predict(predict);
    if (*evaluate_cmd) result = cmd_evaluate(evaluate);
    if (*render_cmd) result = cmd_render(render);
    if (!result.message.empty()) std::cout << result.message << '\n';
    return result;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return {exit_code_for(e.kind()), std::nullopt, e.what()};
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return {kExitData, std::nullopt, e.what()};
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return {kExitRuntime, std::nullopt, e.what()};
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args).exit_code;
}

}  // namespace spf::cli
