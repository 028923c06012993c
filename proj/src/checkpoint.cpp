#include <bit>
#include <cstring>
#include <fstream>

#include "spf/error.hpp"
#include "spf/training.hpp"

namespace spf {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are stored little-endian");

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  json header;
  header["metadata"] = checkpoint.metadata;
  json arrays = json::array();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : checkpoint.arrays) {
    arrays.push_back({{"name", name}, {"shape", tensor.shape()}, {"offset", offset}});
    offset += tensor.numel() * sizeof(double);
  }
  header["arrays"] = std::move(arrays);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << kCheckpointFormat << '\n' << text.size() << '\n' << text;
  for (const auto& [name, tensor] : checkpoint.arrays) {
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.numel() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointFormat) {
    const std::string shown = magic.size() > 32 ? magic.substr(0, 32) + "..." : magic;
    throw FormatError("checkpoint " + path.string() + ": format version mismatch (expected " +
                      kCheckpointFormat + ", found '" + shown + "')");
  }
  std::string size_line;
  std::getline(in, size_line);
  std::size_t header_size = 0;
  try {
    header_size = std::stoul(size_line);
  } catch (const std::exception&) {
    throw FormatError("checkpoint " + path.string() + ": malformed header length");
  }
  std::string text(header_size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw FormatError("checkpoint " + path.string() + ": truncated header");

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    ck.metadata = header.at("metadata");
    const auto payload_start = in.tellg();
    for (const auto& a : header.at("arrays")) {
      Tensor t(a.at("shape").get<Shape>());
      in.seekg(payload_start + static_cast<std::streamoff>(a.at("offset").get<std::size_t>()));
      in.read(reinterpret_cast<char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
      if (!in) throw FormatError("checkpoint " + path.string() + ": truncated array payload");
      ck.arrays.emplace(a.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": malformed header: " + e.what());
  }
  return ck;
}

json model_config_to_json(const ModelConfig& config) {
  const auto norm = config.backbone.normalization.value_or(
      config.backbone.variant == BackboneVariant::kFull ? ChannelNormalization::imagenet()
                                                        : ChannelNormalization::identity());
  return {{"backbone", to_string(config.backbone.variant)},
          {"beta", config.beta},
          {"norm_mean", norm.mean},
          {"norm_std", norm.std}};
}

ModelConfig model_config_from_json(const json& doc) {
  try {
    ModelConfig config;
    config.backbone.variant = parse_backbone_variant(doc.at("backbone").get<std::string>());
    config.beta = doc.at("beta").get<double>();
    ChannelNormalization norm;
    norm.mean = doc.at("norm_mean").get<std::array<double, 3>>();
    norm.std = doc.at("norm_std").get<std::array<double, 3>>();
    config.backbone.normalization = norm;
    return config;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model description: ") + e.what());
  }
}

Checkpoint snapshot(ScanpathModel& model, json metadata) {
  Checkpoint ck;
  ck.metadata = std::move(metadata);
  ck.metadata["format"] = kCheckpointFormat;
  ck.metadata["model"] = model_config_to_json(model.config());
  for (const auto& p : model.parameters()) ck.arrays.emplace(p.name, p.param->value);
  ck.arrays.emplace("sam/beta", Tensor({1}, {model.beta()}));
  return ck;
}

void restore(ScanpathModel& model, const Checkpoint& checkpoint,
             const std::string& only_namespace) {
  const std::string prefix = only_namespace.empty() ? "" : only_namespace + "/";
  std::size_t restored = 0;
  for (auto& p : model.parameters()) {
    if (!p.name.starts_with(prefix)) continue;
    const auto it = checkpoint.arrays.find(p.name);
    if (it == checkpoint.arrays.end()) {
      throw FormatError("checkpoint is missing array " + p.name);
    }
    if (it->second.shape() != p.param->value.shape()) {
      throw FormatError("checkpoint array " + p.name + " has shape " +
                        shape_string(it->second.shape()) + ", model expects " +
                        shape_string(p.param->value.shape()));
    }
    p.param->value = it->second;
    ++restored;
  }
  if (restored == 0) throw FormatError("checkpoint holds no arrays under '" + prefix + "'");
}

ScanpathModel model_from_checkpoint(const Checkpoint& checkpoint) {
  if (!checkpoint.metadata.contains("model")) {
    throw FormatError("checkpoint metadata lacks a model description");
  }
  ScanpathModel model(model_config_from_json(checkpoint.metadata.at("model")));
  restore(model, checkpoint);
  return model;
}

}  // namespace spf
