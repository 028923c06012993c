#include "spf/data.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spf/error.hpp"
#include "spf/image_io.hpp"

namespace spf {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line, char sep = ',') {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(trim(field));
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const std::string& locator) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(locator + ": malformed number '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& text, const std::string& locator) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(locator + ": malformed integer '" + text + "'");
  }
  return value;
}

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

fs::path relative_to(const fs::path& target, const fs::path& base) {
  return fs::relative(fs::absolute(target), fs::absolute(base));
}

void check_record_bounds(const ScanpathRecord& r, const std::string& locator) {
  if (r.source_height <= 0 || r.source_width <= 0) {
    throw DataError(locator + ": image_id=" + r.image_id + " observer_id=" + r.observer_id +
                    ": source resolution must be positive");
  }
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    for (const auto& [axis, v] : {std::pair{"x", p.x}, std::pair{"y", p.y}}) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError(fmt::format("{}: image_id={} observer_id={}: fixation {} has {} = {} "
                                    "outside [0,1]",
                                    locator, r.image_id, r.observer_id, i, axis, v));
      }
    }
  }
}

fs::path manifest_path(const fs::path& dst, Split split) {
  return dst / (to_string(split) + "_manifest.json");
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split '" + name + "'");
}

SourceKind parse_source_kind(const std::string& name) {
  if (name == "salicon") return SourceKind::kSalicon;
  if (name == "mit1003") return SourceKind::kMit1003;
  if (name == "folder") return SourceKind::kFolder;
  throw ConfigError("unknown source kind '" + name + "' (expected salicon, mit1003 or folder)");
}

std::size_t DatasetManifest::record_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.scanpaths.size();
  return n;
}

const ManifestEntry* DatasetManifest::find(const std::string& image_id) const {
  for (const auto& e : entries) {
    if (e.image_id == image_id) return &e;
  }
  return nullptr;
}

// ---------------------------------------------------------------- text format

std::string format_scanpath_record(const ScanpathRecord& record) {
  std::string line = fmt::format("{}, {}, {}, {}", record.image_id, record.observer_id,
                                 record.source_height, record.source_width);
  for (const auto& p : record.points) line += fmt::format(", {}, {}", p.x, p.y);
  return line;
}

ScanpathRecord parse_scanpath_record(const std::string& line, const std::string& locator) {
  const auto fields = split_fields(line);
  if (fields.size() < 4) {
    throw DataError(locator + ": expected image_id, observer_id, H, W, x1, y1, ...");
  }
  if ((fields.size() - 4) % 2 != 0) {
    throw DataError(locator + ": odd number of coordinates");
  }
  ScanpathRecord r;
  r.image_id = fields[0];
  r.observer_id = fields[1];
  if (r.image_id.empty() || r.observer_id.empty()) {
    throw DataError(locator + ": empty image_id or observer_id");
  }
  r.source_height = parse_int(fields[2], locator);
  r.source_width = parse_int(fields[3], locator);
  for (std::size_t i = 4; i < fields.size(); i += 2) {
    r.points.push_back({parse_double(fields[i], locator), parse_double(fields[i + 1], locator)});
  }
  check_record_bounds(r, locator);
  return r;
}

std::vector<ScanpathRecord> read_scanpath_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open scanpath file " + file.string());
  std::vector<ScanpathRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    records.push_back(parse_scanpath_record(t, file.string() + ":" + std::to_string(line_no)));
  }
  return records;
}

void write_scanpath_file(const std::vector<ScanpathRecord>& records, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write scanpath file " + file.string());
  for (const auto& r : records) out << format_scanpath_record(r) << '\n';
}

// ---------------------------------------------------------------- manifest

DatasetManifest load_manifest(const fs::path& manifest_file) {
  if (!fs::exists(manifest_file)) {
    throw DataError("manifest not found: " + manifest_file.string());
  }
  const json doc = read_json(manifest_file);
  DatasetManifest m;
  m.root = manifest_file.parent_path();
  try {
    if (doc.value("format", std::string()) != kManifestFormat) {
      throw DataError(manifest_file.string() + ": expected format " + kManifestFormat);
    }
    m.split = parse_split(doc.value("split", std::string("train")));
    m.labeled = doc.contains("scanpaths");
    std::set<std::string> ids;
    for (const auto& e : doc.at("entries")) {
      ManifestEntry entry;
      entry.image_id = e.at("image_id").get<std::string>();
      entry.image = e.at("image").get<std::string>();
      if (e.contains("saliency")) entry.saliency = fs::path(e.at("saliency").get<std::string>());
      if (!ids.insert(entry.image_id).second) {
        throw DataError(manifest_file.string() + ": duplicate image_id " + entry.image_id);
      }
      if (!fs::exists(m.resolve(entry.image))) {
        throw DataError(manifest_file.string() + ": image_id=" + entry.image_id +
                        ": missing image file " + m.resolve(entry.image).string());
      }
      if (entry.saliency && !fs::exists(m.resolve(*entry.saliency))) {
        throw DataError(manifest_file.string() + ": image_id=" + entry.image_id +
                        ": missing saliency file " + m.resolve(*entry.saliency).string());
      }
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_file.string() + ": " + e.what());
  }

  if (m.labeled) {
    const fs::path scanpath_file = m.resolve(doc.at("scanpaths").get<std::string>());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < m.entries.size(); ++i) index[m.entries[i].image_id] = i;
    for (auto& r : read_scanpath_file(scanpath_file)) {
      const auto it = index.find(r.image_id);
      if (it == index.end()) {
        throw DataError(scanpath_file.string() + ": image_id=" + r.image_id + " observer_id=" +
                        r.observer_id + " is not listed in the manifest");
      }
      if (r.points.empty()) {
        ++m.dropped_records;
        continue;
      }
      m.entries[it->second].scanpaths.push_back(std::move(r));
    }
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& manifest_file) {
  json doc;
  doc["format"] = kManifestFormat;
  doc["split"] = to_string(manifest.split);
  const std::string stem = manifest_file.stem().string();
  const std::string scanpath_name =
      (stem.ends_with("_manifest") ? stem.substr(0, stem.size() - 9) : stem) + "_scanpaths.txt";
  if (manifest.labeled) doc["scanpaths"] = scanpath_name;
  json entries = json::array();
  std::vector<ScanpathRecord> records;
  for (const auto& e : manifest.entries) {
    json j;
    j["image_id"] = e.image_id;
    j["image"] = e.image.generic_string();
    if (e.saliency) j["saliency"] = e.saliency->generic_string();
    entries.push_back(std::move(j));
    records.insert(records.end(), e.scanpaths.begin(), e.scanpaths.end());
  }
  doc["entries"] = std::move(entries);
  if (!manifest_file.parent_path().empty()) fs::create_directories(manifest_file.parent_path());
  std::ofstream out(manifest_file);
  if (!out) throw DataError("cannot write manifest " + manifest_file.string());
  out << doc.dump(2) << '\n';
  if (manifest.labeled) write_scanpath_file(records, manifest_file.parent_path() / scanpath_name);
}

// ---------------------------------------------------------------- conversion

namespace {

DatasetManifest convert_salicon(const fs::path& src, const fs::path& dst, Split split) {
  const fs::path annotations = src / "fixations.json";
  if (!fs::exists(annotations) || !fs::is_directory(src / "images")) {
    throw DataError("unknown layout: salicon source needs fixations.json and images/ in " +
                    src.string());
  }
  const json doc = read_json(annotations);
  DatasetManifest m;
  m.root = dst;
  m.split = split;
  m.labeled = true;
  std::map<long long, std::size_t> by_id;
  std::map<long long, std::pair<int, int>> extent;
  try {
    for (const auto& img : doc.at("images")) {
      const auto id = img.at("id").get<long long>();
      const fs::path file = src / "images" / img.at("file_name").get<std::string>();
      if (!fs::exists(file)) throw DataError("unreadable file: " + file.string());
      ManifestEntry e;
      e.image_id = file.stem().string();
      e.image = relative_to(file, dst);
      by_id[id] = m.entries.size();
      extent[id] = {img.at("height").get<int>(), img.at("width").get<int>()};
      m.entries.push_back(std::move(e));
    }
    for (const auto& ann : doc.at("annotations")) {
      const auto id = ann.at("image_id").get<long long>();
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw DataError(annotations.string() + ": annotation for unknown image id " +
                        std::to_string(id));
      }
      auto& entry = m.entries[it->second];
      ScanpathRecord r;
      r.image_id = entry.image_id;
      const auto& worker = ann.at("worker_id");
      r.observer_id = worker.is_string() ? worker.get<std::string>() : worker.dump();
      std::tie(r.source_height, r.source_width) = extent[id];
      for (const auto& fix : ann.at("fixations")) {
        const double row = fix.at(0).get<double>();
        const double col = fix.at(1).get<double>();
        const Point p{col / r.source_width, row / r.source_height};
        if (p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0) r.points.push_back(p);
      }
      if (r.points.empty()) {
        ++m.dropped_records;
        continue;
      }
      entry.scanpaths.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed salicon annotations " + annotations.string() + ": " + e.what());
  }
  return m;
}

DatasetManifest convert_mit1003(const fs::path& src, const fs::path& dst, Split split) {
  const fs::path stimuli = src / "ALLSTIMULI";
  const fs::path table = src / "fixations.csv";
  if (!fs::is_directory(stimuli) || !fs::exists(table)) {
    throw DataError("unknown layout: mit1003 source needs ALLSTIMULI/ and fixations.csv in " +
                    src.string());
  }
  std::ifstream in(table);
  if (!in) throw DataError("unreadable file: " + table.string());
  DatasetManifest m;
  m.root = dst;
  m.split = split;
  m.labeled = true;

  std::map<std::string, std::size_t> entry_index;
  std::map<std::pair<std::string, std::string>, std::size_t> record_index;
  std::vector<ScanpathRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || (line_no == 1 && t.starts_with("image"))) continue;
    const std::string locator = table.string() + ":" + std::to_string(line_no);
    const auto f = split_fields(t);
    if (f.size() != 4) throw DataError(locator + ": expected image,observer,x,y");
    const fs::path file = stimuli / f[0];
    auto [it, inserted] = entry_index.try_emplace(f[0], m.entries.size());
    if (inserted) {
      if (!fs::exists(file)) throw DataError("unreadable file: " + file.string());
      ManifestEntry e;
      e.image_id = file.stem().string();
      e.image = relative_to(file, dst);
      m.entries.push_back(std::move(e));
    }
    auto [rit, new_record] = record_index.try_emplace({f[0], f[1]}, records.size());
    if (new_record) {
      ScanpathRecord r;
      r.image_id = m.entries[it->second].image_id;
      r.observer_id = f[1];
      std::tie(r.source_height, r.source_width) = image_extent(file);
      records.push_back(std::move(r));
    }
    auto& r = records[rit->second];
    const Point p{parse_double(f[2], locator) / r.source_width,
                  parse_double(f[3], locator) / r.source_height};
    if (p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0) r.points.push_back(p);
  }
  for (auto& r : records) {
    if (r.points.empty()) {
      ++m.dropped_records;
      continue;
    }
    const std::size_t e = std::find_if(m.entries.begin(), m.entries.end(),
                                       [&](const ManifestEntry& x) {
                                         return x.image_id == r.image_id;
                                       }) -
                          m.entries.begin();
    m.entries[e].scanpaths.push_back(std::move(r));
  }
  return m;
}

DatasetManifest convert_folder(const fs::path& src, const fs::path& dst, Split split) {
  if (!fs::is_directory(src)) throw DataError("unknown layout: " + src.string() + " is not a folder");
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(src)) {
    if (item.is_regular_file() && is_image_file(item.path())) files.push_back(item.path());
  }
  std::sort(files.begin(), files.end());
  DatasetManifest m;
  m.root = dst;
  m.split = split;
  m.labeled = false;
  for (const auto& f : files) {
    ManifestEntry e;
    e.image_id = f.stem().string();
    e.image = relative_to(f, dst);
    if (m.find(e.image_id)) e.image_id = f.filename().string();
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace

DatasetManifest convert_raw(SourceKind kind, const fs::path& src, const fs::path& dst,
                            Split split) {
  fs::create_directories(dst);
  DatasetManifest m;
  switch (kind) {
    case SourceKind::kSalicon:
      m = convert_salicon(src, dst, split);
      break;
    case SourceKind::kMit1003:
      m = convert_mit1003(src, dst, split);
      break;
    case SourceKind::kFolder:
      m = convert_folder(src, dst, split);
      break;
  }
  write_manifest(m, manifest_path(dst, split));
  return m;
}

// ---------------------------------------------------------------- sources

ManifestSource::ManifestSource(DatasetManifest manifest, int height, int width, bool labeled)
    : manifest_(std::move(manifest)), height_(height), width_(width) {
  for (std::size_t e = 0; e < manifest_.entries.size(); ++e) {
    const auto& entry = manifest_.entries[e];
    if (!labeled) {
      items_.push_back({e, std::nullopt});
      continue;
    }
    if (entry.scanpaths.empty()) {
      ++skipped_images_;
      continue;
    }
    for (std::size_t r = 0; r < entry.scanpaths.size(); ++r) items_.push_back({e, r});
  }
  if (skipped_images_ > 0) {
    std::cerr << "warning: " << skipped_images_
              << " image(s) without scanpaths excluded from supervised training\n";
  }
}

Sample ManifestSource::load(std::size_t index) const {
  const Item& item = items_.at(index);
  const auto& entry = manifest_.entries[item.entry];
  Sample s;
  s.id = describe(index);
  s.image = load_image(manifest_.resolve(entry.image), height_, width_);
  if (item.record) s.scanpath = entry.scanpaths[*item.record].points;
  return s;
}

std::string ManifestSource::describe(std::size_t index) const {
  const Item& item = items_.at(index);
  const auto& entry = manifest_.entries[item.entry];
  if (!item.record) return entry.image_id;
  return entry.image_id + "/" + entry.scanpaths[*item.record].observer_id;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

BatchIterator::BatchIterator(const SampleSource& source, int batch_size, std::uint64_t seed)
    : source_(&source) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  batch_size_ = static_cast<std::size_t>(batch_size);
  order_ = shuffled_indices(source.size(), seed);
}

std::size_t BatchIterator::batch_count() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

std::optional<Batch> BatchIterator::next() {
  while (cursor_ < order_.size()) {
    Batch batch;
    batch.index = emitted_++;
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    batch.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                         order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    try {
      for (std::size_t i : batch.indices) batch.samples.push_back(source_->load(i));
    } catch (const DataError& e) {
      std::cerr << "warning: skipping batch " << batch.index << ": " << e.what() << '\n';
      ++skipped_;
      continue;
    }
    return batch;
  }
  return std::nullopt;
}

}  // namespace spf
