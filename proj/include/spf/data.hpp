#ifndef SPF_DATA_HPP_
#define SPF_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spf/scanpath.hpp"
#include "spf/tensor.hpp"

namespace spf {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFormat = "spf-manifest-1";

// One observer's scanpath over one image. Points are normalized by the
// source resolution (x = column / width, y = row / height).
struct ScanpathRecord {
  std::string image_id;
  std::string observer_id;
  int source_height = 0;
  int source_width = 0;
  Scanpath points;

  friend bool operator==(const ScanpathRecord&, const ScanpathRecord&) = default;
};

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split split);
Split parse_split(const std::string& name);

struct ManifestEntry {
  std::string image_id;
  fs::path image;                     // relative to the manifest root
  std::optional<fs::path> saliency;   // 8-bit grayscale map, relative
  std::vector<ScanpathRecord> scanpaths;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/**
 * A split of a dataset on disk. The manifest document is JSON:
 *
 *   {"format": "spf-manifest-1", "split": "train",
 *    "scanpaths": "train_scanpaths.txt",          // absent when unlabeled
 *    "entries": [{"image_id": "...", "image": "images/a.jpg",
 *                 "saliency": "maps/a.png"}]}
 *
 * The scanpath file holds one record per line:
 *   image_id, observer_id, H, W, x1, y1, x2, y2, ...
 */
struct DatasetManifest {
  fs::path root;
  Split split = Split::kTrain;
  bool labeled = true;
  std::vector<ManifestEntry> entries;
  // Records without fixations dropped while loading.
  std::size_t dropped_records = 0;

  std::size_t record_count() const;
  fs::path resolve(const fs::path& relative) const { return root / relative; }
  const ManifestEntry* find(const std::string& image_id) const;
};

// Throws DataError on missing files, malformed records and out-of-range
// coordinates; messages carry the file and line or image/observer locator.
DatasetManifest load_manifest(const fs::path& manifest_file);
// Writes the manifest document and, for labeled manifests, its scanpath file
// next to it. Entry paths are written as stored (relative to root).
void write_manifest(const DatasetManifest& manifest, const fs::path& manifest_file);

std::vector<ScanpathRecord> read_scanpath_file(const fs::path& file);
void write_scanpath_file(const std::vector<ScanpathRecord>& records, const fs::path& file);
std::string format_scanpath_record(const ScanpathRecord& record);
// locator is used in error messages (e.g. "file.txt:12").
ScanpathRecord parse_scanpath_record(const std::string& line, const std::string& locator);

enum class SourceKind { kSalicon, kMit1003, kFolder };
SourceKind parse_source_kind(const std::string& name);

/**
 * Converts a raw dataset layout into a manifest at dst/<split>_manifest.json.
 *
 *   salicon: src/fixations.json in the SALICON (COCO-style) layout with
 *            "images" {id, file_name, width, height} and "annotations"
 *            {image_id, worker_id, fixations: [[row, col], ...]}; images
 *            in src/images/.
 *   mit1003: src/ALLSTIMULI/ images and src/fixations.csv with header
 *            image,observer,x,y; rows per observer in temporal order,
 *            pixel coordinates.
 *   folder:  every image file in src (sorted by name), unlabeled.
 *
 * Fixations outside the image are dropped. Images are referenced, not copied.
 */
DatasetManifest convert_raw(SourceKind kind, const fs::path& src, const fs::path& dst,
                            Split split = Split::kTrain);

// Decoded training example.
struct Sample {
  std::string id;
  Tensor image;       // (3, H, W) in [0,1]
  Scanpath scanpath;  // empty for unlabeled samples
};

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  // Throws DataError when the sample cannot be decoded.
  virtual Sample load(std::size_t index) const = 0;
  virtual std::string describe(std::size_t index) const = 0;
};

class InMemorySource : public SampleSource {
 public:
  InMemorySource() = default;
  explicit InMemorySource(std::vector<Sample> samples) : samples_(std::move(samples)) {}

  void add(Sample sample) { samples_.push_back(std::move(sample)); }
  std::size_t size() const override { return samples_.size(); }
  Sample load(std::size_t index) const override { return samples_.at(index); }
  std::string describe(std::size_t index) const override { return samples_.at(index).id; }

 private:
  std::vector<Sample> samples_;
};

/// Decodes manifest images on demand at a fixed resolution. A labeled source
/// yields one sample per (image, observer) record and skips images without
/// scanpaths; an unlabeled source yields one sample per image.
class ManifestSource : public SampleSource {
 public:
  ManifestSource(DatasetManifest manifest, int height, int width, bool labeled);

  std::size_t size() const override { return items_.size(); }
  Sample load(std::size_t index) const override;
  std::string describe(std::size_t index) const override;

  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t skipped_images() const { return skipped_images_; }

 private:
  struct Item {
    std::size_t entry;
    std::optional<std::size_t> record;
  };
  DatasetManifest manifest_;
  int height_;
  int width_;
  std::vector<Item> items_;
  std::size_t skipped_images_ = 0;
};

// Deterministic permutation of [0, n) for a seed.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

struct Batch {
  std::size_t index = 0;
  std::vector<std::size_t> indices;
  std::vector<Sample> samples;
};

/// One pass over a source in seeded random order. Batches containing a
/// sample that fails to decode are skipped with a warning on stderr.
class BatchIterator {
 public:
  BatchIterator(const SampleSource& source, int batch_size, std::uint64_t seed);

  std::optional<Batch> next();
  std::size_t batch_count() const;
  std::size_t skipped_batches() const { return skipped_; }

 private:
  const SampleSource* source_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t emitted_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace spf

#endif  // SPF_DATA_HPP_
