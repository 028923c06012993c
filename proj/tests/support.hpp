#ifndef SPF_TESTS_SUPPORT_HPP_
#define SPF_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "spf/data.hpp"
#include "spf/image_io.hpp"
#include "spf/scanpath.hpp"
#include "spf/tensor.hpp"

namespace spf::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

inline Scanpath random_scanpath(std::size_t n, std::mt19937_64& rng) {
  Scanpath s(n);
  for (auto& p : s) p = {uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)};
  return s;
}

// |a - b| relative to the larger magnitude, with an absolute floor for
// values that are essentially zero.
inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-9) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("spf_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Image whose brightness peaks around a point, so a model can locate it.
inline Tensor blob_image(int height, int width, Point center, double sigma = 0.15) {
  Tensor img({3, height, width});
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double x = (j + 0.5) / width - center.x;
      const double y = (i + 0.5) / height - center.y;
      const double v = std::exp(-(x * x + y * y) / (2 * sigma * sigma));
      img.at(0, i, j) = v;
      img.at(1, i, j) = 0.5 * v;
      img.at(2, i, j) = 1.0 - v;
    }
  }
  return img;
}

// Writes `count` small images plus a labeled manifest with `observers`
// scanpaths per image. Returns the manifest path.
inline std::filesystem::path write_fixture_dataset(const std::filesystem::path& root, int count,
                                                   int observers, std::uint64_t seed,
                                                   int height = 48, int width = 64,
                                                   bool labeled = true) {
  std::mt19937_64 rng(seed);
  std::filesystem::create_directories(root / "images");
  DatasetManifest m;
  m.root = root;
  m.labeled = labeled;
  for (int k = 0; k < count; ++k) {
    ManifestEntry e;
    e.image_id = "img" + std::to_string(k);
    e.image = std::filesystem::path("images") / (e.image_id + ".png");
    const Point c{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8)};
    save_image(blob_image(height, width, c), root / e.image);
    if (labeled) {
      for (int o = 0; o < observers; ++o) {
        ScanpathRecord r;
        r.image_id = e.image_id;
        r.observer_id = "obs" + std::to_string(o);
        r.source_height = height;
        r.source_width = width;
        r.points = random_scanpath(static_cast<std::size_t>(uniform_int(rng, 2, 6)), rng);
        r.points.front() = c;
        e.scanpaths.push_back(r);
      }
    }
    m.entries.push_back(e);
  }
  const auto file = root / "train_manifest.json";
  write_manifest(m, file);
  return file;
}

}  // namespace spf::test

#endif  // SPF_TESTS_SUPPORT_HPP_
