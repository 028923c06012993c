#include "spf/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "spf/error.hpp"

namespace spf {

Tensor load_image(const std::filesystem::path& path, int height, int width) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot decode image " + path.string());
  if (bgr.rows != height || bgr.cols != width) {
    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size(width, height), 0, 0, cv::INTER_AREA);
    bgr = resized;
  }
  Tensor out({3, height, width});
  for (int i = 0; i < height; ++i) {
    const auto* row = bgr.ptr<cv::Vec3b>(i);
    for (int j = 0; j < width; ++j) {
      for (int c = 0; c < 3; ++c) out.at(c, i, j) = row[j][2 - c] / 255.0;
    }
  }
  return out;
}

std::pair<int, int> image_extent(const std::filesystem::path& path) {
  const cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw DataError("cannot decode image " + path.string());
  return {img.rows, img.cols};
}

Tensor load_grayscale(const std::filesystem::path& path) {
  const cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw DataError("cannot decode saliency map " + path.string());
  Tensor out({gray.rows, gray.cols});
  for (int i = 0; i < gray.rows; ++i) {
    const auto* row = gray.ptr<unsigned char>(i);
    for (int j = 0; j < gray.cols; ++j) out[static_cast<std::size_t>(i) * gray.cols + j] = row[j];
  }
  return out;
}

void save_image(const Tensor& image, const std::filesystem::path& path) {
  auto to_byte = [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  cv::Mat mat;
  if (image.rank() == 2) {
    mat = cv::Mat(image.dim(0), image.dim(1), CV_8UC1);
    for (int i = 0; i < image.dim(0); ++i) {
      for (int j = 0; j < image.dim(1); ++j) {
        mat.at<unsigned char>(i, j) = to_byte(image[static_cast<std::size_t>(i) * image.dim(1) + j]);
      }
    }
  } else if (image.rank() == 3 && image.dim(0) == 3) {
    mat = cv::Mat(image.dim(1), image.dim(2), CV_8UC3);
    for (int i = 0; i < image.dim(1); ++i) {
      for (int j = 0; j < image.dim(2); ++j) {
        auto& px = mat.at<cv::Vec3b>(i, j);
        for (int c = 0; c < 3; ++c) px[2 - c] = to_byte(image.at(c, i, j));
      }
    }
  } else {
    throw ShapeError("cannot save tensor of shape " + shape_string(image.shape()) + " as image");
  }
  if (!cv::imwrite(path.string(), mat)) throw DataError("cannot write image " + path.string());
}

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" ||
         ext == ".tiff";
}

}  // namespace spf
