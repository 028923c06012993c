#include "spf/render.hpp"

#include <algorithm>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "spf/error.hpp"
#include "spf/metrics.hpp"

namespace spf {

namespace {

constexpr Rgb kPalette[] = {
    {230, 25, 75},  {60, 180, 75},  {0, 130, 200}, {255, 225, 25}, {245, 130, 48},
    {145, 30, 180}, {70, 240, 240}, {240, 50, 230}, {128, 128, 0},  {0, 0, 128},
};

cv::Scalar to_bgr(const Rgb& c) { return cv::Scalar(c[2], c[1], c[0]); }

}  // namespace

Rgb scanpath_color(std::size_t index) {
  return kPalette[index % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

RenderSummary render_scanpaths(const std::filesystem::path& image,
                               const std::vector<LabeledScanpath>& scanpaths,
                               const std::filesystem::path& out_image) {
  cv::Mat canvas = cv::imread(image.string(), cv::IMREAD_COLOR);
  if (canvas.empty()) throw DataError("cannot decode image " + image.string());

  RenderSummary summary;
  summary.width = canvas.cols;
  summary.height = canvas.rows;
  const int radius = std::max(3, std::min(canvas.rows, canvas.cols) / 40);
  const double font = std::max(0.35, radius / 10.0);
  const int thickness = std::max(1, radius / 4);

  for (std::size_t s = 0; s < scanpaths.size(); ++s) {
    const Rgb color = scanpath_color(s);
    summary.colors.push_back(color);
    std::vector<cv::Point> pts;
    for (const auto& p : scanpaths[s].points) {
      const auto [i, j] = nearest_pixel(p, canvas.rows, canvas.cols);
      pts.emplace_back(j, i);
    }
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      cv::line(canvas, pts[k], pts[k + 1], to_bgr(color), thickness, cv::LINE_AA);
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      cv::circle(canvas, pts[k], radius, to_bgr(color), cv::FILLED, cv::LINE_8);
      const std::string label = std::to_string(k + 1);
      int baseline = 0;
      const cv::Size size = cv::getTextSize(label, cv::FONT_HERSHEY_SIMPLEX, font, 1, &baseline);
      int x = pts[k].x + radius + 2;
      int y = pts[k].y - radius - 2;
      if (x + size.width >= canvas.cols) x = pts[k].x - radius - 2 - size.width;
      if (y - size.height < 0) y = pts[k].y + radius + 2 + size.height;
      cv::putText(canvas, label, cv::Point(x, y), cv::FONT_HERSHEY_SIMPLEX, font, to_bgr(color), 1,
                  cv::LINE_AA);
      ++summary.markers;
    }
  }

  if (scanpaths.size() > 1) {
    summary.legend = true;
    const int row = std::max(14, radius * 3);
    for (std::size_t s = 0; s < scanpaths.size(); ++s) {
      const int y = 6 + static_cast<int>(s) * row;
      cv::rectangle(canvas, cv::Rect(6, y, row - 4, row - 4), to_bgr(summary.colors[s]),
                    cv::FILLED);
      const std::string label =
          scanpaths[s].label.empty() ? "scanpath " + std::to_string(s + 1) : scanpaths[s].label;
      cv::putText(canvas, label, cv::Point(6 + row, y + row - 6), cv::FONT_HERSHEY_SIMPLEX,
                  font, cv::Scalar(255, 255, 255), 1, cv::LINE_AA);
    }
  }

  if (!cv::imwrite(out_image.string(), canvas)) {
    throw DataError("cannot write image " + out_image.string());
  }
  return summary;
}

}  // namespace spf
