#ifndef SPF_RENDER_HPP_
#define SPF_RENDER_HPP_

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "spf/scanpath.hpp"

namespace spf {

struct LabeledScanpath {
  std::string label;
  Scanpath points;
};

using Rgb = std::array<unsigned char, 3>;

// Color assigned to the k-th scanpath of a rendering.
Rgb scanpath_color(std::size_t index);

struct RenderSummary {
  int width = 0;
  int height = 0;
  int markers = 0;
  std::vector<Rgb> colors;
  bool legend = false;
};

// Draws saccade lines, filled fixation markers (centered on the fixation's
// nearest pixel) and fixation numbers beside them, one color per scanpath,
// plus a legend when more than one scanpath is given. Writes out_image.
RenderSummary render_scanpaths(const std::filesystem::path& image,
                               const std::vector<LabeledScanpath>& scanpaths,
                               const std::filesystem::path& out_image);

}  // namespace spf

#endif  // SPF_RENDER_HPP_
