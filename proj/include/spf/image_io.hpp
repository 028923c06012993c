#ifndef SPF_IMAGE_IO_HPP_
#define SPF_IMAGE_IO_HPP_

#include <filesystem>
#include <utility>

#include "spf/tensor.hpp"

namespace spf {

// Decodes an image file to a (3, height, width) RGB tensor in [0,1], resized
// with area interpolation. Throws DataError naming the path on failure.
Tensor load_image(const std::filesystem::path& path, int height, int width);

// Native (height, width) of an image file.
std::pair<int, int> image_extent(const std::filesystem::path& path);

// 8-bit grayscale image as a (H, W) tensor with values in [0,255].
Tensor load_grayscale(const std::filesystem::path& path);

// Writes a (3, H, W) [0,1] RGB tensor or a (H, W) [0,1] map as an 8-bit image.
void save_image(const Tensor& image, const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);

}  // namespace spf

#endif  // SPF_IMAGE_IO_HPP_
