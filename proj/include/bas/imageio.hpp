#pragma once

#include <filesystem>
#include <utility>

#include "bas/tensor.hpp"

namespace bas {

/// Decode an image file to (1,3,H,W) RGB in [0,1].
Tensor read_image(const std::filesystem::path &path);

/// Decode a mask file to (1,1,H,W) with values in {0,1}; 8-bit sources are
/// binarized at value > 127.
Tensor read_mask(const std::filesystem::path &path);

/// Encode (1,3,H,W) RGB in [0,1] to an 8-bit PNG.
void write_image(const std::filesystem::path &path, const Tensor &image);

/// Encode (1,1,H,W) in [0,1] to an 8-bit grayscale PNG (mask: 0/255).
void write_gray(const std::filesystem::path &path, const Tensor &plane);

/// (width, height) of an image file without keeping the pixels.
std::pair<int, int> image_size(const std::filesystem::path &path);

}  // namespace bas
