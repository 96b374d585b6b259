#pragma once

#include <string>
#include <utility>

#include "irid/core/image.hpp"

namespace irid {

// 8-bit PNG. Floats are clamped to [0,1] and quantized on write; reads return
// values/255. Gray and RGB(A) files load as 1- or 3-channel images.
void save_png(const std::string& path, const Image& img);
Image load_png(const std::string& path);

// Portable FloatMap, little-endian (scale -1.0), 1 or 3 channels, lossless.
void save_pfm(const std::string& path, const Image& img);
Image load_pfm(const std::string& path);

// Header-only dimension probe for manifest validation (.png or .pfm).
std::pair<int, int> probe_image_size(const std::string& path);

} // namespace irid
