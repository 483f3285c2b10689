#pragma once

#include <filesystem>

#include "mldetect/image.hpp"

namespace mldetect {

/// Decodes any format OpenCV's codecs understand into an RGB raster.
RasterImage read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB image; the format follows the file extension.
void write_image(const std::filesystem::path& path, const RasterImage& img);

}  // namespace mldetect
