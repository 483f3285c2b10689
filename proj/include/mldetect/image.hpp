#pragma once

#include <cstddef>
#include <vector>

#include "mldetect/geometry.hpp"

namespace mldetect {

/// Interleaved RGB raster with channel values in [0, 1].
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // (y * width + x) * 3 + channel

  RasterImage() = default;
  RasterImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool empty() const noexcept { return width == 0 || height == 0; }
};

struct LabColor {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// sRGB (companded, [0,1]) to CIE Lab under the D65 white point.
LabColor rgb_to_lab(double r, double g, double b) noexcept;

/// Affine map that brings an a or b value into roughly [0, 1].
constexpr double rescale_ab(double v) noexcept { return (v + 128.0) / 255.0; }

/// Per-pixel Lab conversion; output is interleaved (L, a, b) without rescaling.
std::vector<double> rgb_to_lab(const RasterImage& img);

/// Bilinear resampling with pixel-center alignment, which keeps the operation
/// covariant under horizontal flips.
RasterImage resize_bilinear(const RasterImage& img, int new_width, int new_height);

RasterImage flip_horizontal(const RasterImage& img);

/// Copies the pixels covered by `b` (rounded outward, clipped to the image).
RasterImage crop(const RasterImage& img, const Box& b);

}  // namespace mldetect
