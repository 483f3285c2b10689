#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "mldetect/geometry.hpp"
#include "mldetect/image.hpp"

namespace testing_support {

inline mldetect::RasterImage random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  mldetect::RasterImage img(w, h);
  for (float& v : img.data) v = u(rng);
  return img;
}

/// Smooth image with structure at several scales (more realistic gradients
/// than white noise).
inline mldetect::RasterImage blob_image(int w, int h, std::mt19937_64& rng, int blobs = 12) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mldetect::RasterImage img(w, h, 0.5f);
  for (int k = 0; k < blobs; ++k) {
    const double cx = u(rng) * w, cy = u(rng) * h, r = 4 + u(rng) * 0.3 * std::min(w, h);
    const double col[3] = {u(rng), u(rng), u(rng)};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r)
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(col[c]);
  }
  return img;
}

inline mldetect::Box random_box(std::mt19937_64& rng, double extent = 200.0, double min_side = 1.0,
                                double max_side = 100.0) {
  std::uniform_real_distribution<double> pos(0.0, extent);
  std::uniform_real_distribution<double> side(min_side, max_side);
  return {pos(rng), pos(rng), side(rng), side(rng)};
}

}  // namespace testing_support
