#pragma once

#include <span>
#include <vector>

#include "mldetect/featurize.hpp"
#include "mldetect/svm.hpp"

namespace mldetect {

struct ElementFiring {
  std::size_t image = 0;  // index into the pyramid list
  double score = 0.0;
  Box footprint;  // window in source-image pixels, margin included
};

/// Best `k` firings of every element over the given images (both the normal
/// and upsampled pyramids), best first. With one_per_image, an image
/// contributes at most its single best window to an element's list.
std::vector<std::vector<ElementFiring>> top_firings(std::span<const PyramidSet> pyramids, const TemplateMatrix& t,
                                                    std::size_t k = 10, bool one_per_image = true);

/// Bilinear resample of the pixels under `b` into a size x size tile;
/// coordinates beyond the image clamp to the border.
RasterImage sample_window(const RasterImage& img, const Box& b, int size);

/// Mean of the sampled windows of the firings (all of them; callers cap the count).
RasterImage average_firings(std::span<const ElementFiring> firings, std::span<const PyramidSet> pyramids,
                            int size = 64);

/// Tiles in row-major order with a `pad`-pixel gutter.
RasterImage tile_sheet(std::span<const RasterImage> tiles, int columns, int pad = 2, float background = 1.0f);

struct WeightedElement {
  std::size_t element = 0;
  std::size_t region = 0;
  double weight = 0.0;
};

struct ExtremeElements {
  std::vector<WeightedElement> most_positive;
  std::vector<WeightedElement> most_negative;
};

/// Elements behind the largest and smallest classifier weights, distinct.
ExtremeElements extreme_elements(const LinearModel& svm, std::size_t regions, std::size_t count = 3);

struct Contribution {
  std::size_t element = 0;
  std::size_t region = 0;
  double response = 0.0;
  double weight = 0.0;
  double value = 0.0;  // response x weight
  PooledFiring firing;
};

/// The `k` distinct elements with the largest response x weight products,
/// each represented by its best (element, region) dimension.
std::vector<Contribution> top_contributions(std::span<const PooledFiring> firings, const LinearModel& svm,
                                            std::size_t regions, std::size_t k = 20);

struct Transfer {
  const RasterImage* average = nullptr;
  Box location;
  double weight = 0.0;
};

/// Weighted mean of the transfers pasted at their locations; only positive
/// weights take part and uncovered pixels stay black.
RasterImage blend_transfers(int width, int height, std::span<const Transfer> transfers);

}  // namespace mldetect
