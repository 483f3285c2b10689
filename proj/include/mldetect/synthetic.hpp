#pragma once

#include <cstdint>
#include <vector>

#include "mldetect/dataset.hpp"

namespace mldetect {

/// Built-in shapes corpus: one ring, cross or triangle per image (classes
/// cycle with the image index) on a cluttered, noisy background. Pixels
/// are quantized to 8 bits so the PNG round trip is lossless.
struct SyntheticConfig {
  int train_images = 300;
  int test_images = 100;
  int width = 160;
  int height = 128;
  int min_object = 32;
  int max_object = 80;
  int clutter = 8;              // distractor strokes and blobs per image
  int jittered_proposals = 40;  // perturbed copies of the object box
  int random_proposals = 40;    // uniform boxes anywhere in the image
  std::uint64_t seed = 0;
};

const std::vector<std::string>& synthetic_categories();

Dataset make_synthetic(const SyntheticConfig& cfg = {});

/// A cluttered scene with several objects, used for timing. The object
/// boxes are appended to `boxes` when given.
RasterImage synthetic_scene(int width, int height, int objects, std::uint64_t seed, std::vector<Box>* boxes = nullptr);

/// Proposals around `truth` and uniformly inside the image.
std::vector<Box> synthetic_proposals(const std::vector<Box>& truth, int width, int height, int jittered,
                                     int random, std::uint64_t seed);

}  // namespace mldetect
