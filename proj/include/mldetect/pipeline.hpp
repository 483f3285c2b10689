#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mldetect/detector.hpp"

namespace mldetect {

/// Cache key for an image's pyramids: id plus a digest of the pixels.
std::string pyramid_cache_key(const ImageRecord& rec, bool flipped);

/// One PyramidSet per image (mirrored images when `flipped`), in dataset order.
std::vector<PyramidSet> build_pyramid_sets(const Dataset& ds, const PyramidConfig& cfg, bool flipped,
                                           std::shared_ptr<PyramidCache> cache = nullptr);

struct DatasetDetections {
  std::vector<Detection> detections;  // dataset image order
  std::size_t skipped_proposals = 0;
};

/// detect_image over every image of `ds`, parallel across images.
DatasetDetections detect_dataset(const Dataset& ds, std::span<const PyramidSet> pyramids,
                                 const FeaturizerContext& ctx, const DetectorModel& model, const DetectConfig& cfg,
                                 int jobs = 1);

/// Same, from features precomputed by featurize_training_set.
DatasetDetections detect_dataset(const Dataset& ds, const TrainingFeatures& feats, const DetectorModel& model,
                                 const DetectConfig& cfg);

}  // namespace mldetect
