#include "mldetect/pipeline.hpp"

#include <cctype>

#include "mldetect/binary_io.hpp"
#include "mldetect/parallel.hpp"

namespace mldetect {

std::string pyramid_cache_key(const ImageRecord& rec, bool flipped) {
  const std::string_view bytes(reinterpret_cast<const char*>(rec.image.data.data()),
                               rec.image.data.size() * sizeof(float));
  std::string key;
  for (char c : rec.id) key += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return key + "_" + binio::hex64(binio::fnv1a(bytes)) + (flipped ? "_flip" : "");
}

std::vector<PyramidSet> build_pyramid_sets(const Dataset& ds, const PyramidConfig& cfg, bool flipped,
                                           std::shared_ptr<PyramidCache> cache) {
  std::vector<PyramidSet> out;
  out.reserve(ds.images.size());
  for (const ImageRecord& rec : ds.images) {
    std::string key = cache ? pyramid_cache_key(rec, flipped) : std::string();
    out.emplace_back(flipped ? flip_horizontal(rec.image) : rec.image, cfg, cache, std::move(key));
  }
  return out;
}

DatasetDetections detect_dataset(const Dataset& ds, std::span<const PyramidSet> pyramids,
                                 const FeaturizerContext& ctx, const DetectorModel& model, const DetectConfig& cfg,
                                 int jobs) {
  std::vector<DetectResult> per(ds.images.size());
  parallel_for(ds.images.size(), jobs, [&](std::size_t i) {
    per[i] = detect_image(pyramids[i], ds.images[i].id, ds.images[i].proposals, ctx, model, cfg);
  });
  DatasetDetections out;
  for (auto& r : per) {
    out.skipped_proposals += r.skipped_proposals;
    out.detections.insert(out.detections.end(), std::make_move_iterator(r.detections.begin()),
                          std::make_move_iterator(r.detections.end()));
  }
  return out;
}

DatasetDetections detect_dataset(const Dataset& ds, const TrainingFeatures& feats, const DetectorModel& model,
                                 const DetectConfig& cfg) {
  DatasetDetections out;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const ImageFeatures& im = feats.images[i];
    DetectResult r = detect_from_features(ds.images[i].id, ds.images[i].width, ds.images[i].height, im.proposals,
                                          im.proposal_values, model, cfg);
    out.skipped_proposals += im.skipped;
    out.detections.insert(out.detections.end(), std::make_move_iterator(r.detections.begin()),
                          std::make_move_iterator(r.detections.end()));
  }
  return out;
}

}  // namespace mldetect
