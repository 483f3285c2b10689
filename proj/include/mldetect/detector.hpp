#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mldetect/bbox_regression.hpp"
#include "mldetect/dataset.hpp"
#include "mldetect/featurize.hpp"
#include "mldetect/nms.hpp"
#include "mldetect/svm.hpp"

namespace mldetect {

struct TrainConfig {
  SvmConfig svm;
  double negative_iou = 0.2;             // proposals below this max-IoU are negatives
  std::size_t initial_negatives = 4000;  // random subset used for the first SVM
  int hard_negative_rounds = 1;
  double hard_negative_threshold = -1.0;
  std::size_t hard_negative_cap = 5000;
  bool fit_regressor = true;
  double regressor_iou = 0.6;
  double ridge_lambda = 1.0;
  bool use_flips = true;      // flipped ground truth as extra positives
  int scales_per_octave = 4;  // featurization used while training
  std::uint64_t seed = 0;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

/// Features of one training image, computed once and shared by every
/// category's training set.
struct ImageFeatures {
  std::vector<Box> proposals;        // clipped proposals that featurized
  std::vector<float> proposal_values;  // proposals.size() x dim, row-major
  std::vector<std::optional<std::vector<double>>> objects;  // per annotation; nullopt if too small
  std::vector<std::optional<std::vector<double>>> flipped_objects;
  std::size_t skipped = 0;  // proposals that could not be featurized

  std::span<const float> proposal(std::size_t i, std::size_t dim) const {
    return {proposal_values.data() + i * dim, dim};
  }
};

struct TrainingFeatures {
  std::size_t dim = 0;
  std::vector<ImageFeatures> images;  // parallel to the dataset's images

  /// Keeps the columns of the given elements (bank indices), in that order,
  /// for a layout with `regions` pooled values per element.
  TrainingFeatures select_elements(std::span<const std::size_t> elements, std::size_t regions) const;
};

/// `flipped` may be empty (no flipped positives) or parallel to `pyramids`.
TrainingFeatures featurize_training_set(const Dataset& ds, std::span<const PyramidSet> pyramids,
                                        std::span<const PyramidSet> flipped, const FeaturizerContext& ctx,
                                        int jobs = 1);

/// Columns of `elements` in an element-major layout with `regions` values each.
std::vector<std::size_t> element_columns(std::span<const std::size_t> elements, std::size_t regions);

struct FeatureRef {
  std::uint32_t image = 0;
  std::uint32_t proposal = 0;

  friend bool operator==(const FeatureRef&, const FeatureRef&) = default;
  friend auto operator<=>(const FeatureRef&, const FeatureRef&) = default;
};

struct CategoryTrainingSet {
  FeatureRows positives;             // ground-truth boxes, then their mirrored copies
  std::vector<FeatureRef> negatives;  // every eligible negative proposal
  std::size_t discarded = 0;         // proposals in the ambiguous IoU band
};

/// Positives are the non-difficult ground-truth boxes of `category` (plus
/// their mirrored versions); negatives are proposals whose IoU with every
/// box of the category is below cfg.negative_iou. Throws NoPositives.
CategoryTrainingSet assemble_training_set(const Dataset& ds, const TrainingFeatures& feats, int category,
                                          const TrainConfig& cfg);

/// Proposal/ground-truth pairs for box regression: each proposal is paired
/// with its best-overlapping box of `category` when IoU >= min_iou.
std::vector<RegressionPair> regression_pairs(const Dataset& ds, const TrainingFeatures& feats, int category,
                                             double min_iou);

struct NegativeSet {
  FeatureRows rows;
  std::vector<FeatureRef> refs;  // parallel to rows
};

struct HardNegativeResult {
  LinearModel model;
  std::size_t added = 0;
};

/// Scores every eligible negative not yet in `negatives`, appends the
/// top-scoring ones with score > threshold (at most the cap) and retrains.
/// The model comes back unchanged when nothing qualifies.
HardNegativeResult hard_negative_round(const LinearModel& model, const TrainingFeatures& feats,
                                       const FeatureRows& positives, std::span<const FeatureRef> eligible,
                                       NegativeSet& negatives, const TrainConfig& cfg);

struct CategoryModel {
  std::string category;
  LinearModel svm;
  std::optional<BoxRegressor> regressor;
};

struct CategoryTrainingReport {
  std::string category;
  std::size_t positives = 0;
  std::size_t eligible_negatives = 0;
  std::size_t initial_negatives = 0;
  std::size_t hard_negatives = 0;
  std::size_t regression_pairs = 0;
  std::optional<LinearModel> initial_model;  // before hard negative mining
  std::string note;
};

CategoryModel train_category(const Dataset& ds, const TrainingFeatures& feats, int category, const TrainConfig& cfg,
                             CategoryTrainingReport* report = nullptr);

struct DetectorModel {
  std::uint64_t bank_hash = 0;
  SchemeName scheme = SchemeName::FiveRegion;
  std::size_t feature_dim = 0;
  std::vector<CategoryModel> categories;  // index = category id
  TrainConfig train_config;
};

DetectorModel train_detector(const Dataset& ds, const TrainingFeatures& feats, std::uint64_t bank_hash,
                             SchemeName scheme, const TrainConfig& cfg,
                             std::vector<CategoryTrainingReport>* reports = nullptr, int jobs = 1);

/// Throws ContractMismatch when the model was not trained on this bank/scheme.
void check_contract(const DetectorModel& model, const ElementBank& bank, const PoolingScheme& scheme);

void write_model(std::ostream& os, const DetectorModel& m);
DetectorModel read_model(std::istream& is);
void save_model(const std::filesystem::path& path, const DetectorModel& m);
DetectorModel load_model(const std::filesystem::path& path);
std::uint64_t model_hash(const DetectorModel& m);

struct DetectConfig {
  double nms_threshold = 0.3;
  double score_floor = -1.1;
  bool apply_regression = true;
};

struct DetectResult {
  std::vector<Detection> detections;  // per category in model order, NMS order within
  std::size_t skipped_proposals = 0;
};

/// One shared pyramid per image; every proposal is featurized against it,
/// scored by every category, suppressed per category and refined.
DetectResult detect_image(const PyramidSet& pyramids, const std::string& image_id, std::span<const Box> proposals,
                          const FeaturizerContext& ctx, const DetectorModel& model, const DetectConfig& cfg);

/// Same post-processing, starting from precomputed features (rows x dim).
DetectResult detect_from_features(const std::string& image_id, int img_w, int img_h, std::span<const Box> boxes,
                                  std::span<const float> values, const DetectorModel& model,
                                  const DetectConfig& cfg);

struct DetectionsHeader {
  std::uint64_t model_hash = 0;
  std::uint64_t bank_hash = 0;
};

struct DetectionsFile {
  DetectionsHeader header;
  std::vector<Detection> detections;
};

// Detections file: a '#' header line with the contract hashes, then one
// tab-separated record per detection:
//   image_id category score x1 y1 w h (rx1 ry1 rw rh | -)
void write_detections(std::ostream& os, const DetectionsHeader& header, std::span<const Detection> dets,
                      std::span<const std::string> categories);
/// Category names are resolved against `categories` (UnknownCategory).
DetectionsFile read_detections(std::istream& is, std::span<const std::string> categories);

}  // namespace mldetect
