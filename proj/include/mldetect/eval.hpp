#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mldetect/dataset.hpp"
#include "mldetect/nms.hpp"

namespace mldetect {

enum class ApStyle { ElevenPoint, Continuous };

std::string_view to_string(ApStyle s) noexcept;
ApStyle parse_ap_style(std::string_view s);

struct Protocol {
  double iou_thresh = 0.5;
  ApStyle style = ApStyle::ElevenPoint;
};

struct GtBox {
  Box box;
  bool difficult = false;
};

enum class MatchFlag : std::uint8_t { TruePositive, FalsePositive, Ignored };

/// Greedy matching in the given (descending-score) order: each detection
/// takes the unmatched non-difficult box it overlaps most (lowest index on
/// ties) if that IoU reaches the threshold. Detections that only reach a
/// difficult box are Ignored; everything else is a false positive.
std::vector<MatchFlag> match_detections(std::span<const Box> dets, std::span<const GtBox> gts,
                                        double iou_thresh = 0.5);

/// AP of a ranked TP/FP list (Ignored entries are skipped). Throws
/// NoGroundTruth when total_gt is zero.
double average_precision(std::span<const MatchFlag> flags, std::size_t total_gt, ApStyle style);

struct CategoryCounts {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t missed = 0;
  std::size_t ground_truth = 0;
};

struct EvalReport {
  std::map<std::string, double> per_category_ap;  // evaluated categories only
  std::map<std::string, CategoryCounts> counts;
  double map_score = 0.0;
  Protocol protocol;
  std::vector<std::string> skipped_categories;  // no non-difficult ground truth

  std::string to_table() const;
  std::string to_json() const;
};

/// Per-category AP and mAP. Detections are ranked per category by
/// descending score, ties broken by image id then box order. Throws
/// UnknownImageId for a detection on an image missing from the ground truth
/// and UnknownCategory for ground truth outside the category table.
EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthRecord> ground_truth,
                    std::span<const std::string> categories, const Protocol& protocol = {});

}  // namespace mldetect
