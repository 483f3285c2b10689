#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mldetect/geometry.hpp"

namespace mldetect {

struct Detection {
  std::string image_id;
  int category = 0;
  double score = 0.0;  // SVM margin
  Box box;
  std::optional<Box> refined;  // present iff a box regressor was applied

  /// Box used for evaluation: the refined one when present.
  const Box& final_box() const noexcept { return refined ? *refined : box; }
};

/// Score-descending order; equal scores fall back to lexicographic box order.
bool detection_before(const Detection& a, const Detection& b) noexcept;

/// Greedy non-maximum suppression over one image and category: keeps the
/// best remaining detection and drops every other with IoU > `thresh`.
/// Output is in selection order.
std::vector<Detection> nms(std::vector<Detection> dets, double thresh = 0.3);

}  // namespace mldetect
