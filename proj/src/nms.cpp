#include "mldetect/nms.hpp"

#include <algorithm>

namespace mldetect {

bool detection_before(const Detection& a, const Detection& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.box < b.box;
}

std::vector<Detection> nms(std::vector<Detection> dets, double thresh) {
  std::stable_sort(dets.begin(), dets.end(), detection_before);
  std::vector<Detection> kept;
  for (Detection& d : dets) {
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Detection& k) { return iou(k.box, d.box) > thresh; });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

}  // namespace mldetect
