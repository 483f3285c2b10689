#include "mldetect/geometry.hpp"

#include <algorithm>
#include <sstream>

#include "mldetect/error.hpp"

namespace mldetect {

std::ostream& operator<<(std::ostream& os, const Box& b) {
  return os << "(" << b.x1 << ", " << b.y1 << ", " << b.w << ", " << b.h << ")";
}

double intersection_area(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) noexcept {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

Box dilate(const Box& b, double fraction) noexcept {
  const double dw = fraction * b.w;
  const double dh = fraction * b.h;
  return {b.x1 - 0.5 * dw, b.y1 - 0.5 * dh, b.w + dw, b.h + dh};
}

Box clip(const Box& b, double img_w, double img_h) {
  const double x1 = std::max(b.x1, 0.0);
  const double y1 = std::max(b.y1, 0.0);
  const double x2 = std::min(b.x2(), img_w);
  const double y2 = std::min(b.y2(), img_h);
  if (x2 <= x1 || y2 <= y1) {
    std::ostringstream msg;
    msg << "box " << b << " lies outside a " << img_w << "x" << img_h << " image";
    throw Error(ErrorCode::EmptyAfterClip, msg.str());
  }
  if (x1 == b.x1 && y1 == b.y1 && x2 == b.x2() && y2 == b.y2()) return b;
  return {x1, y1, x2 - x1, y2 - y1};
}

Box flip_horizontal(const Box& b, double img_w) noexcept {
  return {img_w - b.x2(), b.y1, b.w, b.h};
}

}  // namespace mldetect
