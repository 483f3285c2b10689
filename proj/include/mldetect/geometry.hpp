#pragma once

#include <compare>
#include <ostream>

namespace mldetect {

/// Axis-aligned rectangle in continuous pixel coordinates. (x1, y1) is the
/// upper-left corner; the box spans [x1, x1 + w) x [y1, y1 + h).
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double w = 0.0;
  double h = 0.0;

  constexpr double x2() const noexcept { return x1 + w; }
  constexpr double y2() const noexcept { return y1 + h; }
  constexpr double area() const noexcept { return w * h; }
  constexpr double center_x() const noexcept { return x1 + 0.5 * w; }
  constexpr double center_y() const noexcept { return y1 + 0.5 * h; }
  constexpr bool valid() const noexcept { return w > 0.0 && h > 0.0; }

  friend constexpr bool operator==(const Box&, const Box&) = default;
  friend constexpr auto operator<=>(const Box&, const Box&) = default;
};

std::ostream& operator<<(std::ostream& os, const Box& b);

/// Area of the overlap of two boxes (0 when disjoint).
double intersection_area(const Box& a, const Box& b) noexcept;

/// Intersection over union with the continuous-area convention.
double iou(const Box& a, const Box& b) noexcept;

/// Grows both dimensions by `fraction` of their size, keeping the center.
Box dilate(const Box& b, double fraction) noexcept;

/// Intersects `b` with [0, img_w] x [0, img_h]. Throws Error(EmptyAfterClip)
/// when nothing is left.
Box clip(const Box& b, double img_w, double img_h);

/// Mirror image of `b` inside an image of width `img_w`.
Box flip_horizontal(const Box& b, double img_w) noexcept;

}  // namespace mldetect
