#include "mldetect/image.hpp"

#include <algorithm>
#include <cmath>

namespace mldetect {
namespace {

double srgb_to_linear(double v) {
  return v > 0.04045 ? std::pow((v + 0.055) / 1.055, 2.4) : v / 12.92;
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

LabColor rgb_to_lab(double r, double g, double b) noexcept {
  const double rl = srgb_to_linear(r);
  const double gl = srgb_to_linear(g);
  const double bl = srgb_to_linear(b);
  const double x = 0.412453 * rl + 0.357580 * gl + 0.180423 * bl;
  const double y = 0.212671 * rl + 0.715160 * gl + 0.072169 * bl;
  const double z = 0.019334 * rl + 0.119193 * gl + 0.950227 * bl;
  // D65 reference white.
  const double fx = lab_f(x / 0.95047);
  const double fy = lab_f(y / 1.0);
  const double fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::vector<double> rgb_to_lab(const RasterImage& img) {
  std::vector<double> out(img.data.size());
  for (std::size_t i = 0; i + 2 < img.data.size(); i += 3) {
    const LabColor lab = rgb_to_lab(img.data[i], img.data[i + 1], img.data[i + 2]);
    out[i] = lab.L;
    out[i + 1] = lab.a;
    out[i + 2] = lab.b;
  }
  return out;
}

RasterImage resize_bilinear(const RasterImage& img, int new_width, int new_height) {
  if (new_width == img.width && new_height == img.height) return img;
  RasterImage out(new_width, new_height);
  const double sx = static_cast<double>(img.width) / new_width;
  const double sy = static_cast<double>(img.height) / new_height;

  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int n_out, int n_in, double s) {
    std::vector<Tap> t(n_out);
    for (int i = 0; i < n_out; ++i) {
      double src = (i + 0.5) * s - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
      const int i0 = static_cast<int>(std::floor(src));
      const int i1 = std::min(i0 + 1, n_in - 1);
      t[i] = {i0, i1, src - i0};
    }
    return t;
  };
  const auto tx = taps(new_width, img.width, sx);
  const auto ty = taps(new_height, img.height, sy);

  for (int y = 0; y < new_height; ++y) {
    const Tap& vy = ty[y];
    for (int x = 0; x < new_width; ++x) {
      const Tap& vx = tx[x];
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - vx.f) * img.at(vx.i0, vy.i0, c) + vx.f * img.at(vx.i1, vy.i0, c);
        const double bot = (1.0 - vx.f) * img.at(vx.i0, vy.i1, c) + vx.f * img.at(vx.i1, vy.i1, c);
        out.at(x, y, c) = static_cast<float>((1.0 - vy.f) * top + vy.f * bot);
      }
    }
  }
  return out;
}

RasterImage flip_horizontal(const RasterImage& img) {
  RasterImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

RasterImage crop(const RasterImage& img, const Box& b) {
  const int x0 = std::clamp(static_cast<int>(std::floor(b.x1)), 0, img.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(b.y1)), 0, img.height - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(b.x2())), x0 + 1, img.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(b.y2())), y0 + 1, img.height);
  RasterImage out(x1 - x0, y1 - y0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int c = 0; c < 3; ++c) out.at(x - x0, y - y0, c) = img.at(x, y, c);
  return out;
}

}  // namespace mldetect
