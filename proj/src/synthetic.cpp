#include "mldetect/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include "mldetect/rng.hpp"

namespace mldetect {

namespace {

using Rng = std::mt19937_64;
using Color = std::array<float, 3>;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double luminance(const Color& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

Color random_color(Rng& rng) {
  return {static_cast<float>(uniform(rng, 0, 1)), static_cast<float>(uniform(rng, 0, 1)),
          static_cast<float>(uniform(rng, 0, 1))};
}

Color contrasting_color(Rng& rng, const Color& against, double min_gap) {
  for (int tries = 0; tries < 100; ++tries) {
    const Color c = random_color(rng);
    if (std::abs(luminance(c) - luminance(against)) >= min_gap) return c;
  }
  const float v = luminance(against) > 0.5 ? 0.05f : 0.95f;
  return {v, v, v};
}

// Inside-tests in continuous image coordinates.
struct Shape {
  enum Kind { Ring, Cross, Triangle, Disk, Rect, Stroke } kind;
  Box box;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0, half_width = 0;  // stroke geometry

  bool inside(double x, double y) const {
    const double u = (x - box.x1) / box.w;
    const double v = (y - box.y1) / box.h;
    switch (kind) {
      case Ring: {
        const double r = std::hypot(u - 0.5, v - 0.5);
        return r <= 0.5 && r >= 0.28;
      }
      case Cross:
        return u >= 0 && u <= 1 && v >= 0 && v <= 1 && (std::abs(u - 0.5) <= 0.16 || std::abs(v - 0.5) <= 0.16);
      case Triangle:
        return v >= 0 && v <= 1 && std::abs(u - 0.5) <= 0.5 * v;
      case Disk:
        return std::hypot(u - 0.5, v - 0.5) <= 0.5;
      case Rect:
        return u >= 0 && u <= 1 && v >= 0 && v <= 1;
      case Stroke: {
        const double dx = x1 - x0, dy = y1 - y0;
        const double len2 = dx * dx + dy * dy;
        const double t = std::clamp(((x - x0) * dx + (y - y0) * dy) / len2, 0.0, 1.0);
        return std::hypot(x - (x0 + t * dx), y - (y0 + t * dy)) <= half_width;
      }
    }
    return false;
  }

  Box bounds() const {
    if (kind != Stroke) return box;
    return {std::min(x0, x1) - half_width, std::min(y0, y1) - half_width, std::abs(x1 - x0) + 2 * half_width,
            std::abs(y1 - y0) + 2 * half_width};
  }
};

// 4x4 supersampled coverage blend.
void paint(RasterImage& img, const Shape& s, const Color& color) {
  const Box b = s.bounds();
  const int xa = std::max(0, static_cast<int>(std::floor(b.x1)));
  const int ya = std::max(0, static_cast<int>(std::floor(b.y1)));
  const int xb = std::min(img.width - 1, static_cast<int>(std::ceil(b.x2())));
  const int yb = std::min(img.height - 1, static_cast<int>(std::ceil(b.y2())));
  for (int y = ya; y <= yb; ++y)
    for (int x = xa; x <= xb; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) hits += s.inside(x + (sx + 0.5) / 4.0, y + (sy + 0.5) / 4.0);
      if (hits == 0) continue;
      const float a = static_cast<float>(hits) / 16.0f;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = (1 - a) * img.at(x, y, c) + a * color[c];
    }
}

Shape::Kind kind_of(int category) {
  static constexpr Shape::Kind kinds[] = {Shape::Ring, Shape::Cross, Shape::Triangle};
  return kinds[category % 3];
}

Color background(Rng& rng, RasterImage& img) {
  const Color base = random_color(rng);
  const Color tilt = random_color(rng);
  const double gx = uniform(rng, -0.25, 0.25);
  const double gy = uniform(rng, -0.25, 0.25);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double t = gx * (x / double(img.width) - 0.5) + gy * (y / double(img.height) - 0.5);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(base[c] + t * (tilt[c] - 0.5));
    }
  return base;
}

void add_clutter(Rng& rng, RasterImage& img, const Color& bg, int count, const Box* avoid) {
  for (int i = 0; i < count; ++i) {
    Shape s{Shape::Stroke, {}};
    const int pick = uniform_int(rng, 0, 2);
    if (pick == 0) {
      s.x0 = uniform(rng, 0, img.width);
      s.y0 = uniform(rng, 0, img.height);
      const double ang = uniform(rng, 0, 2 * M_PI);
      const double len = uniform(rng, 15, 60);
      s.x1 = s.x0 + len * std::cos(ang);
      s.y1 = s.y0 + len * std::sin(ang);
      s.half_width = uniform(rng, 0.8, 2.0);
    } else {
      s.kind = pick == 1 ? Shape::Disk : Shape::Rect;
      const double w = uniform(rng, 6, 22);
      const double h = uniform(rng, 6, 22);
      s.box = {uniform(rng, -w / 2, img.width - w / 2), uniform(rng, -h / 2, img.height - h / 2), w, h};
    }
    // Keep distractors from covering the object itself.
    if (avoid && iou(s.bounds(), *avoid) > 0.0 && intersection_area(s.bounds(), *avoid) > 0.15 * avoid->area())
      continue;
    paint(img, s, contrasting_color(rng, bg, 0.15));
  }
}

void add_noise_and_quantize(Rng& rng, RasterImage& img, double sigma) {
  std::normal_distribution<double> noise(0.0, sigma);
  for (float& v : img.data) {
    const double q = std::clamp(v + noise(rng), 0.0, 1.0);
    v = static_cast<float>(std::round(q * 255.0) / 255.0);
  }
}

Box random_object_box(Rng& rng, int img_w, int img_h, int min_size, int max_size) {
  const double w = std::min<double>(uniform(rng, min_size, max_size), img_w);
  const double h = std::clamp(w * uniform(rng, 0.85, 1.15), double(min_size) * 0.85, double(img_h));
  return {std::round(uniform(rng, 0, img_w - w)), std::round(uniform(rng, 0, img_h - h)), std::round(w),
          std::round(h)};
}

}  // namespace

const std::vector<std::string>& synthetic_categories() {
  static const std::vector<std::string> names{"ring", "cross", "triangle"};
  return names;
}

std::vector<Box> synthetic_proposals(const std::vector<Box>& truth, int width, int height, int jittered, int random,
                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Box> out;
  for (const Box& g : truth)
    for (int k = 0; k < jittered; ++k) {
      // Loose boxes: mostly enlarged and off-center, like grouping-based
      // proposals that swallow some background.
      const double s = std::exp(uniform(rng, -0.1, 0.45));
      const double w = g.w * s * std::exp(uniform(rng, -0.12, 0.12));
      const double h = g.h * s * std::exp(uniform(rng, -0.12, 0.12));
      const double cx = g.center_x() + uniform(rng, -0.2, 0.2) * g.w;
      const double cy = g.center_y() + uniform(rng, -0.2, 0.2) * g.h;
      Box b{std::round(cx - w / 2), std::round(cy - h / 2), std::round(w), std::round(h)};
      try {
        out.push_back(clip(b, width, height));
      } catch (const std::exception&) {
      }
    }
  for (int k = 0; k < random; ++k) {
    const double w = uniform(rng, 32, std::min(width, 112));
    const double h = std::clamp(w * uniform(rng, 0.7, 1.4), 32.0, double(height));
    out.push_back({std::round(uniform(rng, 0, width - w)), std::round(uniform(rng, 0, height - h)), std::round(w),
                   std::round(h)});
  }
  return out;
}

Dataset make_synthetic(const SyntheticConfig& cfg) {
  Dataset ds;
  ds.categories = synthetic_categories();
  const int total = cfg.train_images + cfg.test_images;
  ds.images.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const bool train = i < cfg.train_images;
    const int local = train ? i : i - cfg.train_images;
    const int category = local % static_cast<int>(ds.categories.size());
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));

    ImageRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "%s_%04d", train ? "train" : "test", local);
    rec.id = id;
    rec.file = std::string("images/") + id + ".png";
    rec.split = train ? Split::Train : Split::Test;
    rec.width = cfg.width;
    rec.height = cfg.height;
    rec.image = RasterImage(cfg.width, cfg.height);

    const Color bg = background(rng, rec.image);
    const Box obj = random_object_box(rng, cfg.width, cfg.height, cfg.min_object, cfg.max_object);
    add_clutter(rng, rec.image, bg, cfg.clutter, &obj);
    paint(rec.image, Shape{kind_of(category), obj}, contrasting_color(rng, bg, 0.3));
    add_noise_and_quantize(rng, rec.image, 0.03);

    rec.objects.push_back({category, obj, false});
    rec.proposals = synthetic_proposals({obj}, cfg.width, cfg.height, cfg.jittered_proposals, cfg.random_proposals,
                                        derive_seed(cfg.seed ^ 0x5eedULL, static_cast<std::uint64_t>(i)));
    ds.images.push_back(std::move(rec));
  }
  return ds;
}

RasterImage synthetic_scene(int width, int height, int objects, std::uint64_t seed, std::vector<Box>* boxes) {
  Rng rng(seed);
  RasterImage img(width, height);
  const Color bg = background(rng, img);
  add_clutter(rng, img, bg, width * height / 2000, nullptr);
  for (int k = 0; k < objects; ++k) {
    const Box b = random_object_box(rng, width, height, 40, 160);
    if (boxes) boxes->push_back(b);
    paint(img, Shape{kind_of(k), b}, contrasting_color(rng, bg, 0.3));
  }
  add_noise_and_quantize(rng, img, 0.03);
  return img;
}

}  // namespace mldetect
