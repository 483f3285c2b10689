#include "mldetect/visualize.hpp"

#include <algorithm>
#include <cmath>

namespace mldetect {

std::vector<std::vector<ElementFiring>> top_firings(std::span<const PyramidSet> pyramids, const TemplateMatrix& t,
                                                    std::size_t k, bool one_per_image) {
  const auto n = static_cast<std::size_t>(t.weights.cols());
  std::vector<std::vector<ElementFiring>> best(n);
  auto better = [](const ElementFiring& a, const ElementFiring& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.footprint < b.footprint;
  };
  constexpr double span = kCellSize * (kTemplateCells + 2);
  for (std::size_t i = 0; i < pyramids.size(); ++i) {
    std::vector<std::vector<ElementFiring>> mine(n);
    for (const FeaturePyramid* pyr : {&pyramids[i].normal(), &pyramids[i].upsampled()}) {
      for (std::size_t l = 0; l < pyr->levels.size(); ++l) {
        const FeatureGrid& g = pyr->levels[l].grid;
        if (g.rows < kTemplateCells || g.cols < kTemplateCells) continue;
        const Eigen::MatrixXd s = score_windows(t, g, 0, 0, g.rows, g.cols);
        const int cols = g.cols - kTemplateCells + 1;
        const double fx = pyr->x_factor(l);
        const double fy = pyr->y_factor(l);
        for (Eigen::Index p = 0; p < s.rows(); ++p) {
          const int r = static_cast<int>(p) / cols;
          const int c = static_cast<int>(p) % cols;
          const Box fp{kCellSize * c / fx, kCellSize * r / fy, span / fx, span / fy};
          for (std::size_t e = 0; e < n; ++e) {
            const ElementFiring f{i, s(p, static_cast<Eigen::Index>(e)), fp};
            auto& list = mine[e];
            if (one_per_image) {
              if (list.empty())
                list.push_back(f);
              else if (better(f, list[0]))
                list[0] = f;
            } else {
              list.push_back(f);
            }
          }
        }
      }
    }
    for (std::size_t e = 0; e < n; ++e) {
      auto& list = best[e];
      list.insert(list.end(), mine[e].begin(), mine[e].end());
      std::sort(list.begin(), list.end(), better);
      if (list.size() > k) list.resize(k);
    }
  }
  return best;
}

RasterImage sample_window(const RasterImage& img, const Box& b, int size) {
  RasterImage out(size, size);
  for (int v = 0; v < size; ++v)
    for (int u = 0; u < size; ++u) {
      const double sx = std::clamp(b.x1 + (u + 0.5) * b.w / size - 0.5, 0.0, img.width - 1.0);
      const double sy = std::clamp(b.y1 + (v + 0.5) * b.h / size - 0.5, 0.0, img.height - 1.0);
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double ax = sx - x0;
      const double ay = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c);
        const double bot = (1 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c);
        out.at(u, v, c) = static_cast<float>((1 - ay) * top + ay * bot);
      }
    }
  return out;
}

RasterImage average_firings(std::span<const ElementFiring> firings, std::span<const PyramidSet> pyramids, int size) {
  RasterImage out(size, size);
  if (firings.empty()) return out;
  std::vector<double> acc(out.data.size(), 0.0);
  for (const ElementFiring& f : firings) {
    const RasterImage w = sample_window(pyramids[f.image].image(), f.footprint, size);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w.data[i];
  }
  for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i] / firings.size());
  return out;
}

RasterImage tile_sheet(std::span<const RasterImage> tiles, int columns, int pad, float background) {
  if (tiles.empty() || columns <= 0) return RasterImage(1, 1, background);
  int tw = 0, th = 0;
  for (const auto& t : tiles) {
    tw = std::max(tw, t.width);
    th = std::max(th, t.height);
  }
  const int n = static_cast<int>(tiles.size());
  const int cols = std::min(columns, n);
  const int rows = (n + cols - 1) / cols;
  RasterImage sheet(pad + cols * (tw + pad), pad + rows * (th + pad), background);
  for (int i = 0; i < n; ++i) {
    const int ox = pad + (i % cols) * (tw + pad);
    const int oy = pad + (i / cols) * (th + pad);
    const RasterImage& t = tiles[static_cast<std::size_t>(i)];
    for (int y = 0; y < t.height; ++y)
      for (int x = 0; x < t.width; ++x)
        for (int c = 0; c < 3; ++c) sheet.at(ox + x, oy + y, c) = t.at(x, y, c);
  }
  return sheet;
}

ExtremeElements extreme_elements(const LinearModel& svm, std::size_t regions, std::size_t count) {
  std::vector<std::size_t> order(svm.weights.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return svm.weights[a] > svm.weights[b]; });
  auto pick = [&](auto first, auto last, bool positive) {
    std::vector<WeightedElement> out;
    for (auto it = first; it != last && out.size() < count; ++it) {
      const double w = svm.weights[*it];
      if (positive ? w <= 0 : w >= 0) break;
      const std::size_t e = *it / regions;
      if (std::any_of(out.begin(), out.end(), [&](const WeightedElement& x) { return x.element == e; })) continue;
      out.push_back({e, *it % regions, w});
    }
    return out;
  };
  return {pick(order.begin(), order.end(), true), pick(order.rbegin(), order.rend(), false)};
}

std::vector<Contribution> top_contributions(std::span<const PooledFiring> firings, const LinearModel& svm,
                                            std::size_t regions, std::size_t k) {
  std::vector<Contribution> all;
  all.reserve(firings.size());
  for (std::size_t d = 0; d < firings.size() && d < svm.weights.size(); ++d) {
    const double r = firings[d].value;
    const double w = svm.weights[d];
    all.push_back({d / regions, d % regions, r, w, r * w, firings[d]});
  }
  std::stable_sort(all.begin(), all.end(), [](const Contribution& a, const Contribution& b) { return a.value > b.value; });
  std::vector<Contribution> out;
  std::vector<bool> taken;
  for (const Contribution& c : all) {
    if (out.size() >= k) break;
    if (c.element >= taken.size()) taken.resize(c.element + 1, false);
    if (taken[c.element]) continue;
    taken[c.element] = true;
    out.push_back(c);
  }
  return out;
}

RasterImage blend_transfers(int width, int height, std::span<const Transfer> transfers) {
  RasterImage out(width, height);
  std::vector<double> acc(out.data.size(), 0.0);
  std::vector<double> wsum(static_cast<std::size_t>(width) * height, 0.0);
  for (const Transfer& t : transfers) {
    if (!(t.weight > 0) || !t.average || t.average->empty()) continue;
    const RasterImage& a = *t.average;
    const Box& b = t.location;
    const int xa = std::max(0, static_cast<int>(std::floor(b.x1)));
    const int ya = std::max(0, static_cast<int>(std::floor(b.y1)));
    const int xb = std::min(width, static_cast<int>(std::ceil(b.x2())));
    const int yb = std::min(height, static_cast<int>(std::ceil(b.y2())));
    for (int y = ya; y < yb; ++y)
      for (int x = xa; x < xb; ++x) {
        const double cx = x + 0.5, cy = y + 0.5;
        if (cx < b.x1 || cx >= b.x2() || cy < b.y1 || cy >= b.y2()) continue;
        const double sx = std::clamp((cx - b.x1) / b.w * a.width - 0.5, 0.0, a.width - 1.0);
        const double sy = std::clamp((cy - b.y1) / b.h * a.height - 0.5, 0.0, a.height - 1.0);
        const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
        const int x1 = std::min(x0 + 1, a.width - 1), y1 = std::min(y0 + 1, a.height - 1);
        const double ax = sx - x0, ay = sy - y0;
        const std::size_t p = static_cast<std::size_t>(y) * width + x;
        wsum[p] += t.weight;
        for (int c = 0; c < 3; ++c) {
          const double top = (1 - ax) * a.at(x0, y0, c) + ax * a.at(x1, y0, c);
          const double bot = (1 - ax) * a.at(x0, y1, c) + ax * a.at(x1, y1, c);
          acc[p * 3 + c] += t.weight * ((1 - ay) * top + ay * bot);
        }
      }
  }
  for (std::size_t p = 0; p < wsum.size(); ++p)
    if (wsum[p] > 0)
      for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = static_cast<float>(acc[p * 3 + c] / wsum[p]);
  return out;
}

}  // namespace mldetect
