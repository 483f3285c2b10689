#include "mldetect/featurize.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>

#include "mldetect/error.hpp"

namespace mldetect {

bool PoolRegion::contains(int r, int c, int rows, int cols) const noexcept {
  const std::int64_t xn = (2 * static_cast<std::int64_t>(c) + 1) * denom;
  const std::int64_t xd = 2 * static_cast<std::int64_t>(cols);
  const std::int64_t yn = (2 * static_cast<std::int64_t>(r) + 1) * denom;
  const std::int64_t yd = 2 * static_cast<std::int64_t>(rows);
  const bool in_x = (x0 == 0 || x0 * xd < xn) && xn <= x1 * xd;
  const bool in_y = (y0 == 0 || y0 * yd < yn) && yn <= y1 * yd;
  return in_x && in_y;
}

const PoolingScheme& PoolingScheme::five() {
  static const PoolingScheme s{SchemeName::FiveRegion,
                               {{0, 1, 0, 1, 1}, {0, 1, 0, 1, 2}, {1, 2, 0, 1, 2}, {0, 1, 1, 2, 2}, {1, 2, 1, 2, 2}}};
  return s;
}

const PoolingScheme& PoolingScheme::seven() {
  static const PoolingScheme s{SchemeName::SevenRegion,
                               {{0, 1, 0, 1, 1},
                                {0, 1, 0, 3, 3},
                                {1, 2, 0, 3, 3},
                                {2, 3, 0, 3, 3},
                                {0, 3, 0, 1, 3},
                                {0, 3, 1, 2, 3},
                                {0, 3, 2, 3, 3}}};
  return s;
}

const PoolingScheme& PoolingScheme::from_name(SchemeName name) {
  return name == SchemeName::FiveRegion ? five() : seven();
}

const PoolingScheme& PoolingScheme::parse(std::string_view text) {
  if (text == "five" || text == "FiveRegion" || text == "5") return five();
  if (text == "seven" || text == "SevenRegion" || text == "7") return seven();
  throw Error(ErrorCode::MalformedInput, "unknown pooling scheme '" + std::string(text) + "'");
}

std::string_view PoolingScheme::label() const noexcept {
  return name == SchemeName::FiveRegion ? "five" : "seven";
}

std::optional<double> pool(std::span<const ResponseMap> maps, const PoolRegion& region) {
  std::optional<double> best;
  for (const ResponseMap& m : maps)
    for (int r = 0; r < m.rows; ++r)
      for (int c = 0; c < m.cols; ++c)
        if (region.contains(r, c, m.rows, m.cols)) {
          const double v = m.at(r, c);
          if (!best || v > *best) best = v;
        }
  return best;
}

FeaturizerContext::FeaturizerContext(const ElementBank& b, const PoolingScheme& s)
    : bank(b), scheme(s), templates(b.elements) {}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::pair<const FeaturePyramid*, std::vector<GridView>> choose_views(const PyramidSet& set, const Box& b) {
  const bool up = set.wants_upsampled(b);
  const FeaturePyramid& first = up ? set.upsampled() : set.normal();
  try {
    return {&first, extract_region_views(first, b)};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RegionTooSmall || up || !set.config().upsample_small) throw;
  }
  const FeaturePyramid& second = set.upsampled();
  return {&second, extract_region_views(second, b)};
}

ProposalFeature score_and_pool(const FeaturePyramid& pyr, std::span<const GridView> views, const Box& b,
                               const FeaturizerContext& ctx) {
  std::vector<RowMatrix> maps;
  std::vector<MapExtent> extents;
  maps.reserve(views.size());
  for (const GridView& v : views) {
    maps.emplace_back(score_windows(ctx.templates, pyr.levels[v.level].grid, v.row0, v.col0, v.rows, v.cols));
    extents.push_back({v.rows - kTemplateCells + 1, v.cols - kTemplateCells + 1});
  }
  auto at = [&](std::size_t view, int r, int c) {
    return maps[view].row(static_cast<Eigen::Index>(r) * extents[view].cols + c).data();
  };
  ProposalFeature f;
  f.values = pool_views(extents, at, ctx.bank.size(), ctx.scheme);
  f.proposal = b;
  f.scheme = ctx.scheme.name;
  return f;
}

}  // namespace

ImageFeaturizer::ImageFeaturizer(const PyramidSet& pyramids, const FeaturizerContext& ctx)
    : pyr_(pyramids), ctx_(ctx) {}

std::vector<const ImageFeaturizer::LevelResponses*> ImageFeaturizer::responses(
    bool upsampled, std::span<const GridView> views) const {
  std::lock_guard lock(mutex_);
  auto& cache = cache_[upsampled ? 1 : 0];
  const FeaturePyramid& pyr = upsampled ? pyr_.upsampled() : pyr_.normal();
  if (cache.size() < pyr.levels.size()) cache.resize(pyr.levels.size());
  const std::size_t n = ctx_.bank.size();

  struct Pending {
    LevelResponses* level;
    const FeatureGrid* grid;
    int r;
    int c;
  };
  std::vector<const LevelResponses*> out;
  std::vector<Pending> todo;
  for (const GridView& view : views) {
    auto& slot = cache[static_cast<std::size_t>(view.level)];
    const FeatureGrid& g = pyr.levels[static_cast<std::size_t>(view.level)].grid;
    if (!slot) {
      slot = std::make_unique<LevelResponses>();
      slot->rows = g.rows - kTemplateCells + 1;
      slot->cols = g.cols - kTemplateCells + 1;
      slot->values.resize(static_cast<std::size_t>(slot->rows) * slot->cols * n);
      slot->ready.assign(static_cast<std::size_t>(slot->rows) * slot->cols, 0);
    }
    LevelResponses& lr = *slot;
    out.push_back(&lr);
    for (int r = view.row0; r <= view.row0 + view.rows - kTemplateCells; ++r)
      for (int c = view.col0; c <= view.col0 + view.cols - kTemplateCells; ++c) {
        std::uint8_t& flag = lr.ready[static_cast<std::size_t>(r) * lr.cols + c];
        if (flag) continue;
        flag = 1;  // views of one proposal can overlap; queue each position once
        todo.push_back({&lr, &g, r, c});
      }
  }

  // Every product has the same shape, so a position's value is bit-identical
  // whichever proposal first asked for it and whatever shares its batch.
  constexpr Eigen::Index kBatch = 64;
  RowMatrix windows(kBatch, kTemplateSize);
  for (std::size_t start = 0; start < todo.size(); start += kBatch) {
    const std::size_t count = std::min<std::size_t>(kBatch, todo.size() - start);
    windows.setZero();
    for (std::size_t i = 0; i < count; ++i) {
      const Pending& p = todo[start + i];
      double* dst = windows.row(static_cast<Eigen::Index>(i)).data();
      for (int dr = 0; dr < kTemplateCells; ++dr) {
        const float* src = p.grid->cell(p.r + dr, p.c);
        for (int k = 0; k < kTemplateRowSize; ++k) dst[dr * kTemplateRowSize + k] = src[k];
      }
    }
    RowMatrix scores = windows * ctx_.templates.weights;
    scores.rowwise() += ctx_.templates.bias;
    for (std::size_t i = 0; i < count; ++i) {
      const Pending& p = todo[start + i];
      const std::size_t pos = static_cast<std::size_t>(p.r) * p.level->cols + p.c;
      std::copy_n(scores.row(static_cast<Eigen::Index>(i)).data(), n, p.level->values.data() + pos * n);
    }
  }
  return out;
}

std::pair<const FeaturePyramid*, std::vector<GridView>> ImageFeaturizer::views_for(const Box& b) const {
  return choose_views(pyr_, b);
}

ProposalFeature ImageFeaturizer::featurize(const Box& b) const {
  const auto [pyr, views] = views_for(b);
  const bool up = pyr == &pyr_.upsampled();
  const std::size_t n = ctx_.bank.size();
  const std::vector<const LevelResponses*> resp = responses(up, views);
  std::vector<MapExtent> extents;
  for (const GridView& v : views) extents.push_back({v.rows - kTemplateCells + 1, v.cols - kTemplateCells + 1});
  auto at = [&](std::size_t view, int r, int c) {
    const LevelResponses& lr = *resp[view];
    const GridView& v = views[view];
    return lr.values.data() + (static_cast<std::size_t>(v.row0 + r) * lr.cols + (v.col0 + c)) * n;
  };
  ProposalFeature f;
  f.values = pool_views(extents, at, n, ctx_.scheme);
  f.proposal = b;
  f.scheme = ctx_.scheme.name;
  return f;
}

std::vector<PooledFiring> ImageFeaturizer::explain(const Box& b) const {
  const auto [pyr, views] = views_for(b);
  const bool up = pyr == &pyr_.upsampled();
  const std::size_t n = ctx_.bank.size();
  const std::size_t n_regions = ctx_.scheme.size();
  std::vector<PooledFiring> out(n * n_regions);
  for (auto& f : out) f.value = -std::numeric_limits<double>::infinity();
  constexpr double span = kCellSize * (kTemplateCells + 2);
  const std::vector<const LevelResponses*> resp = responses(up, views);
  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    const GridView& v = views[vi];
    const LevelResponses& lr = *resp[vi];
    const double fx = pyr->x_factor(static_cast<std::size_t>(v.level));
    const double fy = pyr->y_factor(static_cast<std::size_t>(v.level));
    const int rows = v.rows - kTemplateCells + 1;
    const int cols = v.cols - kTemplateCells + 1;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const int gr = v.row0 + r;
        const int gc = v.col0 + c;
        const double* x = lr.values.data() + (static_cast<std::size_t>(gr) * lr.cols + gc) * n;
        for (std::size_t k = 0; k < n_regions; ++k) {
          if (!ctx_.scheme.regions[k].contains(r, c, rows, cols)) continue;
          for (std::size_t e = 0; e < n; ++e) {
            PooledFiring& f = out[e * n_regions + k];
            if (!f.from_region || x[e] > f.value) {
              f.value = x[e];
              f.from_region = true;
              f.upsampled = up;
              f.level = v.level;
              f.row = gr;
              f.col = gc;
              f.footprint = {kCellSize * gc / fx, kCellSize * gr / fy, span / fx, span / fy};
            }
          }
        }
      }
  }
  for (std::size_t e = 0; e < n; ++e) {
    const PooledFiring* lowest = nullptr;
    for (std::size_t k = 0; k < n_regions; ++k) {
      const PooledFiring& f = out[e * n_regions + k];
      if (f.from_region && (!lowest || f.value < lowest->value)) lowest = &f;
    }
    for (std::size_t k = 0; k < n_regions; ++k) {
      PooledFiring& f = out[e * n_regions + k];
      if (!f.from_region && lowest) {
        f = *lowest;
        f.from_region = false;
      }
    }
  }
  return out;
}

ProposalFeature featurize_proposal(const PyramidSet& pyramids, const Box& b, const FeaturizerContext& ctx) {
  const auto [pyr, views] = choose_views(pyramids, b);
  return score_and_pool(*pyr, views, b, ctx);
}

ProposalFeature featurize_isolated(const RasterImage& img, const Box& b, const FeaturizerContext& ctx,
                                   const PyramidConfig& cfg) {
  const RasterImage region = crop(img, b);
  FeaturePyramid pyr;
  try {
    pyr = build_pyramid(region, cfg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ImageTooSmall) throw;
    throw Error(ErrorCode::RegionTooSmall, e.what());
  }
  std::vector<GridView> views;
  for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
    const FeatureGrid& g = pyr.levels[l].grid;
    views.push_back({static_cast<int>(l), 0, 0, g.rows, g.cols});
  }
  return score_and_pool(pyr, views, b, ctx);
}

}  // namespace mldetect
