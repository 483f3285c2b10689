#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "mldetect/element.hpp"
#include "mldetect/featgrid.hpp"

namespace mldetect {

/// Sub-rectangle of the unit square with rational bounds (x0/d, x1/d] x
/// (y0/d, y1/d]; a lower bound of 0 is inclusive. Boundary points therefore
/// belong to the lower-index cell of a grid partition.
struct PoolRegion {
  int x0 = 0;
  int x1 = 1;
  int y0 = 0;
  int y1 = 1;
  int denom = 1;

  /// Whether the center of response position (r, c) of a rows x cols map
  /// falls inside the region; exact integer arithmetic.
  bool contains(int r, int c, int rows, int cols) const noexcept;
};

enum class SchemeName { FiveRegion, SevenRegion };

struct PoolingScheme {
  SchemeName name = SchemeName::FiveRegion;
  std::vector<PoolRegion> regions;

  /// 1x1 whole region plus the 2x2 quadrants (row-major).
  static const PoolingScheme& five();
  /// 1x1 whole region, three vertical strips (left to right), three
  /// horizontal strips (top to bottom).
  static const PoolingScheme& seven();
  static const PoolingScheme& from_name(SchemeName name);
  /// Accepts "five" / "seven" and the long labels.
  static const PoolingScheme& parse(std::string_view text);

  std::string_view label() const noexcept;
  std::size_t size() const noexcept { return regions.size(); }
};

/// Pooled responses of one proposal, element-major then region-minor.
struct ProposalFeature {
  std::vector<double> values;
  Box proposal;
  SchemeName scheme = SchemeName::FiveRegion;
};

/// Max over the positions of every map whose centers fall in `region`;
/// std::nullopt when no position qualifies.
std::optional<double> pool(std::span<const ResponseMap> maps, const PoolRegion& region);

/// Bank templates packed once and shared by all featurizers.
struct FeaturizerContext {
  FeaturizerContext(const ElementBank& bank, const PoolingScheme& scheme);

  const ElementBank& bank;
  const PoolingScheme& scheme;
  TemplateMatrix templates;

  std::size_t dimension() const noexcept { return bank.size() * scheme.size(); }
};

/// Where a pooled value came from.
struct PooledFiring {
  double value = 0.0;
  bool from_region = false;  // false when the value is the empty-region fill
  bool upsampled = false;
  int level = 0;
  int row = 0;  // response position in level grid coordinates
  int col = 0;
  Box footprint;  // 64x64-equivalent window in image pixels
};

/// Featurizes from the shared whole-image pyramid: element responses are
/// computed on demand, only at the positions some proposal's view covers,
/// and each position is scored once for all elements and all later
/// proposals. Values do not depend on the order proposals arrive in.
/// Concurrent featurize() calls are safe.
class ImageFeaturizer {
 public:
  ImageFeaturizer(const PyramidSet& pyramids, const FeaturizerContext& ctx);

  /// Uses the 2x-upsampled pyramid for proposals below 80x80 and falls
  /// back to it when the normal pyramid gives no 6x6 view. Throws
  /// RegionTooSmall when neither works.
  ProposalFeature featurize(const Box& b) const;

  /// Per (element, region) pooled value with its argmax location.
  std::vector<PooledFiring> explain(const Box& b) const;

  const PyramidSet& pyramids() const noexcept { return pyr_; }

 private:
  struct LevelResponses {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;       // (r * cols + c) * n_elements + e
    std::vector<std::uint8_t> ready;  // r * cols + c
  };
  /// Response maps of each view's level, with every position the views
  /// cover filled in (parallel to `views`).
  std::vector<const LevelResponses*> responses(bool upsampled, std::span<const GridView> views) const;
  std::pair<const FeaturePyramid*, std::vector<GridView>> views_for(const Box& b) const;

  const PyramidSet& pyr_;
  const FeaturizerContext& ctx_;
  mutable std::mutex mutex_;
  mutable std::vector<std::unique_ptr<LevelResponses>> cache_[2];
};

/// Same contract as ImageFeaturizer::featurize but scores only the
/// proposal's views, without a shared response cache.
ProposalFeature featurize_proposal(const PyramidSet& pyramids, const Box& b, const FeaturizerContext& ctx);

/// Baseline: crops the proposal and builds a pyramid just for it.
ProposalFeature featurize_isolated(const RasterImage& img, const Box& b, const FeaturizerContext& ctx,
                                   const PyramidConfig& cfg);

/// Pools element responses laid out as positions x elements into a vector.
/// `at(view, r, c)` returns a pointer to the n_elements responses of
/// position (r, c) of view `view`; `extents[view]` holds the map size.
struct MapExtent {
  int rows = 0;
  int cols = 0;
};

template <typename At>
std::vector<double> pool_views(std::span<const MapExtent> extents, At&& at, std::size_t n_elements,
                               const PoolingScheme& scheme);

}  // namespace mldetect

#include "mldetect/detail/pool_views.hpp"
