#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mldetect/geometry.hpp"
#include "mldetect/image.hpp"

namespace mldetect {

inline constexpr int kCellSize = 8;
inline constexpr int kOrientations = 18;
inline constexpr int kGradientChannels = 31;
inline constexpr int kColorChannels = 2;
inline constexpr int kChannels = kGradientChannels + kColorChannels;
inline constexpr double kTruncation = 0.2;

// Channel layout of one cell.
inline constexpr int kSensitiveBegin = 0;     // 18 contrast-sensitive bins
inline constexpr int kInsensitiveBegin = 18;  // 9 contrast-insensitive bins
inline constexpr int kEnergyBegin = 27;       // 4 normalization energies
inline constexpr int kColorA = 31;
inline constexpr int kColorB = 32;

/// Smallest region side (in pixels) that is evaluated without 2x upsampling.
inline constexpr double kUpsampleBelow = 80.0;

/// Per-cell 33-channel descriptor grid over the interior cells of an image.
/// Cell (r, c) of the grid is raw cell (r + 1, c + 1) of the image, i.e. it
/// covers pixels [8(c+1), 8(c+2)) horizontally; one raw cell on each side is
/// consumed by block normalization.
struct FeatureGrid {
  int rows = 0;
  int cols = 0;
  int cell_size = kCellSize;
  std::vector<float> values;  // (r * cols + c) * kChannels + channel

  FeatureGrid() = default;
  FeatureGrid(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c * kChannels, 0.0f) {}

  const float* cell(int r, int c) const {
    return values.data() + (static_cast<std::size_t>(r) * cols + c) * kChannels;
  }
  float* cell(int r, int c) { return values.data() + (static_cast<std::size_t>(r) * cols + c) * kChannels; }
  float at(int r, int c, int ch) const { return cell(r, c)[ch]; }
};

/// 31 gradient features (see README for the exact layout) plus the per-cell
/// mean of the rescaled Lab a/b channels. Throws ImageTooSmall when the image
/// has fewer than three raw cells along either side.
FeatureGrid compute_feature_grid(const RasterImage& img);

/// Channel permutation induced by mirroring an image left-right:
/// flipped_cell[perm[ch]] == original_cell[ch].
const std::array<int, kChannels>& flip_channel_permutation();

/// Mirrors the grid columns and permutes channels accordingly.
FeatureGrid flip_grid(const FeatureGrid& g);

struct PyramidConfig {
  int scales_per_octave = 4;
  int min_dim = 64;
  bool upsample_small = true;
};

struct PyramidLevel {
  double scale = 1.0;     // nominal scale relative to the pyramid's input image
  int image_width = 0;    // resampled image size at this level
  int image_height = 0;
  FeatureGrid grid;
};

struct FeaturePyramid {
  std::vector<PyramidLevel> levels;
  int scales_per_octave = 4;
  bool upsampled = false;
  int source_width = 0;   // input image size (before any upsampling)
  int source_height = 0;

  /// Horizontal and vertical factors that map source pixels to level pixels.
  double x_factor(std::size_t level) const {
    return static_cast<double>(levels[level].image_width) / source_width;
  }
  double y_factor(std::size_t level) const {
    return static_cast<double>(levels[level].image_height) / source_height;
  }
};

/// Builds the pyramid, upsampling 2x first when `cfg.upsample_small` is set
/// and the image's shorter side is below 80 pixels.
FeaturePyramid build_pyramid(const RasterImage& img, const PyramidConfig& cfg);

/// Builds the pyramid with an explicit upsampling choice.
FeaturePyramid build_pyramid(const RasterImage& img, const PyramidConfig& cfg, bool upsample);

/// Cell-aligned sub-rectangle of one pyramid level.
struct GridView {
  int level = 0;
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;

  friend bool operator==(const GridView&, const GridView&) = default;
};

/// For every level, the cells whose 8-pixel footprint (including the
/// normalization margin) lies within `b` rounded outward to whole cells.
/// Levels narrower than 6x6 cells are dropped; throws RegionTooSmall when
/// none remain.
std::vector<GridView> extract_region_views(const FeaturePyramid& pyr, const Box& b);

/// Copies a view out of its level into a standalone grid.
FeatureGrid view_grid(const FeaturePyramid& pyr, const GridView& v);

// Debug dump: text header "rows cols channels cell_size\n" followed by
// row-major, cell-major, channel-minor little-endian float32 values.
void write_grid_dump(std::ostream& os, const FeatureGrid& g);
FeatureGrid read_grid_dump(std::istream& is);

/// On-disk pyramid cache keyed by an opaque string (file-system safe).
class PyramidCache {
 public:
  explicit PyramidCache(std::filesystem::path dir);

  /// Reads MLDETECT_CACHE; returns nullptr when unset or empty.
  static std::shared_ptr<PyramidCache> from_environment();

  std::optional<FeaturePyramid> load(const std::string& key) const;
  void store(const std::string& key, const FeaturePyramid& pyr) const;

 private:
  std::filesystem::path dir_;
};

/// The whole-image pyramid shared by every proposal of one image, plus the
/// 2x-upsampled pyramid used for proposals smaller than 80x80. The upsampled
/// pyramid is built lazily on first use; both are immutable afterwards and
/// safe to read concurrently.
class PyramidSet {
 public:
  PyramidSet(RasterImage img, PyramidConfig cfg, std::shared_ptr<PyramidCache> cache = nullptr,
             std::string cache_key = {});

  const RasterImage& image() const noexcept { return image_; }
  const PyramidConfig& config() const noexcept { return cfg_; }
  const FeaturePyramid& normal() const;
  const FeaturePyramid& upsampled() const;

  /// Pyramid a region of this size should be read from: the upsampled one
  /// when the box's shorter side is below 80 pixels and upsampling is enabled.
  bool wants_upsampled(const Box& b) const noexcept;

 private:
  const FeaturePyramid& get(int which) const;

  RasterImage image_;
  PyramidConfig cfg_;
  std::shared_ptr<PyramidCache> cache_;
  std::string cache_key_;
  struct Lazy {
    std::array<std::once_flag, 2> once;
    std::array<std::unique_ptr<FeaturePyramid>, 2> pyramids;
  };
  std::unique_ptr<Lazy> lazy_;  // heap-held so the set stays movable
};

}  // namespace mldetect
