#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mldetect/dataset.hpp"
#include "mldetect/element.hpp"
#include "mldetect/featgrid.hpp"

namespace mldetect {

enum class Polarity : std::uint8_t { Positive, Negative };

/// One 6x6x33 window cut from a training pyramid.
struct PatchSample {
  std::vector<float> feature;  // kTemplateSize values, template layout
  int source_image = 0;        // index into the dataset's image list
  Box location;                // 64x64-cell footprint in source-image pixels
  Polarity polarity = Polarity::Positive;
  bool flipped = false;        // cut from the mirrored image (location is in mirrored coordinates)
};

struct SamplingConfig {
  double dilation = 0.25;
  bool use_flips = true;  // also cut positives from mirrored images
};

/// Training pyramids for a dataset, shared by every category's sampling.
/// `flipped` may be empty; otherwise it must be parallel to `pyramids` and
/// hold the mirrored images.
class PatchSource {
 public:
  PatchSource(const Dataset& ds, std::span<const PyramidSet> pyramids, std::span<const PyramidSet> flipped,
              SamplingConfig cfg = {});

  /// Positives: windows whose footprint lies inside a dilated ground-truth
  /// box of `category` (IoU with the box > `min_iou` when given). Negatives:
  /// windows drawn uniformly from images without the category.
  /// Returns `count` distinct windows sampled uniformly without replacement;
  /// throws InsufficientData when fewer exist unless `allow_fewer`, in which
  /// case all available windows are returned. count == 0 means all.
  std::vector<PatchSample> sample(int category, Polarity polarity, std::size_t count,
                                  std::optional<double> min_iou, std::uint64_t seed, bool allow_fewer = false) const;

 private:
  struct WindowRef {
    int image;
    bool flipped;
    bool upsampled;
    int level;
    int row;
    int col;
  };
  std::vector<WindowRef> positive_windows(int category, std::optional<double> min_iou) const;
  PatchSample cut(const WindowRef& ref, Polarity polarity) const;
  const FeaturePyramid& pyramid_of(const WindowRef& ref) const;

  const Dataset& ds_;
  std::span<const PyramidSet> pyramids_;
  std::span<const PyramidSet> flipped_;
  SamplingConfig cfg_;
};

/// Convenience wrapper that builds the pyramids itself.
std::vector<PatchSample> sample_patches(const Dataset& ds, int category, Polarity polarity, std::size_t count,
                                        std::optional<double> min_iou, const PyramidConfig& pyr_cfg,
                                        const SamplingConfig& cfg, std::uint64_t seed, bool allow_fewer = false);

struct MiningConfig {
  int top_k = 50;                  // firings used for the density-ratio score
  int top_m = 20;                  // positive firings averaged per refit
  int rounds = 5;                  // refit iterations
  double shrinkage = 0.01;         // lambda = shrinkage * trace(cov) / dim
  int candidate_factor = 5;        // initializations per requested element
  double max_cosine = 0.8;         // dedupe: weight cosine threshold
  double max_firing_overlap = 0.5; // dedupe: Jaccard threshold on top-k firings
  std::uint64_t seed = 0;
};

/// Reference to a held-out patch: `positive` selects the list, `index` the entry.
struct FiringRef {
  bool positive = false;
  std::size_t index = 0;

  friend bool operator==(const FiringRef&, const FiringRef&) = default;
  friend auto operator<=>(const FiringRef&, const FiringRef&) = default;
};

struct MinedElement {
  Element element;
  std::vector<FiringRef> top_firings;  // top-k on the held-out split, best first
};

/// Whitened-template refitting followed by dedupe and density-ratio ranking.
/// Returns n elements sorted by descending mining score (ties by candidate
/// id); if dedupe leaves fewer than n, the best-ranked redundant candidates
/// make up the difference.
std::vector<MinedElement> mine_elements(std::span<const PatchSample> pos, std::span<const PatchSample> neg,
                                        std::size_t n, const MiningConfig& cfg);

/// Greedy pass in rank order; returns the indices that survive.
std::vector<std::size_t> dedupe(std::span<const Element> elements, std::span<const std::vector<FiringRef>> firings,
                                double max_cosine, double max_firing_overlap);

double weight_cosine(const Element& a, const Element& b);
double jaccard(std::span<const FiringRef> a, std::span<const FiringRef> b);

struct BankMiningConfig {
  std::size_t n_discriminative = 100;
  std::size_t n_localization = 50;
  double localization_iou = 0.8;
  std::size_t max_positives = 3000;
  std::size_t negatives = 6000;
  MiningConfig mining;
  SamplingConfig sampling;
};

struct CategoryMiningSummary {
  std::string category;
  std::size_t positives = 0;
  std::size_t localization_positives = 0;
  std::size_t negatives = 0;
  std::size_t discriminative = 0;
  std::size_t localization = 0;
  double best_score = 0.0;
  double median_score = 0.0;
  std::vector<std::string> errors;  // InsufficientData and friends, per kind
};

struct BankMiningResult {
  ElementBank bank;
  std::vector<CategoryMiningSummary> summaries;
};

/// Mines N discriminative + L localization elements per category and
/// assembles them into a bank in contract order with sequential ids.
BankMiningResult mine_bank(const Dataset& train, const PatchSource& source, const BankMiningConfig& cfg,
                           int scales_per_octave);

}  // namespace mldetect
