#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mldetect/featgrid.hpp"

namespace mldetect {

inline constexpr int kTemplateCells = 6;
inline constexpr int kTemplateRowSize = kTemplateCells * kChannels;
inline constexpr int kTemplateSize = kTemplateCells * kTemplateRowSize;

enum class ElementKind : std::uint8_t { Discriminative = 0, Localization = 1 };

std::string_view to_string(ElementKind kind) noexcept;

/// A 6x6x33 linear template. Weights use the grid's (row, col, channel)
/// layout; response at a grid position is <weights, window> + bias.
struct Element {
  std::vector<float> weights = std::vector<float>(kTemplateSize, 0.0f);
  double bias = 0.0;
  int category = 0;
  ElementKind kind = ElementKind::Discriminative;
  std::uint32_t id = 0;
  double mining_score = 0.0;  // density ratio on the held-out mining split
};

struct ResponseMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// Valid cross-correlation of one template over a grid:
/// (rows - 5) x (cols - 5) responses. Throws GridTooSmall.
ResponseMap score_grid(const Element& e, const FeatureGrid& g);

/// Mirror-image twin of a template: columns reversed, orientation channels
/// permuted. Its response on a flipped grid equals the original's response
/// at the mirrored position.
Element flip_element(const Element& e);

/// Elements packed column-wise for batched scoring.
struct TemplateMatrix {
  Eigen::MatrixXd weights;  // kTemplateSize x n_elements
  Eigen::RowVectorXd bias;  // 1 x n_elements

  TemplateMatrix() = default;
  explicit TemplateMatrix(std::span<const Element> elements);
  Eigen::Index size() const noexcept { return weights.cols(); }
};

/// Every 6x6 window of the view stacked row-wise: positions x kTemplateSize,
/// positions ordered row-major over the (rows - 5) x (cols - 5) lattice.
Eigen::MatrixXd window_matrix(const FeatureGrid& g, int row0, int col0, int rows, int cols);

/// Responses of all templates at every window of the view; positions x elements.
Eigen::MatrixXd score_windows(const TemplateMatrix& t, const FeatureGrid& g, int row0, int col0, int rows,
                              int cols);

struct DescriptorConfig {
  int cell_size = kCellSize;
  int channels = kChannels;
  int template_cells = kTemplateCells;
  double truncation = kTruncation;
  int scales_per_octave = 4;

  friend bool operator==(const DescriptorConfig&, const DescriptorConfig&) = default;
};

/// All mined templates. Ordering contract: grouped by category in table
/// order, discriminative before localization, each group sorted by
/// descending mining score (ties by id).
struct ElementBank {
  std::vector<std::string> categories;
  std::vector<Element> elements;
  DescriptorConfig descriptor;

  std::size_t size() const noexcept { return elements.size(); }
  std::size_t count(int category, ElementKind kind) const;
  bool ordering_holds() const;
  /// Sorts elements into the ordering contract.
  void canonicalize();
  /// First `n_disc` discriminative and `n_loc` localization elements of each category.
  ElementBank subset(std::size_t n_disc, std::size_t n_loc) const;
};

void write_bank(std::ostream& os, const ElementBank& bank);
ElementBank read_bank(std::istream& is);
void write_bank_manifest(std::ostream& os, const ElementBank& bank);
/// Applies mining scores listed in a manifest to a bank read from its binary file.
void apply_bank_manifest(std::istream& is, ElementBank& bank);

void save_bank(const std::filesystem::path& path, const ElementBank& bank);
/// Reads `path` and, when present, `path` + ".manifest.txt" for mining scores.
ElementBank load_bank(const std::filesystem::path& path);

/// FNV-1a over the serialized bank; identifies the featurization contract.
std::uint64_t bank_hash(const ElementBank& bank);

}  // namespace mldetect
