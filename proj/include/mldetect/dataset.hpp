#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mldetect/geometry.hpp"
#include "mldetect/image.hpp"

namespace mldetect {

enum class Split { Train, Test };

std::string_view to_string(Split s) noexcept;
Split parse_split(std::string_view s);

struct Annotation {
  int category = 0;
  Box box;
  bool difficult = false;
};

struct ImageRecord {
  std::string id;
  std::string file;  // path relative to the dataset root, if any
  Split split = Split::Train;
  int width = 0;
  int height = 0;
  std::vector<Annotation> objects;
  std::vector<Box> proposals;
  RasterImage image;  // empty when pixels were not loaded

  bool has_category(int category) const;
};

/// Labeled images plus their proposals, fully in memory.
struct Dataset {
  std::vector<std::string> categories;
  std::vector<ImageRecord> images;

  /// Throws UnknownCategory.
  int category_index(std::string_view name) const;
  /// Throws UnknownImageId.
  const ImageRecord& find(std::string_view id) const;
  /// Copy holding only the images of one split.
  Dataset subset(Split split) const;
};

// Ground truth: one line per image,
//   image_id width height [category x1 y1 w h difficult]...
// with difficult in {0, 1}. Blank lines and '#' comments are ignored.
struct GroundTruthObject {
  std::string category;
  Box box;
  bool difficult = false;
};

struct GroundTruthRecord {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthObject> objects;
};

std::vector<GroundTruthRecord> read_ground_truth(std::istream& is);
void write_ground_truth(std::ostream& os, std::span<const GroundTruthRecord> records);
GroundTruthRecord to_ground_truth(const ImageRecord& img, std::span<const std::string> categories);

// Proposals: one box per line, "image_id x1 y1 w h" in pixels.
struct ProposalFile {
  std::unordered_map<std::string, std::vector<Box>> boxes;  // file order within each image
  std::vector<std::string> warnings;
};

/// Throws MalformedInput naming the offending line number.
ProposalFile ingest_proposals(std::istream& is);
void write_proposals(std::ostream& os, std::span<const ImageRecord> images);

/// Square boxes of each side length in `scales`, placed on a `stride` lattice
/// anchored at the origin, scale-major then row-major.
std::vector<Box> grid_proposer(int img_w, int img_h, int stride, std::span<const int> scales);

}  // namespace mldetect
