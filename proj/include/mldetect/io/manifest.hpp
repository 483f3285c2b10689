#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mldetect/dataset.hpp"

namespace mldetect {

// Manifest (JSON):
//   { "root": "<dir, relative to the manifest>",
//     "categories": ["ring", ...],
//     "ground_truth": "<file>", "proposals": "<file>",
//     "images": [{"id": "...", "file": "...", "split": "train"|"test"}, ...] }
// Files are resolved against root.
struct Manifest {
  std::filesystem::path root;
  std::vector<std::string> categories;
  std::filesystem::path ground_truth;
  std::filesystem::path proposals;
  struct Entry {
    std::string id;
    std::string file;
    Split split = Split::Train;
  };
  std::vector<Entry> images;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root / p; }
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

struct LoadOptions {
  bool pixels = true;
  bool proposals = true;
  /// Images whose proposals must be present; an image of these splits
  /// without any proposal record is an error naming its id.
  std::vector<Split> require_proposals;
};

/// Reads ground truth, proposals and (optionally) pixels for every image.
Dataset load_dataset(const Manifest& m, const LoadOptions& opts = {});

/// Writes images (PNG), ground truth, proposals and manifest.json under dir.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);

}  // namespace mldetect
