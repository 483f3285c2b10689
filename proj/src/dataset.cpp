#include "mldetect/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "mldetect/error.hpp"

namespace mldetect {

std::string_view to_string(Split s) noexcept { return s == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train" || s == "trainval") return Split::Train;
  if (s == "test" || s == "val") return Split::Test;
  throw Error(ErrorCode::MalformedInput, "unknown split '" + std::string(s) + "'");
}

bool ImageRecord::has_category(int category) const {
  return std::any_of(objects.begin(), objects.end(), [&](const Annotation& a) { return a.category == category; });
}

int Dataset::category_index(std::string_view name) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == name) return static_cast<int>(i);
  throw Error(ErrorCode::UnknownCategory, "category '" + std::string(name) + "' is not in the category table");
}

const ImageRecord& Dataset::find(std::string_view id) const {
  for (const auto& img : images)
    if (img.id == id) return img;
  throw Error(ErrorCode::UnknownImageId, "image '" + std::string(id) + "' is not in the dataset");
}

Dataset Dataset::subset(Split split) const {
  Dataset out;
  out.categories = categories;
  for (const auto& img : images)
    if (img.split == split) out.images.push_back(img);
  return out;
}

std::vector<GroundTruthRecord> read_ground_truth(std::istream& is) {
  std::vector<GroundTruthRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    GroundTruthRecord rec;
    if (!(ls >> rec.image_id >> rec.width >> rec.height))
      throw Error(ErrorCode::MalformedInput, "ground truth line " + std::to_string(line_no) + ": bad header");
    GroundTruthObject obj;
    int difficult = 0;
    while (ls >> obj.category) {
      if (!(ls >> obj.box.x1 >> obj.box.y1 >> obj.box.w >> obj.box.h >> difficult) || !obj.box.valid())
        throw Error(ErrorCode::MalformedInput, "ground truth line " + std::to_string(line_no) + ": bad object");
      obj.difficult = difficult != 0;
      rec.objects.push_back(obj);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_ground_truth(std::ostream& os, std::span<const GroundTruthRecord> records) {
  char buf[160];
  for (const auto& rec : records) {
    os << rec.image_id << ' ' << rec.width << ' ' << rec.height;
    for (const auto& o : rec.objects) {
      std::snprintf(buf, sizeof buf, " %s %.9g %.9g %.9g %.9g %d", o.category.c_str(), o.box.x1, o.box.y1, o.box.w,
                    o.box.h, o.difficult ? 1 : 0);
      os << buf;
    }
    os << '\n';
  }
}

GroundTruthRecord to_ground_truth(const ImageRecord& img, std::span<const std::string> categories) {
  GroundTruthRecord rec{img.id, img.width, img.height, {}};
  for (const auto& a : img.objects) rec.objects.push_back({categories[a.category], a.box, a.difficult});
  return rec;
}

ProposalFile ingest_proposals(std::istream& is) {
  ProposalFile out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t n_boxes = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id;
    Box b;
    std::string extra;
    if (!(ls >> id >> b.x1 >> b.y1 >> b.w >> b.h) || (ls >> extra) || !b.valid())
      throw Error(ErrorCode::MalformedInput, "proposal file line " + std::to_string(line_no) + ": expected 'image_id x1 y1 w h' with w, h > 0");
    out.boxes[id].push_back(b);
    ++n_boxes;
  }
  if (n_boxes == 0) out.warnings.push_back("proposal file contains no boxes");
  return out;
}

void write_proposals(std::ostream& os, std::span<const ImageRecord> images) {
  char buf[128];
  for (const auto& img : images)
    for (const Box& b : img.proposals) {
      std::snprintf(buf, sizeof buf, "%s %.9g %.9g %.9g %.9g\n", img.id.c_str(), b.x1, b.y1, b.w, b.h);
      os << buf;
    }
}

std::vector<Box> grid_proposer(int img_w, int img_h, int stride, std::span<const int> scales) {
  if (stride <= 0) throw Error(ErrorCode::MalformedInput, "grid proposer stride must be positive");
  std::vector<Box> out;
  for (int s : scales) {
    if (s <= 0) continue;
    for (int y = 0; y + s <= img_h; y += stride)
      for (int x = 0; x + s <= img_w; x += stride) out.push_back({double(x), double(y), double(s), double(s)});
  }
  return out;
}

}  // namespace mldetect
