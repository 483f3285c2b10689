#include "mldetect/io/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mldetect/error.hpp"
#include "mldetect/io/image_io.hpp"

namespace mldetect {

namespace fs = std::filesystem;
using nlohmann::json;

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  Manifest m;
  try {
    const json j = json::parse(in);
    const fs::path base = path.parent_path();
    m.root = base / j.value("root", std::string("."));
    m.categories = j.at("categories").get<std::vector<std::string>>();
    m.ground_truth = j.at("ground_truth").get<std::string>();
    m.proposals = j.value("proposals", std::string());
    for (const auto& e : j.at("images"))
      m.images.push_back({e.at("id").get<std::string>(), e.value("file", std::string()),
                          parse_split(e.value("split", std::string("train")))});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, "manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  json j;
  j["root"] = m.root.string();
  j["categories"] = m.categories;
  j["ground_truth"] = m.ground_truth.string();
  j["proposals"] = m.proposals.string();
  j["images"] = json::array();
  for (const auto& e : m.images)
    j["images"].push_back({{"id", e.id}, {"file", e.file}, {"split", std::string(to_string(e.split))}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

Dataset load_dataset(const Manifest& m, const LoadOptions& opts) {
  Dataset ds;
  ds.categories = m.categories;

  std::ifstream gt_in(m.resolve(m.ground_truth));
  if (!gt_in) throw Error(ErrorCode::Io, "cannot open ground truth " + m.resolve(m.ground_truth).string());
  std::unordered_map<std::string, GroundTruthRecord> gt;
  for (auto& rec : read_ground_truth(gt_in)) gt.emplace(rec.image_id, std::move(rec));

  ProposalFile props;
  if (opts.proposals && !m.proposals.empty()) {
    std::ifstream p_in(m.resolve(m.proposals));
    if (!p_in) throw Error(ErrorCode::Io, "cannot open proposals " + m.resolve(m.proposals).string());
    props = ingest_proposals(p_in);
  }

  for (const auto& e : m.images) {
    ImageRecord rec;
    rec.id = e.id;
    rec.file = e.file;
    rec.split = e.split;
    if (const auto it = gt.find(e.id); it != gt.end()) {
      rec.width = it->second.width;
      rec.height = it->second.height;
      for (const auto& o : it->second.objects) rec.objects.push_back({ds.category_index(o.category), o.box, o.difficult});
    }
    if (opts.pixels) {
      rec.image = read_image(m.resolve(e.file));
      rec.width = rec.image.width;
      rec.height = rec.image.height;
    }
    if (const auto it = props.boxes.find(e.id); it != props.boxes.end()) {
      rec.proposals = std::move(it->second);
      props.boxes.erase(it);
    } else if (opts.proposals && std::find(opts.require_proposals.begin(), opts.require_proposals.end(), e.split) !=
                                     opts.require_proposals.end()) {
      throw Error(ErrorCode::MalformedInput, "no proposals for image '" + e.id + "'");
    }
    ds.images.push_back(std::move(rec));
  }
  if (!props.boxes.empty())
    throw Error(ErrorCode::UnknownImageId,
                "proposal file references image '" + props.boxes.begin()->first + "' which is not in the manifest");
  return ds;
}

void save_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  Manifest m;
  m.root = ".";
  m.categories = ds.categories;
  m.ground_truth = "ground_truth.txt";
  m.proposals = "proposals.txt";
  std::vector<GroundTruthRecord> gt;
  for (const auto& img : ds.images) {
    const std::string file = img.file.empty() ? "images/" + img.id + ".png" : img.file;
    if (!img.image.empty()) write_image(dir / file, img.image);
    m.images.push_back({img.id, file, img.split});
    gt.push_back(to_ground_truth(img, ds.categories));
  }
  {
    std::ofstream out(dir / m.ground_truth, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write ground truth under " + dir.string());
    write_ground_truth(out, gt);
  }
  {
    std::ofstream out(dir / m.proposals, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write proposals under " + dir.string());
    write_proposals(out, ds.images);
  }
  write_manifest(dir / "manifest.json", m);
}

}  // namespace mldetect
