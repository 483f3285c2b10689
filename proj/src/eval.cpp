#include "mldetect/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mldetect/error.hpp"

namespace mldetect {

std::string_view to_string(ApStyle s) noexcept { return s == ApStyle::ElevenPoint ? "11point" : "continuous"; }

ApStyle parse_ap_style(std::string_view s) {
  if (s == "11point" || s == "11-point" || s == "voc2007") return ApStyle::ElevenPoint;
  if (s == "continuous" || s == "area" || s == "voc2010") return ApStyle::Continuous;
  throw Error(ErrorCode::MalformedInput, "unknown AP style '" + std::string(s) + "'");
}

std::vector<MatchFlag> match_detections(std::span<const Box> dets, std::span<const GtBox> gts, double iou_thresh) {
  std::vector<MatchFlag> flags;
  flags.reserve(dets.size());
  std::vector<bool> matched(gts.size(), false);
  for (const Box& d : dets) {
    std::size_t best = gts.size();
    double best_iou = -1.0;
    bool hits_difficult = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(d, gts[g].box);
      if (gts[g].difficult) {
        hits_difficult = hits_difficult || v >= iou_thresh;
        continue;
      }
      if (!matched[g] && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best < gts.size() && best_iou >= iou_thresh) {
      matched[best] = true;
      flags.push_back(MatchFlag::TruePositive);
    } else {
      flags.push_back(hits_difficult ? MatchFlag::Ignored : MatchFlag::FalsePositive);
    }
  }
  return flags;
}

double average_precision(std::span<const MatchFlag> flags, std::size_t total_gt, ApStyle style) {
  if (total_gt == 0) throw Error(ErrorCode::NoGroundTruth, "average precision is undefined without ground truth");
  std::vector<std::size_t> tp_cum;
  std::vector<double> precision;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (MatchFlag f : flags) {
    if (f == MatchFlag::Ignored) continue;
    (f == MatchFlag::TruePositive ? tp : fp) += 1;
    tp_cum.push_back(tp);
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  const double n_gt = static_cast<double>(total_gt);

  if (style == ApStyle::ElevenPoint) {
    // Recall comparisons in integers: tp / total >= i / 10  <=>  10 tp >= i total.
    double sum = 0.0;
    for (std::size_t i = 0; i <= 10; ++i) {
      double p = 0.0;
      for (std::size_t k = 0; k < tp_cum.size(); ++k)
        if (10 * tp_cum[k] >= i * total_gt) p = std::max(p, precision[k]);
      sum += p;
    }
    return sum / 11.0;
  }

  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  for (std::size_t k = 0; k < tp_cum.size(); ++k) {
    mrec.push_back(static_cast<double>(tp_cum[k]) / n_gt);
    mpre.push_back(precision[k]);
  }
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthRecord> ground_truth,
                    std::span<const std::string> categories, const Protocol& protocol) {
  const std::size_t n_cat = categories.size();
  std::unordered_map<std::string, std::size_t> image_index;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) image_index.emplace(ground_truth[i].image_id, i);

  // gts[c][image] -> boxes
  std::vector<std::vector<std::vector<GtBox>>> gts(n_cat, std::vector<std::vector<GtBox>>(ground_truth.size()));
  std::vector<std::size_t> total(n_cat, 0);
  for (std::size_t i = 0; i < ground_truth.size(); ++i)
    for (const GroundTruthObject& o : ground_truth[i].objects) {
      const auto it = std::find(categories.begin(), categories.end(), o.category);
      if (it == categories.end())
        throw Error(ErrorCode::UnknownCategory, "ground truth of image '" + ground_truth[i].image_id +
                                                    "' uses category '" + o.category + "'");
      const auto c = static_cast<std::size_t>(it - categories.begin());
      gts[c][i].push_back({o.box, o.difficult});
      if (!o.difficult) ++total[c];
    }

  struct Ranked {
    const Detection* det;
    std::size_t image;
  };
  std::vector<std::vector<Ranked>> per_cat(n_cat);
  for (const Detection& d : dets) {
    const auto it = image_index.find(d.image_id);
    if (it == image_index.end())
      throw Error(ErrorCode::UnknownImageId, "detection refers to unknown image '" + d.image_id + "'");
    if (d.category < 0 || static_cast<std::size_t>(d.category) >= n_cat)
      throw Error(ErrorCode::UnknownCategory, "detection category index out of range");
    per_cat[static_cast<std::size_t>(d.category)].push_back({&d, it->second});
  }

  EvalReport rep;
  rep.protocol = protocol;
  for (std::size_t c = 0; c < n_cat; ++c) {
    auto& list = per_cat[c];
    std::sort(list.begin(), list.end(), [](const Ranked& a, const Ranked& b) {
      if (a.det->score != b.det->score) return a.det->score > b.det->score;
      if (a.det->image_id != b.det->image_id) return a.det->image_id < b.det->image_id;
      return a.det->final_box() < b.det->final_box();
    });
    // Matching state is per image, but flags must follow the global ranking.
    std::vector<std::vector<Box>> by_image(ground_truth.size());
    std::vector<std::vector<std::size_t>> rank_of(ground_truth.size());
    for (std::size_t r = 0; r < list.size(); ++r) {
      by_image[list[r].image].push_back(list[r].det->final_box());
      rank_of[list[r].image].push_back(r);
    }
    std::vector<MatchFlag> flags(list.size(), MatchFlag::FalsePositive);
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
      if (by_image[i].empty()) continue;
      const auto f = match_detections(by_image[i], gts[c][i], protocol.iou_thresh);
      for (std::size_t k = 0; k < f.size(); ++k) flags[rank_of[i][k]] = f[k];
    }
    CategoryCounts cc;
    cc.ground_truth = total[c];
    for (MatchFlag f : flags) {
      if (f == MatchFlag::TruePositive) ++cc.true_positives;
      if (f == MatchFlag::FalsePositive) ++cc.false_positives;
    }
    cc.missed = cc.ground_truth - cc.true_positives;
    rep.counts[categories[c]] = cc;
    if (total[c] == 0) {
      rep.skipped_categories.push_back(categories[c]);
      continue;
    }
    rep.per_category_ap[categories[c]] = average_precision(flags, total[c], protocol.style);
  }
  double sum = 0.0;
  for (const auto& [name, ap] : rep.per_category_ap) sum += ap;
  rep.map_score = rep.per_category_ap.empty() ? 0.0 : sum / static_cast<double>(rep.per_category_ap.size());
  return rep;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "protocol: IoU >= %.2f, %s AP, continuous-area IoU, difficult boxes ignored\n",
                protocol.iou_thresh, std::string(to_string(protocol.style)).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "%-16s %8s %6s %6s %6s %6s\n", "category", "AP", "TP", "FP", "missed", "GT");
  os << buf;
  for (const auto& [name, cc] : counts) {
    const auto it = per_category_ap.find(name);
    const std::string ap = it == per_category_ap.end() ? "n/a" : [&] {
      char b[32];
      std::snprintf(b, sizeof b, "%.4f", it->second);
      return std::string(b);
    }();
    std::snprintf(buf, sizeof buf, "%-16s %8s %6zu %6zu %6zu %6zu\n", name.c_str(), ap.c_str(), cc.true_positives,
                  cc.false_positives, cc.missed, cc.ground_truth);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-16s %8.4f\n", "mAP", map_score);
  os << buf;
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = {{"iou_thresh", protocol.iou_thresh}, {"ap_style", std::string(to_string(protocol.style))}};
  j["per_category_ap"] = per_category_ap;
  j["map"] = map_score;
  for (const auto& [name, cc] : counts)
    j["counts"][name] = {{"tp", cc.true_positives},
                         {"fp", cc.false_positives},
                         {"missed", cc.missed},
                         {"ground_truth", cc.ground_truth}};
  j["skipped_categories"] = skipped_categories;
  return j.dump(2);
}

}  // namespace mldetect
