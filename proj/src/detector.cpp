#include "mldetect/detector.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mldetect/binary_io.hpp"
#include "mldetect/error.hpp"
#include "mldetect/parallel.hpp"
#include "mldetect/rng.hpp"

namespace mldetect {

using nlohmann::json;

std::string TrainConfig::to_json() const {
  json j;
  j["svm_c"] = svm.c;
  j["svm_bias_scale"] = svm.bias_scale;
  j["svm_balance_classes"] = svm.balance_classes;
  j["svm_max_epochs"] = svm.max_epochs;
  j["svm_tolerance"] = svm.tolerance;
  j["negative_iou"] = negative_iou;
  j["initial_negatives"] = initial_negatives;
  j["hard_negative_rounds"] = hard_negative_rounds;
  j["hard_negative_threshold"] = hard_negative_threshold;
  j["hard_negative_cap"] = hard_negative_cap;
  j["fit_regressor"] = fit_regressor;
  j["regressor_iou"] = regressor_iou;
  j["ridge_lambda"] = ridge_lambda;
  j["use_flips"] = use_flips;
  j["scales_per_octave"] = scales_per_octave;
  j["seed"] = seed;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    c.svm.c = j.value("svm_c", c.svm.c);
    c.svm.bias_scale = j.value("svm_bias_scale", c.svm.bias_scale);
    c.svm.balance_classes = j.value("svm_balance_classes", c.svm.balance_classes);
    c.svm.max_epochs = j.value("svm_max_epochs", c.svm.max_epochs);
    c.svm.tolerance = j.value("svm_tolerance", c.svm.tolerance);
    c.negative_iou = j.value("negative_iou", c.negative_iou);
    c.initial_negatives = j.value("initial_negatives", c.initial_negatives);
    c.hard_negative_rounds = j.value("hard_negative_rounds", c.hard_negative_rounds);
    c.hard_negative_threshold = j.value("hard_negative_threshold", c.hard_negative_threshold);
    c.hard_negative_cap = j.value("hard_negative_cap", c.hard_negative_cap);
    c.fit_regressor = j.value("fit_regressor", c.fit_regressor);
    c.regressor_iou = j.value("regressor_iou", c.regressor_iou);
    c.ridge_lambda = j.value("ridge_lambda", c.ridge_lambda);
    c.use_flips = j.value("use_flips", c.use_flips);
    c.scales_per_octave = j.value("scales_per_octave", c.scales_per_octave);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("train config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Training features

std::vector<std::size_t> element_columns(std::span<const std::size_t> elements, std::size_t regions) {
  std::vector<std::size_t> cols;
  cols.reserve(elements.size() * regions);
  for (std::size_t e : elements)
    for (std::size_t r = 0; r < regions; ++r) cols.push_back(e * regions + r);
  return cols;
}

TrainingFeatures TrainingFeatures::select_elements(std::span<const std::size_t> elements, std::size_t regions) const {
  const std::vector<std::size_t> cols = element_columns(elements, regions);
  for (std::size_t c : cols)
    if (c >= dim) throw Error(ErrorCode::ContractMismatch, "selected element lies outside the feature layout");
  TrainingFeatures out;
  out.dim = cols.size();
  out.images.reserve(images.size());
  auto pick = [&](const std::optional<std::vector<double>>& v) -> std::optional<std::vector<double>> {
    if (!v) return std::nullopt;
    std::vector<double> r(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) r[i] = (*v)[cols[i]];
    return r;
  };
  for (const ImageFeatures& im : images) {
    ImageFeatures s;
    s.proposals = im.proposals;
    s.skipped = im.skipped;
    s.proposal_values.resize(im.proposals.size() * cols.size());
    for (std::size_t p = 0; p < im.proposals.size(); ++p) {
      const float* src = im.proposal_values.data() + p * dim;
      float* dst = s.proposal_values.data() + p * cols.size();
      for (std::size_t i = 0; i < cols.size(); ++i) dst[i] = src[cols[i]];
    }
    for (const auto& o : im.objects) s.objects.push_back(pick(o));
    for (const auto& o : im.flipped_objects) s.flipped_objects.push_back(pick(o));
    out.images.push_back(std::move(s));
  }
  return out;
}

namespace {

std::optional<std::vector<double>> try_featurize(const ImageFeaturizer& f, const Box& b) {
  try {
    return f.featurize(clip(b, f.pyramids().image().width, f.pyramids().image().height)).values;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::RegionTooSmall || e.code() == ErrorCode::EmptyAfterClip) return std::nullopt;
    throw;
  }
}

}  // namespace

TrainingFeatures featurize_training_set(const Dataset& ds, std::span<const PyramidSet> pyramids,
                                        std::span<const PyramidSet> flipped, const FeaturizerContext& ctx,
                                        int jobs) {
  if (pyramids.size() != ds.images.size() || (!flipped.empty() && flipped.size() != ds.images.size()))
    throw Error(ErrorCode::ContractMismatch, "pyramid lists must be parallel to the dataset images");
  TrainingFeatures out;
  out.dim = ctx.dimension();
  out.images.resize(ds.images.size());
  parallel_for(ds.images.size(), jobs, [&](std::size_t i) {
    const ImageRecord& rec = ds.images[i];
    ImageFeatures& im = out.images[i];
    const ImageFeaturizer feat(pyramids[i], ctx);
    im.proposals.reserve(rec.proposals.size());
    im.proposal_values.reserve(rec.proposals.size() * out.dim);
    for (const Box& b : rec.proposals) {
      Box c;
      try {
        c = clip(b, rec.width, rec.height);
      } catch (const Error&) {
        ++im.skipped;
        continue;
      }
      auto v = try_featurize(feat, c);
      if (!v) {
        ++im.skipped;
        continue;
      }
      im.proposals.push_back(c);
      im.proposal_values.insert(im.proposal_values.end(), v->begin(), v->end());
    }
    for (const Annotation& a : rec.objects) im.objects.push_back(try_featurize(feat, a.box));
    if (!flipped.empty()) {
      const ImageFeaturizer ff(flipped[i], ctx);
      for (const Annotation& a : rec.objects)
        im.flipped_objects.push_back(try_featurize(ff, flip_horizontal(a.box, rec.width)));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Training sets

namespace {

double max_iou(const Box& b, const ImageRecord& rec, int category, const Annotation** best = nullptr) {
  double m = 0.0;
  for (const Annotation& a : rec.objects) {
    if (a.category != category) continue;
    const double v = iou(b, a.box);
    if (v > m) {
      m = v;
      if (best) *best = &a;
    }
  }
  return m;
}

void push_row(FeatureRows& rows, std::span<const float> v) { rows.push(v); }

}  // namespace

CategoryTrainingSet assemble_training_set(const Dataset& ds, const TrainingFeatures& feats, int category,
                                          const TrainConfig& cfg) {
  if (feats.images.size() != ds.images.size())
    throw Error(ErrorCode::ContractMismatch, "training features are not parallel to the dataset");
  CategoryTrainingSet set;
  set.positives = FeatureRows(feats.dim);
  for (int pass = 0; pass < (cfg.use_flips ? 2 : 1); ++pass)
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
      const ImageRecord& rec = ds.images[i];
      const auto& objs = pass == 0 ? feats.images[i].objects : feats.images[i].flipped_objects;
      for (std::size_t k = 0; k < rec.objects.size() && k < objs.size(); ++k)
        if (rec.objects[k].category == category && !rec.objects[k].difficult && objs[k])
          set.positives.push(std::span<const double>(*objs[k]));
    }
  if (set.positives.empty())
    throw Error(ErrorCode::NoPositives, "category '" + ds.categories.at(static_cast<std::size_t>(category)) +
                                            "' has no usable ground-truth boxes");

  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const ImageFeatures& im = feats.images[i];
    for (std::size_t p = 0; p < im.proposals.size(); ++p) {
      if (max_iou(im.proposals[p], ds.images[i], category) < cfg.negative_iou)
        set.negatives.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(p)});
      else
        ++set.discarded;
    }
  }
  return set;
}

std::vector<RegressionPair> regression_pairs(const Dataset& ds, const TrainingFeatures& feats, int category,
                                             double min_iou) {
  std::vector<RegressionPair> out;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const ImageFeatures& im = feats.images[i];
    for (std::size_t p = 0; p < im.proposals.size(); ++p) {
      const Annotation* best = nullptr;
      if (max_iou(im.proposals[p], ds.images[i], category, &best) < min_iou || !best) continue;
      const auto v = im.proposal(p, feats.dim);
      out.push_back({std::vector<double>(v.begin(), v.end()), im.proposals[p], best->box});
    }
  }
  return out;
}

HardNegativeResult hard_negative_round(const LinearModel& model, const TrainingFeatures& feats,
                                       const FeatureRows& positives, std::span<const FeatureRef> eligible,
                                       NegativeSet& negatives, const TrainConfig& cfg) {
  const std::set<FeatureRef> present(negatives.refs.begin(), negatives.refs.end());
  std::vector<std::pair<double, FeatureRef>> hard;
  for (const FeatureRef& r : eligible) {
    if (present.count(r)) continue;
    const double s = model.score(feats.images[r.image].proposal(r.proposal, feats.dim));
    if (s > cfg.hard_negative_threshold) hard.emplace_back(s, r);
  }
  if (hard.empty()) return {model, 0};
  std::sort(hard.begin(), hard.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (hard.size() > cfg.hard_negative_cap) hard.resize(cfg.hard_negative_cap);
  for (const auto& [s, r] : hard) {
    push_row(negatives.rows, feats.images[r.image].proposal(r.proposal, feats.dim));
    negatives.refs.push_back(r);
  }
  return {train_svm(positives, negatives.rows, cfg.svm), hard.size()};
}

CategoryModel train_category(const Dataset& ds, const TrainingFeatures& feats, int category, const TrainConfig& cfg,
                             CategoryTrainingReport* report) {
  const CategoryTrainingSet set = assemble_training_set(ds, feats, category, cfg);
  if (set.negatives.empty())
    throw Error(ErrorCode::DegenerateData, "category '" + ds.categories.at(static_cast<std::size_t>(category)) +
                                               "' has no negative proposals");

  std::vector<FeatureRef> initial;
  std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(category)));
  if (set.negatives.size() <= cfg.initial_negatives)
    initial = set.negatives;
  else
    std::sample(set.negatives.begin(), set.negatives.end(), std::back_inserter(initial), cfg.initial_negatives, rng);

  NegativeSet negs{FeatureRows(feats.dim), {}};
  negs.rows.reserve(initial.size() + cfg.hard_negative_cap * static_cast<std::size_t>(cfg.hard_negative_rounds));
  for (const FeatureRef& r : initial) {
    push_row(negs.rows, feats.images[r.image].proposal(r.proposal, feats.dim));
    negs.refs.push_back(r);
  }

  TrainConfig c = cfg;
  c.svm.seed = derive_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(category));
  CategoryModel model;
  model.category = ds.categories.at(static_cast<std::size_t>(category));
  model.svm = train_svm(set.positives, negs.rows, c.svm);
  if (report) {
    report->category = model.category;
    report->positives = set.positives.rows();
    report->eligible_negatives = set.negatives.size();
    report->initial_negatives = initial.size();
    report->initial_model = model.svm;
  }
  for (int round = 0; round < cfg.hard_negative_rounds; ++round) {
    const HardNegativeResult hn = hard_negative_round(model.svm, feats, set.positives, set.negatives, negs, c);
    model.svm = hn.model;
    if (report) report->hard_negatives += hn.added;
    if (hn.added == 0) break;
  }

  if (cfg.fit_regressor) {
    const std::vector<RegressionPair> pairs = regression_pairs(ds, feats, category, cfg.regressor_iou);
    if (report) report->regression_pairs = pairs.size();
    try {
      model.regressor = fit_regressor(pairs, cfg.ridge_lambda, cfg.regressor_iou);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientPairs) throw;
      if (report) report->note = e.what();
    }
  }
  return model;
}

DetectorModel train_detector(const Dataset& ds, const TrainingFeatures& feats, std::uint64_t bank_hash,
                             SchemeName scheme, const TrainConfig& cfg, std::vector<CategoryTrainingReport>* reports,
                             int jobs) {
  DetectorModel m;
  m.bank_hash = bank_hash;
  m.scheme = scheme;
  m.feature_dim = feats.dim;
  m.train_config = cfg;
  m.categories.resize(ds.categories.size());
  std::vector<CategoryTrainingReport> local(ds.categories.size());
  parallel_for(ds.categories.size(), jobs, [&](std::size_t c) {
    m.categories[c] = train_category(ds, feats, static_cast<int>(c), cfg, &local[c]);
  });
  if (reports) *reports = std::move(local);
  return m;
}

void check_contract(const DetectorModel& model, const ElementBank& bank, const PoolingScheme& scheme) {
  const std::uint64_t h = bank_hash(bank);
  if (model.bank_hash != h)
    throw Error(ErrorCode::ContractMismatch, "model was trained on bank " + binio::hex64(model.bank_hash) +
                                                 " but the supplied bank hashes to " + binio::hex64(h));
  if (model.scheme != scheme.name)
    throw Error(ErrorCode::ContractMismatch, "model was trained with the '" +
                                                 std::string(PoolingScheme::from_name(model.scheme).label()) +
                                                 "' pooling scheme, not '" + std::string(scheme.label()) + "'");
  if (model.feature_dim != bank.size() * scheme.size())
    throw Error(ErrorCode::ContractMismatch, "model feature dimension does not match bank x scheme");
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr std::string_view kModelMagic = "MLDM1";

void put_vec(std::ostream& os, const std::vector<double>& v) {
  binio::put_u32(os, static_cast<std::uint32_t>(v.size()));
  for (double x : v) binio::put_f64(os, x);
}

std::vector<double> get_vec(std::istream& is, std::size_t expect) {
  const std::uint32_t n = binio::get_u32(is);
  if (n != expect) throw Error(ErrorCode::MalformedInput, "model vector has unexpected length");
  std::vector<double> v(n);
  for (double& x : v) x = binio::get_f64(is);
  return v;
}

}  // namespace

void write_model(std::ostream& os, const DetectorModel& m) {
  os.write(kModelMagic.data(), static_cast<std::streamsize>(kModelMagic.size()));
  binio::put_u64(os, m.bank_hash);
  binio::put_string(os, PoolingScheme::from_name(m.scheme).label());
  binio::put_u64(os, m.feature_dim);
  binio::put_string(os, m.train_config.to_json());
  binio::put_u32(os, static_cast<std::uint32_t>(m.categories.size()));
  for (const CategoryModel& c : m.categories) {
    binio::put_string(os, c.category);
    put_vec(os, c.svm.weights);
    binio::put_f64(os, c.svm.bias);
    binio::put_u8(os, c.regressor ? 1 : 0);
    if (c.regressor) {
      binio::put_f64(os, c.regressor->ridge_lambda);
      put_vec(os, c.regressor->mean);
      put_vec(os, c.regressor->scale);
      for (int k = 0; k < 4; ++k) {
        put_vec(os, c.regressor->weights[k]);
        binio::put_f64(os, c.regressor->bias[k]);
      }
    }
  }
  if (!os) throw Error(ErrorCode::Io, "failed writing model");
}

DetectorModel read_model(std::istream& is) {
  binio::expect_magic(is, kModelMagic);
  DetectorModel m;
  m.bank_hash = binio::get_u64(is);
  m.scheme = PoolingScheme::parse(binio::get_string(is)).name;
  m.feature_dim = binio::get_u64(is);
  m.train_config = TrainConfig::from_json(binio::get_string(is));
  const std::uint32_t n = binio::get_u32(is);
  m.categories.resize(n);
  for (CategoryModel& c : m.categories) {
    c.category = binio::get_string(is);
    c.svm.weights = get_vec(is, m.feature_dim);
    c.svm.bias = binio::get_f64(is);
    if (binio::get_u8(is) != 0) {
      BoxRegressor r;
      r.ridge_lambda = binio::get_f64(is);
      r.mean = get_vec(is, m.feature_dim);
      r.scale = get_vec(is, m.feature_dim);
      for (int k = 0; k < 4; ++k) {
        r.weights[k] = get_vec(is, m.feature_dim);
        r.bias[k] = binio::get_f64(is);
      }
      c.regressor = std::move(r);
    }
  }
  return m;
}

void save_model(const std::filesystem::path& path, const DetectorModel& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_model(out, m);
}

DetectorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open model " + path.string());
  return read_model(in);
}

std::uint64_t model_hash(const DetectorModel& m) {
  std::ostringstream os(std::ios::binary);
  write_model(os, m);
  return binio::fnv1a(os.str());
}

// ---------------------------------------------------------------------------
// Detection

namespace {

template <typename RowAt>
DetectResult post_process(const std::string& image_id, int img_w, int img_h, std::span<const Box> boxes, RowAt&& row,
                          const DetectorModel& model, const DetectConfig& cfg) {
  DetectResult out;
  for (std::size_t c = 0; c < model.categories.size(); ++c) {
    const CategoryModel& cm = model.categories[c];
    const bool refine = cfg.apply_regression && cm.regressor.has_value();
    std::vector<Detection> cands;
    for (std::size_t p = 0; p < boxes.size(); ++p) {
      const auto f = row(p);
      const double s = cm.svm.score(f);
      if (s < cfg.score_floor) continue;
      Detection d{image_id, static_cast<int>(c), s, boxes[p], std::nullopt};
      if (refine) {
        std::vector<double> fd(f.begin(), f.end());
        const Box r = cm.regressor->apply(fd, boxes[p]);
        try {
          d.refined = clip(r, img_w, img_h);
        } catch (const Error&) {
          d.refined = boxes[p];
        }
      }
      cands.push_back(std::move(d));
    }
    auto kept = nms(std::move(cands), cfg.nms_threshold);
    out.detections.insert(out.detections.end(), std::make_move_iterator(kept.begin()),
                          std::make_move_iterator(kept.end()));
  }
  return out;
}

}  // namespace

DetectResult detect_image(const PyramidSet& pyramids, const std::string& image_id, std::span<const Box> proposals,
                          const FeaturizerContext& ctx, const DetectorModel& model, const DetectConfig& cfg) {
  if (model.feature_dim != ctx.dimension())
    throw Error(ErrorCode::ContractMismatch, "model feature dimension does not match the featurizer");
  const int w = pyramids.image().width;
  const int h = pyramids.image().height;
  std::vector<Box> boxes;
  std::vector<std::vector<double>> feats;
  std::size_t skipped = 0;
  if (!proposals.empty()) {
    const ImageFeaturizer featurizer(pyramids, ctx);
    for (const Box& b : proposals) {
      Box c;
      try {
        c = clip(b, w, h);
        feats.push_back(featurizer.featurize(c).values);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::RegionTooSmall && e.code() != ErrorCode::EmptyAfterClip) throw;
        ++skipped;
        continue;
      }
      boxes.push_back(c);
    }
  }
  DetectResult r = post_process(
      image_id, w, h, boxes, [&](std::size_t i) { return std::span<const double>(feats[i]); }, model, cfg);
  r.skipped_proposals = skipped;
  return r;
}

DetectResult detect_from_features(const std::string& image_id, int img_w, int img_h, std::span<const Box> boxes,
                                  std::span<const float> values, const DetectorModel& model,
                                  const DetectConfig& cfg) {
  const std::size_t dim = model.feature_dim;
  if (values.size() != boxes.size() * dim)
    throw Error(ErrorCode::ContractMismatch, "feature matrix does not match the proposal count and model dimension");
  return post_process(
      image_id, img_w, img_h, boxes,
      [&](std::size_t i) { return std::span<const float>(values.data() + i * dim, dim); }, model, cfg);
}

// ---------------------------------------------------------------------------
// Detections file

void write_detections(std::ostream& os, const DetectionsHeader& header, std::span<const Detection> dets,
                      std::span<const std::string> categories) {
  os << "# mldetect-detections model=" << binio::hex64(header.model_hash)
     << " bank=" << binio::hex64(header.bank_hash) << '\n';
  char buf[256];
  for (const Detection& d : dets) {
    std::snprintf(buf, sizeof buf, "\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g", d.score, d.box.x1, d.box.y1, d.box.w, d.box.h);
    os << d.image_id << '\t' << categories[static_cast<std::size_t>(d.category)] << buf;
    if (d.refined) {
      std::snprintf(buf, sizeof buf, "\t%.9g\t%.9g\t%.9g\t%.9g\n", d.refined->x1, d.refined->y1, d.refined->w,
                    d.refined->h);
      os << buf;
    } else {
      os << "\t-\n";
    }
  }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t t = line.find('\t', start);
    out.push_back(line.substr(start, t == std::string::npos ? std::string::npos : t - start));
    if (t == std::string::npos) break;
    start = t + 1;
  }
  return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::MalformedInput, "detections line " + std::to_string(line_no) + ": bad number '" + s + "'");
}

std::uint64_t parse_hash(const std::string& header, std::string_view key) {
  const std::string k = std::string(key) + "=";
  const std::size_t p = header.find(k);
  if (p == std::string::npos) return 0;
  return std::stoull(header.substr(p + k.size(), 16), nullptr, 16);
}

}  // namespace

DetectionsFile read_detections(std::istream& is, std::span<const std::string> categories) {
  DetectionsFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("mldetect-detections") != std::string::npos) {
        out.header.model_hash = parse_hash(line, "model");
        out.header.bank_hash = parse_hash(line, "bank");
      }
      continue;
    }
    const auto f = split_tabs(line);
    if (f.size() != 8 && f.size() != 11)
      throw Error(ErrorCode::MalformedInput, "detections line " + std::to_string(line_no) + ": expected 8 or 11 fields");
    Detection d;
    d.image_id = f[0];
    const auto it = std::find(categories.begin(), categories.end(), f[1]);
    if (it == categories.end())
      throw Error(ErrorCode::UnknownCategory, "detections line " + std::to_string(line_no) + ": category '" + f[1] + "'");
    d.category = static_cast<int>(it - categories.begin());
    d.score = parse_number(f[2], line_no);
    d.box = {parse_number(f[3], line_no), parse_number(f[4], line_no), parse_number(f[5], line_no),
             parse_number(f[6], line_no)};
    if (f.size() == 11)
      d.refined = Box{parse_number(f[7], line_no), parse_number(f[8], line_no), parse_number(f[9], line_no),
                      parse_number(f[10], line_no)};
    else if (f[7] != "-")
      throw Error(ErrorCode::MalformedInput, "detections line " + std::to_string(line_no) + ": expected '-'");
    out.detections.push_back(std::move(d));
  }
  return out;
}

}  // namespace mldetect
