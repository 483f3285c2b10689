// mldetect: mine element banks, train detectors, detect, evaluate and
// visualize from the command line.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "mldetect/binary_io.hpp"
#include "mldetect/detector.hpp"
#include "mldetect/error.hpp"
#include "mldetect/eval.hpp"
#include "mldetect/io/image_io.hpp"
#include "mldetect/io/manifest.hpp"
#include "mldetect/mining.hpp"
#include "mldetect/pipeline.hpp"
#include "mldetect/synthetic.hpp"
#include "mldetect/visualize.hpp"

namespace fs = std::filesystem;
using namespace mldetect;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool quiet = false;
};

Common common;

void log(const std::string& msg) {
  if (!common.quiet) std::cerr << msg << '\n';
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void check_scheme_flag(const std::string& s) { (void)PoolingScheme::parse(s); }

// ---------------------------------------------------------------------------

struct MineArgs {
  std::string manifest;
  std::string out;
  std::size_t elements = 100;
  std::size_t localization = 50;
  int spo = 4;
  bool mine_flips = true;
  std::size_t max_positives = 3000;
  std::size_t negatives = 6000;
};

void cmd_mine(const MineArgs& a) {
  Stopwatch sw;
  const Dataset train = load_dataset(read_manifest(a.manifest), {true, false, {}}).subset(Split::Train);
  log("mine: " + std::to_string(train.images.size()) + " training images");
  const PyramidConfig pc{a.spo, 64, true};
  const auto cache = PyramidCache::from_environment();
  const auto pyramids = build_pyramid_sets(train, pc, false, cache);
  std::vector<PyramidSet> flipped;
  if (a.mine_flips) flipped = build_pyramid_sets(train, pc, true, cache);

  BankMiningConfig cfg;
  cfg.n_discriminative = a.elements;
  cfg.n_localization = a.localization;
  cfg.max_positives = a.max_positives;
  cfg.negatives = a.negatives;
  cfg.mining.seed = common.seed;
  cfg.sampling.use_flips = a.mine_flips;
  const PatchSource source(train, pyramids, flipped, cfg.sampling);
  const BankMiningResult r = mine_bank(train, source, cfg, a.spo);

  std::printf("%-14s %8s %8s %8s %6s %6s %10s %10s\n", "category", "pos", "loc_pos", "neg", "disc", "loc", "best",
              "median");
  for (const auto& s : r.summaries) {
    std::printf("%-14s %8zu %8zu %8zu %6zu %6zu %10.4f %10.4f\n", s.category.c_str(), s.positives,
                s.localization_positives, s.negatives, s.discriminative, s.localization, s.best_score,
                s.median_score);
    for (const auto& e : s.errors) std::printf("  warning: %s\n", e.c_str());
  }
  save_bank(a.out, r.bank);
  log("mine: wrote " + std::to_string(r.bank.size()) + " elements to " + a.out + " (bank " +
      binio::hex64(bank_hash(r.bank)) + ") in " + fmt("%.1f", sw.seconds()) + " s");
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string bank;
  std::string out;
  std::string scheme = "five";
  int spo = 4;
  double c = TrainConfig{}.svm.c;
  bool regressor = true;
  bool flips = true;
};

void cmd_train(const TrainArgs& a) {
  Stopwatch sw;
  const ElementBank bank = load_bank(a.bank);
  const PoolingScheme& scheme = PoolingScheme::parse(a.scheme);
  const Dataset train = load_dataset(read_manifest(a.manifest), {true, true, {Split::Train}}).subset(Split::Train);
  const PyramidConfig pc{a.spo, 64, true};
  const auto cache = PyramidCache::from_environment();
  const auto pyramids = build_pyramid_sets(train, pc, false, cache);
  std::vector<PyramidSet> flipped;
  if (a.flips) flipped = build_pyramid_sets(train, pc, true, cache);

  const FeaturizerContext ctx(bank, scheme);
  log("train: featurizing " + std::to_string(train.images.size()) + " images, " + std::to_string(ctx.dimension()) +
      "-dim features");
  const TrainingFeatures feats = featurize_training_set(train, pyramids, flipped, ctx, common.jobs);

  TrainConfig cfg;
  cfg.svm.c = a.c;
  cfg.fit_regressor = a.regressor;
  cfg.use_flips = a.flips;
  cfg.scales_per_octave = a.spo;
  cfg.seed = common.seed;
  std::vector<CategoryTrainingReport> reports;
  const DetectorModel model = train_detector(train, feats, bank_hash(bank), scheme.name, cfg, &reports, common.jobs);

  std::printf("%-14s %6s %9s %8s %6s %7s\n", "category", "pos", "eligible", "initial", "hard", "bbpairs");
  for (const auto& r : reports) {
    std::printf("%-14s %6zu %9zu %8zu %6zu %7zu\n", r.category.c_str(), r.positives, r.eligible_negatives,
                r.initial_negatives, r.hard_negatives, r.regression_pairs);
    if (!r.note.empty()) std::printf("  note: %s\n", r.note.c_str());
  }
  save_model(a.out, model);
  log("train: wrote " + a.out + " (model " + binio::hex64(model_hash(model)) + ") in " + fmt("%.1f", sw.seconds()) +
      " s");
}

// ---------------------------------------------------------------------------

struct DetectArgs {
  std::string manifest;
  std::string bank;
  std::string model;
  std::string out;
  std::string scheme;
  std::string split = "test";
  int spo = 8;
  double nms = 0.3;
  double floor = -1.1;
  bool regression = true;
};

void cmd_detect(const DetectArgs& a) {
  Stopwatch sw;
  const ElementBank bank = load_bank(a.bank);
  const DetectorModel model = load_model(a.model);
  const PoolingScheme& scheme =
      a.scheme.empty() ? PoolingScheme::from_name(model.scheme) : PoolingScheme::parse(a.scheme);
  check_contract(model, bank, scheme);

  const Split split = parse_split(a.split);
  const Dataset ds = load_dataset(read_manifest(a.manifest), {true, true, {split}}).subset(split);
  const auto pyramids = build_pyramid_sets(ds, {a.spo, 64, true}, false, PyramidCache::from_environment());
  const FeaturizerContext ctx(bank, scheme);
  const DetectConfig cfg{a.nms, a.floor, a.regression};
  const DatasetDetections d = detect_dataset(ds, pyramids, ctx, model, cfg, common.jobs);

  std::ofstream out(a.out, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + a.out);
  write_detections(out, {model_hash(model), model.bank_hash}, d.detections, ds.categories);
  log("detect: " + std::to_string(d.detections.size()) + " detections on " + std::to_string(ds.images.size()) +
      " images (" + std::to_string(d.skipped_proposals) + " proposals too small) in " + fmt("%.1f", sw.seconds()) +
      " s");
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string detections;
  std::string manifest;
  std::string protocol = "11point";
  std::string split = "test";
  std::string json_out;
  std::string model;
  double iou = 0.5;
};

void cmd_eval(const EvalArgs& a) {
  const Manifest m = read_manifest(a.manifest);
  const Split split = parse_split(a.split);
  const Dataset ds = load_dataset(m, {false, false, {}}).subset(split);
  std::ifstream in(a.detections);
  if (!in) throw Error(ErrorCode::Io, "cannot open detections " + a.detections);
  const DetectionsFile df = read_detections(in, ds.categories);
  if (!a.model.empty()) {
    const std::uint64_t h = model_hash(load_model(a.model));
    if (df.header.model_hash != h)
      throw Error(ErrorCode::ContractMismatch, "detections were produced by model " +
                                                   binio::hex64(df.header.model_hash) + ", not " + binio::hex64(h));
  }
  std::vector<GroundTruthRecord> gt;
  for (const auto& img : ds.images) gt.push_back(to_ground_truth(img, ds.categories));
  const EvalReport rep = evaluate(df.detections, gt, ds.categories, {a.iou, parse_ap_style(a.protocol)});
  std::cout << rep.to_table();
  if (!a.json_out.empty()) {
    std::ofstream j(a.json_out, std::ios::trunc);
    if (!j) throw Error(ErrorCode::Io, "cannot write " + a.json_out);
    j << rep.to_json() << '\n';
  }
}

// ---------------------------------------------------------------------------

struct VisualizeArgs {
  std::string bank;
  std::string manifest;
  std::string out;
  std::string model;
  std::size_t top = 10;
};

std::string element_file(const Element& e) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "element_%05u.png", e.id);
  return buf;
}

void cmd_visualize(const VisualizeArgs& a) {
  const ElementBank bank = load_bank(a.bank);
  const Dataset train = load_dataset(read_manifest(a.manifest), {true, false, {}}).subset(Split::Train);
  const auto pyramids = build_pyramid_sets(train, {bank.descriptor.scales_per_octave, 64, true}, false,
                                           PyramidCache::from_environment());
  const TemplateMatrix t(bank.elements);
  const auto firings = top_firings(pyramids, t, a.top);
  fs::create_directories(a.out);

  std::vector<RasterImage> averages;
  std::ofstream index(fs::path(a.out) / "index.txt", std::ios::trunc);
  index << "# tile\tid\tcategory\tkind\tfirings\tmining_score\n";
  for (std::size_t e = 0; e < bank.size(); ++e) {
    const Element& el = bank.elements[e];
    averages.push_back(average_firings(firings[e], pyramids));
    write_image(fs::path(a.out) / element_file(el), averages.back());
    index << e << '\t' << el.id << '\t' << bank.categories[static_cast<std::size_t>(el.category)] << '\t'
          << (el.kind == ElementKind::Discriminative ? "discriminative" : "localization") << '\t'
          << firings[e].size() << '\t' << fmt("%.6f", el.mining_score) << '\n';
  }
  write_image(fs::path(a.out) / "index.png", tile_sheet(averages, 10));

  if (!a.model.empty()) {
    const DetectorModel model = load_model(a.model);
    const PoolingScheme& scheme = PoolingScheme::from_name(model.scheme);
    check_contract(model, bank, scheme);
    for (const CategoryModel& cm : model.categories) {
      const ExtremeElements ex = extreme_elements(cm.svm, scheme.size(), 3);
      std::vector<RasterImage> tiles;
      std::ofstream txt(fs::path(a.out) / (cm.category + "_weights.txt"), std::ios::trunc);
      for (const auto* list : {&ex.most_positive, &ex.most_negative})
        for (const WeightedElement& w : *list) {
          tiles.push_back(averages[w.element]);
          txt << (list == &ex.most_positive ? "positive" : "negative") << '\t' << bank.elements[w.element].id << '\t'
              << w.region << '\t' << fmt("%.6g", w.weight) << '\n';
        }
      write_image(fs::path(a.out) / (cm.category + "_weights.png"), tile_sheet(tiles, 3));
    }
  }
  log("visualize-elements: wrote " + std::to_string(bank.size()) + " element averages to " + a.out);
}

// ---------------------------------------------------------------------------

struct ReconstructArgs {
  std::string image;
  std::string image_id;
  std::string detections;
  std::string bank;
  std::string model;
  std::string averages;
  std::string out;
  std::size_t max_detections = 1;
  std::size_t elements = 20;
  int spo = 8;
};

void cmd_reconstruct(const ReconstructArgs& a) {
  const ElementBank bank = load_bank(a.bank);
  const DetectorModel model = load_model(a.model);
  const PoolingScheme& scheme = PoolingScheme::from_name(model.scheme);
  check_contract(model, bank, scheme);
  RasterImage img = read_image(a.image);
  const std::string id = a.image_id.empty() ? fs::path(a.image).stem().string() : a.image_id;

  std::ifstream in(a.detections);
  if (!in) throw Error(ErrorCode::Io, "cannot open detections " + a.detections);
  std::vector<std::string> names;
  for (const auto& c : model.categories) names.push_back(c.category);
  DetectionsFile df = read_detections(in, names);
  std::vector<Detection> mine;
  for (auto& d : df.detections)
    if (d.image_id == id) mine.push_back(std::move(d));
  std::stable_sort(mine.begin(), mine.end(), detection_before);
  if (mine.size() > a.max_detections) mine.resize(a.max_detections);

  const int w = img.width, h = img.height;
  const PyramidSet pyr(std::move(img), {a.spo, 64, true});
  const FeaturizerContext ctx(bank, scheme);
  const ImageFeaturizer featurizer(pyr, ctx);
  std::map<std::size_t, RasterImage> averages;
  std::vector<Transfer> transfers;
  std::vector<std::pair<std::size_t, Contribution>> picked;
  for (const Detection& d : mine) {
    const auto firings = featurizer.explain(d.box);
    for (const Contribution& c :
         top_contributions(firings, model.categories[static_cast<std::size_t>(d.category)].svm, scheme.size(),
                           a.elements))
      picked.emplace_back(c.element, c);
  }
  for (const auto& [e, c] : picked) {
    if (!averages.count(e)) {
      const fs::path p = fs::path(a.averages) / element_file(bank.elements[e]);
      if (!fs::exists(p))
        throw Error(ErrorCode::MissingAverages, "no average image for element " +
                                                    std::to_string(bank.elements[e].id) + " (expected " + p.string() +
                                                    "); run visualize-elements first");
      averages.emplace(e, read_image(p));
    }
  }
  for (const auto& [e, c] : picked) transfers.push_back({&averages.at(e), c.firing.footprint, c.value});
  write_image(a.out, blend_transfers(w, h, transfers));
  log("reconstruct: blended " + std::to_string(transfers.size()) + " transfers from " + std::to_string(mine.size()) +
      " detections into " + a.out);
}

// ---------------------------------------------------------------------------

struct SyntheticArgs {
  std::string out;
  SyntheticConfig cfg;
};

void cmd_make_synthetic(SyntheticArgs a) {
  a.cfg.seed = common.seed;
  const Dataset ds = make_synthetic(a.cfg);
  save_dataset(a.out, ds);
  log("make-synthetic: wrote " + std::to_string(ds.images.size()) + " images to " + a.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mid-level element detector: mining, training, detection and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", common.seed, "Root seed for every random choice")->capture_default_str();
  app.add_option("--jobs", common.jobs, "Worker threads")->capture_default_str();
  app.add_flag("--quiet", common.quiet, "Suppress progress messages");

  MineArgs mine;
  auto* m = app.add_subcommand("mine", "Mine an element bank from the training split");
  m->add_option("--manifest", mine.manifest)->required();
  m->add_option("--out", mine.out, "Bank file to write")->required();
  m->add_option("--elements", mine.elements, "Discriminative elements per category")->capture_default_str();
  m->add_option("--localization", mine.localization, "Localization elements per category")->capture_default_str();
  m->add_option("--scales-per-octave", mine.spo)->capture_default_str();
  m->add_option("--max-positives", mine.max_positives)->capture_default_str();
  m->add_option("--negatives", mine.negatives)->capture_default_str();
  m->add_flag("--mine-flips,!--no-mine-flips", mine.mine_flips, "Also mine from mirrored images")
      ->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train per-category classifiers and box regressors");
  t->add_option("--manifest", train.manifest)->required();
  t->add_option("--bank", train.bank)->required();
  t->add_option("--out", train.out, "Model file to write")->required();
  t->add_option("--scheme", train.scheme, "Pooling scheme: five or seven")
      ->check([](const std::string& s) {
        try {
          check_scheme_flag(s);
          return std::string();
        } catch (const std::exception& e) {
          return std::string(e.what());
        }
      })
      ->capture_default_str();
  t->add_option("--scales-per-octave", train.spo)->capture_default_str();
  t->add_option("--svm-c", train.c, "Hinge-loss weight")->capture_default_str();
  t->add_flag("--regressor,!--no-regressor", train.regressor, "Fit box regressors")->capture_default_str();
  t->add_flag("--flips,!--no-flips", train.flips, "Use mirrored ground truth as positives")->capture_default_str();

  DetectArgs det;
  auto* d = app.add_subcommand("detect", "Detect objects in one split of a manifest");
  d->add_option("--manifest", det.manifest)->required();
  d->add_option("--bank", det.bank)->required();
  d->add_option("--model", det.model)->required();
  d->add_option("--out", det.out, "Detections file to write")->required();
  d->add_option("--scheme", det.scheme, "Must match the model when given");
  d->add_option("--split", det.split)->capture_default_str();
  d->add_option("--scales-per-octave", det.spo)->capture_default_str();
  d->add_option("--nms", det.nms, "NMS IoU threshold")->capture_default_str();
  d->add_option("--score-floor", det.floor)->capture_default_str();
  d->add_flag("--regression,!--no-regression", det.regression, "Apply box regressors")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compute per-category AP and mAP");
  e->add_option("--detections", ev.detections)->required();
  e->add_option("--manifest", ev.manifest)->required();
  e->add_option("--protocol", ev.protocol, "11point or continuous")->capture_default_str();
  e->add_option("--split", ev.split)->capture_default_str();
  e->add_option("--iou", ev.iou)->capture_default_str();
  e->add_option("--json", ev.json_out, "Also write the report as JSON");
  e->add_option("--model", ev.model, "Verify the detections were produced by this model");

  VisualizeArgs vis;
  auto* v = app.add_subcommand("visualize-elements", "Average each element's top training firings");
  v->add_option("--bank", vis.bank)->required();
  v->add_option("--manifest", vis.manifest)->required();
  v->add_option("--out", vis.out, "Output directory")->required();
  v->add_option("--model", vis.model, "Also write per-category weight sheets");
  v->add_option("--top", vis.top)->capture_default_str();

  ReconstructArgs rec;
  auto* r = app.add_subcommand("reconstruct", "Rebuild detections from element averages");
  r->add_option("--image", rec.image)->required();
  r->add_option("--image-id", rec.image_id, "Id used in the detections file (default: file stem)");
  r->add_option("--detections", rec.detections)->required();
  r->add_option("--bank", rec.bank)->required();
  r->add_option("--model", rec.model)->required();
  r->add_option("--averages", rec.averages, "Directory written by visualize-elements")->required();
  r->add_option("--out", rec.out)->required();
  r->add_option("--max-detections", rec.max_detections)->capture_default_str();
  r->add_option("--elements", rec.elements)->capture_default_str();
  r->add_option("--scales-per-octave", rec.spo)->capture_default_str();

  SyntheticArgs syn;
  auto* s = app.add_subcommand("make-synthetic", "Write the built-in shapes corpus");
  s->add_option("--out", syn.out, "Output directory")->required();
  s->add_option("--train", syn.cfg.train_images)->capture_default_str();
  s->add_option("--test", syn.cfg.test_images)->capture_default_str();
  s->add_option("--width", syn.cfg.width)->capture_default_str();
  s->add_option("--height", syn.cfg.height)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*m) cmd_mine(mine);
    if (*t) cmd_train(train);
    if (*d) cmd_detect(det);
    if (*e) cmd_eval(ev);
    if (*v) cmd_visualize(vis);
    if (*r) cmd_reconstruct(rec);
    if (*s) cmd_make_synthetic(syn);
  } catch (const Error& err) {
    std::cerr << "mldetect: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "mldetect: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
