#include "mldetect/mining.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mldetect/error.hpp"
#include "mldetect/rng.hpp"

namespace mldetect {

PatchSource::PatchSource(const Dataset& ds, std::span<const PyramidSet> pyramids, std::span<const PyramidSet> flipped,
                         SamplingConfig cfg)
    : ds_(ds), pyramids_(pyramids), flipped_(flipped), cfg_(cfg) {
  if (pyramids_.size() != ds_.images.size())
    throw Error(ErrorCode::MalformedInput, "patch source needs one pyramid set per image");
  if (!flipped_.empty() && flipped_.size() != pyramids_.size())
    throw Error(ErrorCode::MalformedInput, "flipped pyramids must parallel the originals");
}

const FeaturePyramid& PatchSource::pyramid_of(const WindowRef& ref) const {
  const PyramidSet& set = ref.flipped ? flipped_[ref.image] : pyramids_[ref.image];
  return ref.upsampled ? set.upsampled() : set.normal();
}

PatchSample PatchSource::cut(const WindowRef& ref, Polarity polarity) const {
  const FeaturePyramid& pyr = pyramid_of(ref);
  const FeatureGrid& g = pyr.levels[ref.level].grid;
  PatchSample s;
  s.feature.resize(kTemplateSize);
  for (int dr = 0; dr < kTemplateCells; ++dr)
    std::memcpy(s.feature.data() + dr * kTemplateRowSize, g.cell(ref.row + dr, ref.col), sizeof(float) * kTemplateRowSize);
  const double fx = pyr.x_factor(ref.level);
  const double fy = pyr.y_factor(ref.level);
  constexpr double span = kCellSize * (kTemplateCells + 2);
  s.location = {kCellSize * ref.col / fx, kCellSize * ref.row / fy, span / fx, span / fy};
  s.source_image = ref.image;
  s.polarity = polarity;
  s.flipped = ref.flipped;
  return s;
}

std::vector<PatchSource::WindowRef> PatchSource::positive_windows(int category, std::optional<double> min_iou) const {
  std::vector<WindowRef> refs;
  constexpr double span = kCellSize * (kTemplateCells + 2);
  constexpr double eps = 1e-9;
  for (std::size_t i = 0; i < ds_.images.size(); ++i) {
    const ImageRecord& img = ds_.images[i];
    for (const Annotation& a : img.objects) {
      if (a.category != category || a.difficult) continue;
      for (int flip = 0; flip < 2; ++flip) {
        if (flip == 1 && (!cfg_.use_flips || flipped_.empty())) break;
        const PyramidSet& set = flip ? flipped_[i] : pyramids_[i];
        const Box gt = flip ? flip_horizontal(a.box, set.image().width) : a.box;
        const Box region = dilate(gt, cfg_.dilation);
        const bool up = set.wants_upsampled(gt);
        const FeaturePyramid& pyr = up ? set.upsampled() : set.normal();
        for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
          const FeatureGrid& g = pyr.levels[l].grid;
          const double fx = pyr.x_factor(l);
          const double fy = pyr.y_factor(l);
          const int c_lo = std::max(0, static_cast<int>(std::ceil(region.x1 * fx / kCellSize - eps)));
          const int r_lo = std::max(0, static_cast<int>(std::ceil(region.y1 * fy / kCellSize - eps)));
          const int c_hi = std::min(g.cols - kTemplateCells,
                                    static_cast<int>(std::floor((region.x2() * fx - span) / kCellSize + eps)));
          const int r_hi = std::min(g.rows - kTemplateCells,
                                    static_cast<int>(std::floor((region.y2() * fy - span) / kCellSize + eps)));
          for (int r = r_lo; r <= r_hi; ++r)
            for (int c = c_lo; c <= c_hi; ++c) {
              if (min_iou) {
                const Box fp{kCellSize * c / fx, kCellSize * r / fy, span / fx, span / fy};
                if (!(iou(fp, gt) > *min_iou)) continue;
              }
              refs.push_back({static_cast<int>(i), flip == 1, up, static_cast<int>(l), r, c});
            }
        }
      }
    }
  }
  auto key = [](const WindowRef& w) { return std::tuple(w.image, w.flipped, w.upsampled, w.level, w.row, w.col); };
  std::sort(refs.begin(), refs.end(), [&](const WindowRef& a, const WindowRef& b) { return key(a) < key(b); });
  refs.erase(std::unique(refs.begin(), refs.end(), [&](const WindowRef& a, const WindowRef& b) { return key(a) == key(b); }),
             refs.end());
  return refs;
}

std::vector<PatchSample> PatchSource::sample(int category, Polarity polarity, std::size_t count,
                                             std::optional<double> min_iou, std::uint64_t seed,
                                             bool allow_fewer) const {
  std::mt19937_64 rng(seed);
  std::vector<PatchSample> out;
  auto shortfall = [&](std::size_t available) {
    std::ostringstream msg;
    msg << "category '" << ds_.categories.at(category) << "' has " << available << " distinct "
        << (polarity == Polarity::Positive ? "positive" : "negative") << " windows, " << count << " requested";
    throw Error(ErrorCode::InsufficientData, msg.str());
  };

  if (polarity == Polarity::Positive) {
    std::vector<WindowRef> refs = positive_windows(category, min_iou);
    if (count > refs.size() && !allow_fewer) shortfall(refs.size());
    std::vector<WindowRef> chosen;
    if (count == 0 || count >= refs.size()) {
      chosen = std::move(refs);
    } else {
      std::sample(refs.begin(), refs.end(), std::back_inserter(chosen), count, rng);
    }
    out.reserve(chosen.size());
    for (const auto& ref : chosen) out.push_back(cut(ref, polarity));
    return out;
  }

  // Negatives: every window of every image lacking the category, indexed by
  // a running prefix over (image, pyramid, level).
  struct Block {
    int image;
    bool upsampled;
    int level;
    int rows;
    int cols;
    std::size_t begin;
  };
  std::vector<Block> blocks;
  std::size_t total = 0;
  for (std::size_t i = 0; i < ds_.images.size(); ++i) {
    if (ds_.images[i].has_category(category)) continue;
    const PyramidSet& set = pyramids_[i];
    for (int up = 0; up < 2; ++up) {
      if (up == 1 && !set.config().upsample_small) break;
      const FeaturePyramid& pyr = up ? set.upsampled() : set.normal();
      for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
        const FeatureGrid& g = pyr.levels[l].grid;
        const int rows = g.rows - kTemplateCells + 1;
        const int cols = g.cols - kTemplateCells + 1;
        if (rows < 1 || cols < 1) continue;
        blocks.push_back({static_cast<int>(i), up == 1, static_cast<int>(l), rows, cols, total});
        total += static_cast<std::size_t>(rows) * cols;
      }
    }
  }
  if (count > total && !allow_fewer) shortfall(total);
  std::vector<std::size_t> chosen;
  if (count == 0 || count >= total) {
    chosen.resize(total);
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  } else {
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), count, rng);
  }
  out.reserve(chosen.size());
  std::size_t b = 0;
  for (std::size_t idx : chosen) {
    while (b + 1 < blocks.size() && blocks[b + 1].begin <= idx) ++b;
    const Block& blk = blocks[b];
    const std::size_t local = idx - blk.begin;
    const WindowRef ref{blk.image, false, blk.upsampled, blk.level, static_cast<int>(local / blk.cols),
                        static_cast<int>(local % blk.cols)};
    out.push_back(cut(ref, polarity));
  }
  return out;
}

std::vector<PatchSample> sample_patches(const Dataset& ds, int category, Polarity polarity, std::size_t count,
                                        std::optional<double> min_iou, const PyramidConfig& pyr_cfg,
                                        const SamplingConfig& cfg, std::uint64_t seed, bool allow_fewer) {
  std::vector<PyramidSet> pyramids;
  std::vector<PyramidSet> flipped;
  pyramids.reserve(ds.images.size());
  for (const auto& img : ds.images) pyramids.emplace_back(img.image, pyr_cfg);
  if (cfg.use_flips && polarity == Polarity::Positive) {
    flipped.reserve(ds.images.size());
    for (const auto& img : ds.images) flipped.emplace_back(flip_horizontal(img.image), pyr_cfg);
  }
  PatchSource source(ds, pyramids, flipped, cfg);
  return source.sample(category, polarity, count, min_iou, seed, allow_fewer);
}

double weight_cosine(const Element& a, const Element& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (int i = 0; i < kTemplateSize; ++i) {
    ab += static_cast<double>(a.weights[i]) * b.weights[i];
    aa += static_cast<double>(a.weights[i]) * a.weights[i];
    bb += static_cast<double>(b.weights[i]) * b.weights[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

double jaccard(std::span<const FiringRef> a, std::span<const FiringRef> b) {
  std::vector<FiringRef> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  std::vector<FiringRef> inter;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  const std::size_t uni = sa.size() + sb.size() - inter.size();
  return uni == 0 ? 0.0 : static_cast<double>(inter.size()) / uni;
}

std::vector<std::size_t> dedupe(std::span<const Element> elements, std::span<const std::vector<FiringRef>> firings,
                                double max_cosine, double max_firing_overlap) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    bool duplicate = false;
    for (std::size_t j : kept) {
      if (weight_cosine(elements[i], elements[j]) > max_cosine ||
          (!firings.empty() && jaccard(firings[i], firings[j]) > max_firing_overlap)) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix stack(std::span<const PatchSample> patches, std::span<const std::size_t> rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), kTemplateSize);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = patches[rows[i]].feature;
    for (int k = 0; k < kTemplateSize; ++k) m(static_cast<Eigen::Index>(i), k) = f[k];
  }
  return m;
}

// Indices of the `m` largest entries of `scores`, ties to the lower index.
std::vector<Eigen::Index> top_indices(const Eigen::Ref<const Eigen::VectorXd>& scores, std::size_t m) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  m = std::min(m, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b) || (scores(a) == scores(b) && a < b); });
  idx.resize(m);
  return idx;
}

}  // namespace

std::vector<MinedElement> mine_elements(std::span<const PatchSample> pos, std::span<const PatchSample> neg,
                                        std::size_t n, const MiningConfig& cfg) {
  if (n == 0) return {};
  if (pos.size() < n || neg.size() < 2) {
    std::ostringstream msg;
    msg << pos.size() << " positives / " << neg.size() << " negatives cannot yield " << n << " elements";
    throw Error(ErrorCode::InsufficientData, msg.str());
  }

  // Image-level 50/50 split: refit on half A, rank on held-out half B.
  std::vector<int> image_ids;
  for (const auto& p : pos) image_ids.push_back(p.source_image);
  for (const auto& p : neg) image_ids.push_back(p.source_image);
  std::sort(image_ids.begin(), image_ids.end());
  image_ids.erase(std::unique(image_ids.begin(), image_ids.end()), image_ids.end());
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(image_ids.begin(), image_ids.end(), rng);
  std::set<int> half_a(image_ids.begin(), image_ids.begin() + static_cast<std::ptrdiff_t>((image_ids.size() + 1) / 2));
  const bool by_image = image_ids.size() >= 2;
  auto in_a = [&](const PatchSample& p, std::size_t i) { return by_image ? half_a.count(p.source_image) > 0 : i % 2 == 0; };

  std::vector<std::size_t> pos_a, pos_b, neg_a, neg_b;
  for (std::size_t i = 0; i < pos.size(); ++i) (in_a(pos[i], i) ? pos_a : pos_b).push_back(i);
  for (std::size_t i = 0; i < neg.size(); ++i) (in_a(neg[i], i) ? neg_a : neg_b).push_back(i);
  if (pos_a.size() < n || neg_a.size() < 2 || pos_b.size() + neg_b.size() == 0) {
    std::ostringstream msg;
    msg << "mining split leaves " << pos_a.size() << " refit positives, " << neg_a.size() << " refit negatives and "
        << pos_b.size() + neg_b.size() << " held-out patches for " << n << " elements";
    throw Error(ErrorCode::InsufficientData, msg.str());
  }

  // Negative statistics from the refit half only, shared by every candidate.
  // Estimating them on the held-out negatives as well would whiten those
  // patches and not the held-out positives, biasing the ranking upward.
  RowMatrix negm = stack(neg, neg_a);
  const Eigen::RowVectorXd mu = negm.colwise().mean();
  negm.rowwise() -= mu;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(kTemplateSize, kTemplateSize);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(negm.transpose(), 1.0 / static_cast<double>(neg_a.size()));
  cov = cov.selfadjointView<Eigen::Lower>();
  negm.resize(0, 0);
  const double trace = cov.trace();
  if (!(trace > 1e-12) || !std::isfinite(trace))
    throw Error(ErrorCode::DegenerateNegatives, "negative patches have no variance");
  Eigen::MatrixXd reg = cov;
  reg.diagonal().array() += cfg.shrinkage * trace / kTemplateSize;
  const Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::DegenerateNegatives, "regularized negative covariance is not positive definite");

  const RowMatrix pa = stack(pos, pos_a);
  const std::size_t n_cand = std::min(pos_a.size(), n * static_cast<std::size_t>(std::max(1, cfg.candidate_factor)));
  std::vector<Eigen::Index> seeds_idx(pos_a.size());
  std::iota(seeds_idx.begin(), seeds_idx.end(), Eigen::Index{0});
  std::vector<Eigen::Index> cand_rows;
  std::sample(seeds_idx.begin(), seeds_idx.end(), std::back_inserter(cand_rows), n_cand, rng);

  const auto n_c = static_cast<Eigen::Index>(n_cand);
  Eigen::MatrixXd centered(kTemplateSize, n_c);
  for (Eigen::Index j = 0; j < n_c; ++j) centered.col(j) = (pa.row(cand_rows[j]) - mu).transpose();
  Eigen::MatrixXd w = llt.solve(centered);

  const std::size_t m = std::min<std::size_t>(std::max(1, cfg.top_m), pos_a.size());
  for (int round = 0; round < cfg.rounds; ++round) {
    const Eigen::MatrixXd scores = pa * w;
    for (Eigen::Index j = 0; j < n_c; ++j) {
      const auto top = top_indices(scores.col(j), m);
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(kTemplateSize);
      for (Eigen::Index r : top) mean += pa.row(r);
      mean /= static_cast<double>(top.size());
      centered.col(j) = (mean - mu).transpose();
    }
    w = llt.solve(centered);
  }

  // Unit response spread on negatives, then round to the stored precision.
  std::vector<Element> elements(n_cand);
  Eigen::MatrixXd wf(kTemplateSize, n_c);
  for (Eigen::Index j = 0; j < n_c; ++j) {
    const double spread = std::sqrt(std::max(w.col(j).dot(cov * w.col(j)), 1e-300));
    Element& e = elements[static_cast<std::size_t>(j)];
    e.id = static_cast<std::uint32_t>(j);
    for (int k = 0; k < kTemplateSize; ++k) {
      e.weights[k] = static_cast<float>(w(k, j) / spread);
      wf(k, j) = e.weights[k];
    }
  }
  {
    const Eigen::MatrixXd scores = pa * wf;
    for (Eigen::Index j = 0; j < n_c; ++j) {
      const auto top = top_indices(scores.col(j), m);
      elements[static_cast<std::size_t>(j)].bias = -scores(top.back(), j);
    }
  }

  // Density-ratio score on the held-out half.
  const RowMatrix pb = stack(pos, pos_b);
  const RowMatrix nb = stack(neg, neg_b);
  const Eigen::MatrixXd spb = pb * wf;
  const Eigen::MatrixXd snb = nb * wf;
  const std::size_t k = std::min<std::size_t>(std::max(1, cfg.top_k), pos_b.size() + neg_b.size());
  std::vector<std::vector<FiringRef>> firings(n_cand);
  for (Eigen::Index j = 0; j < n_c; ++j) {
    struct Scored {
      double score;
      FiringRef ref;
    };
    std::vector<Scored> all;
    all.reserve(pos_b.size() + neg_b.size());
    for (std::size_t i = 0; i < pos_b.size(); ++i) all.push_back({spb(static_cast<Eigen::Index>(i), j), {true, pos_b[i]}});
    for (std::size_t i = 0; i < neg_b.size(); ++i) all.push_back({snb(static_cast<Eigen::Index>(i), j), {false, neg_b[i]}});
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      [](const Scored& a, const Scored& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.ref.positive != b.ref.positive) return a.ref.positive;
                        return a.ref.index < b.ref.index;
                      });
    std::size_t hits = 0;
    auto& f = firings[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < k; ++i) {
      f.push_back(all[i].ref);
      hits += all[i].ref.positive ? 1 : 0;
    }
    elements[static_cast<std::size_t>(j)].mining_score = static_cast<double>(hits) / static_cast<double>(k);
  }

  std::vector<std::size_t> order(n_cand);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return elements[a].mining_score > elements[b].mining_score;
  });
  std::vector<Element> ranked;
  std::vector<std::vector<FiringRef>> ranked_firings;
  for (std::size_t i : order) {
    ranked.push_back(elements[i]);
    ranked_firings.push_back(firings[i]);
  }
  // When redundancy leaves fewer than n survivors, the best-ranked dropped
  // candidates fill the remainder so every category gets its full budget.
  const auto kept = dedupe(ranked, ranked_firings, cfg.max_cosine, cfg.max_firing_overlap);
  std::vector<bool> take(ranked.size(), false);
  std::size_t taken = 0;
  for (std::size_t i : kept)
    if (taken < n) take[i] = true, ++taken;
  for (std::size_t i = 0; i < ranked.size() && taken < n; ++i)
    if (!take[i]) take[i] = true, ++taken;
  std::vector<MinedElement> out;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (take[i]) out.push_back({ranked[i], ranked_firings[i]});
  return out;
}

BankMiningResult mine_bank(const Dataset& train, const PatchSource& source, const BankMiningConfig& cfg,
                           int scales_per_octave) {
  BankMiningResult result;
  result.bank.categories = train.categories;
  result.bank.descriptor.scales_per_octave = scales_per_octave;
  for (std::size_t c = 0; c < train.categories.size(); ++c) {
    CategoryMiningSummary summary;
    summary.category = train.categories[c];
    std::vector<PatchSample> neg;
    std::vector<double> scores;
    for (int kind = 0; kind < 2; ++kind) {
      const std::size_t want = kind == 0 ? cfg.n_discriminative : cfg.n_localization;
      if (want == 0) continue;
      const std::uint64_t base = derive_seed(cfg.mining.seed, c * 4 + static_cast<std::size_t>(kind));
      try {
        const std::optional<double> min_iou =
            kind == 0 ? std::nullopt : std::optional<double>(cfg.localization_iou);
        const auto pos = source.sample(static_cast<int>(c), Polarity::Positive, cfg.max_positives, min_iou,
                                       derive_seed(base, 1), true);
        (kind == 0 ? summary.positives : summary.localization_positives) = pos.size();
        if (neg.empty()) {
          neg = source.sample(static_cast<int>(c), Polarity::Negative, std::max(cfg.negatives, pos.size()), std::nullopt,
                              derive_seed(base, 2), true);
          summary.negatives = neg.size();
        }
        MiningConfig mc = cfg.mining;
        mc.seed = derive_seed(base, 3);
        auto mined = mine_elements(pos, neg, want, mc);
        for (auto& me : mined) {
          me.element.category = static_cast<int>(c);
          me.element.kind = kind == 0 ? ElementKind::Discriminative : ElementKind::Localization;
          scores.push_back(me.element.mining_score);
          result.bank.elements.push_back(std::move(me.element));
        }
        (kind == 0 ? summary.discriminative : summary.localization) = mined.size();
      } catch (const Error& e) {
        summary.errors.push_back(std::string(kind == 0 ? "discriminative: " : "localization: ") + e.what());
      }
    }
    if (!scores.empty()) {
      std::sort(scores.begin(), scores.end());
      summary.best_score = scores.back();
      summary.median_score = scores[scores.size() / 2];
    }
    result.summaries.push_back(std::move(summary));
  }
  // Keep mining order within each group; ids follow bank order.
  std::stable_sort(result.bank.elements.begin(), result.bank.elements.end(), [](const Element& a, const Element& b) {
    return std::pair(a.category, a.kind) < std::pair(b.category, b.kind);
  });
  for (std::size_t i = 0; i < result.bank.elements.size(); ++i)
    result.bank.elements[i].id = static_cast<std::uint32_t>(i);
  return result;
}

}  // namespace mldetect
