#include <gtest/gtest.h>

#include <random>

#include "mldetect/error.hpp"
#include "mldetect/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mldetect;

namespace {

using testing_support::reference_match;

using F = MatchFlag;

std::vector<MatchFlag> random_flags(std::mt19937_64& rng, std::size_t n, double p_tp) {
  std::bernoulli_distribution b(p_tp);
  std::vector<MatchFlag> f(n);
  for (auto& x : f) x = b(rng) ? F::TruePositive : F::FalsePositive;
  return f;
}

std::size_t count_tp(const std::vector<MatchFlag>& f) {
  return static_cast<std::size_t>(std::count(f.begin(), f.end(), F::TruePositive));
}

GroundTruthRecord record(const std::string& id, std::vector<GroundTruthObject> objs) {
  return {id, 200, 200, std::move(objs)};
}

}  // namespace

TEST(Matching, AgreesWithReferenceOnRandomScenes) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution difficult(0.15);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<GtBox> gts;
    for (int g = 0; g < 1 + trial % 5; ++g) gts.push_back({testing_support::random_box(rng, 60.0, 10.0, 50.0), difficult(rng)});
    std::vector<Box> dets;
    for (int d = 0; d < trial % 9; ++d) {
      if (d % 2 == 0 && !gts.empty()) {
        Box b = gts[static_cast<std::size_t>(d) % gts.size()].box;
        b.x1 += 3.0 * (d - 3);
        dets.push_back(b);
      } else {
        dets.push_back(testing_support::random_box(rng, 60.0, 10.0, 50.0));
      }
    }
    EXPECT_EQ(match_detections(dets, gts, 0.5), reference_match(dets, gts, 0.5)) << "trial " << trial;
  }
}

TEST(Matching, SecondDetectionOfOneObjectIsAFalsePositive) {
  const std::vector<GtBox> gts{{{0, 0, 10, 10}, false}};
  const std::vector<Box> dets{{0, 0, 10, 10}, {1, 0, 10, 10}};
  EXPECT_EQ(match_detections(dets, gts), (std::vector<MatchFlag>{F::TruePositive, F::FalsePositive}));
}

TEST(Matching, DifficultBoxesAreIgnored) {
  const std::vector<GtBox> gts{{{0, 0, 10, 10}, true}, {{50, 50, 10, 10}, false}};
  const std::vector<Box> dets{{0, 0, 10, 10}, {50, 50, 10, 10}, {100, 100, 5, 5}};
  EXPECT_EQ(match_detections(dets, gts),
            (std::vector<MatchFlag>{F::Ignored, F::TruePositive, F::FalsePositive}));
}

TEST(Ap, PerfectAndHopelessRankings) {
  const std::vector<MatchFlag> all_tp(5, F::TruePositive);
  const std::vector<MatchFlag> all_fp(5, F::FalsePositive);
  for (ApStyle s : {ApStyle::ElevenPoint, ApStyle::Continuous}) {
    EXPECT_DOUBLE_EQ(average_precision(all_tp, 5, s), 1.0);
    EXPECT_DOUBLE_EQ(average_precision(all_fp, 5, s), 0.0);
    EXPECT_DOUBLE_EQ(average_precision({}, 5, s), 0.0);
  }
}

TEST(Ap, HandComputedElevenPoint) {
  // TP, FP, TP, TP, FP against 4 objects: precision 1, 1/2, 2/3, 3/4, 3/5 at
  // recall 1/4, 1/4, 1/2, 3/4, 3/4. Interpolated precision is 1 for the
  // thresholds 0-0.2, 3/4 for 0.3-0.7 and 0 for 0.8-1.
  const std::vector<MatchFlag> f{F::TruePositive, F::FalsePositive, F::TruePositive, F::TruePositive,
                                 F::FalsePositive};
  EXPECT_NEAR(average_precision(f, 4, ApStyle::ElevenPoint), 6.75 / 11.0, 1e-12);
  EXPECT_NEAR(average_precision(f, 4, ApStyle::Continuous), 0.25 + 0.25 * 0.75 + 0.25 * 0.75, 1e-12);
  // The trailing false positive changes nothing.
  EXPECT_EQ(average_precision(f, 4, ApStyle::ElevenPoint),
            average_precision(std::span(f).first(4), 4, ApStyle::ElevenPoint));
}

TEST(Ap, RecallThresholdIsInclusive) {
  // Three of ten found with perfect precision: recall exactly 0.3 must count.
  const std::vector<MatchFlag> f(3, F::TruePositive);
  EXPECT_NEAR(average_precision(f, 10, ApStyle::ElevenPoint), 4.0 / 11.0, 1e-12);
}

TEST(Ap, IgnoredEntriesAreTransparent) {
  const std::vector<MatchFlag> a{F::TruePositive, F::FalsePositive, F::TruePositive};
  const std::vector<MatchFlag> b{F::Ignored, F::TruePositive, F::Ignored, F::FalsePositive, F::TruePositive};
  for (ApStyle s : {ApStyle::ElevenPoint, ApStyle::Continuous})
    EXPECT_DOUBLE_EQ(average_precision(a, 3, s), average_precision(b, 3, s));
}

TEST(Ap, PropertiesOnRandomRankings) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 400; ++trial) {
    auto f = random_flags(rng, 1 + trial % 30, 0.4);
    const std::size_t total = count_tp(f) + trial % 4;
    if (total == 0) continue;
    for (ApStyle s : {ApStyle::ElevenPoint, ApStyle::Continuous}) {
      const double ap = average_precision(f, total, s);
      EXPECT_GE(ap, 0.0);
      EXPECT_LE(ap, 1.0);
      // Trailing false positives never change AP.
      auto tail = f;
      tail.insert(tail.end(), 3, F::FalsePositive);
      EXPECT_DOUBLE_EQ(average_precision(tail, total, s), ap);
      // Promoting a true positive above a false positive never hurts.
      for (std::size_t i = 0; i + 1 < f.size(); ++i)
        if (f[i] == F::FalsePositive && f[i + 1] == F::TruePositive) {
          auto better = f;
          std::swap(better[i], better[i + 1]);
          EXPECT_GE(average_precision(better, total, s), ap - 1e-12);
          break;
        }
      // More ground truth with the same hits lowers (or keeps) AP.
      EXPECT_LE(average_precision(f, total + 2, s), ap + 1e-12);
    }
  }
}

TEST(Ap, NoGroundTruthThrows) {
  try {
    average_precision({}, 0, ApStyle::ElevenPoint);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoGroundTruth);
  }
}

TEST(Evaluate, OracleDetectionsScorePerfectly) {
  const std::vector<std::string> cats{"cat", "dog", "emu"};
  const std::vector<GroundTruthRecord> gt{
      record("a", {{"cat", {10, 10, 50, 50}, false}, {"dog", {100, 100, 40, 60}, false}}),
      record("b", {{"cat", {0, 0, 30, 30}, false}, {"emu", {50, 50, 20, 20}, true}}),
  };
  std::vector<Detection> dets;
  for (const auto& r : gt)
    for (const auto& o : r.objects)
      if (!o.difficult) dets.push_back({r.image_id, o.category == "cat" ? 0 : 1, 2.0, o.box, std::nullopt});
  const EvalReport rep = evaluate(dets, gt, cats);
  EXPECT_DOUBLE_EQ(rep.map_score, 1.0);
  EXPECT_EQ(rep.per_category_ap.size(), 2u);
  EXPECT_EQ(rep.skipped_categories, (std::vector<std::string>{"emu"}));
  EXPECT_EQ(rep.counts.at("cat").true_positives, 2u);
  EXPECT_EQ(rep.counts.at("dog").missed, 0u);
  EXPECT_NE(rep.to_table().find("cat"), std::string::npos);
  EXPECT_NE(rep.to_json().find("\"map\""), std::string::npos);
}

TEST(Evaluate, EmptyDetectionsScoreZero) {
  const std::vector<std::string> cats{"cat"};
  const std::vector<GroundTruthRecord> gt{record("a", {{"cat", {10, 10, 50, 50}, false}})};
  const EvalReport rep = evaluate({}, gt, cats);
  EXPECT_DOUBLE_EQ(rep.map_score, 0.0);
  EXPECT_EQ(rep.counts.at("cat").missed, 1u);
}

TEST(Evaluate, RefinedBoxesAreWhatCounts) {
  const std::vector<std::string> cats{"cat"};
  const std::vector<GroundTruthRecord> gt{record("a", {{"cat", {10, 10, 50, 50}, false}})};
  const std::vector<Detection> off{{"a", 0, 1.0, {60, 60, 50, 50}, std::nullopt}};
  const std::vector<Detection> fixed{{"a", 0, 1.0, {60, 60, 50, 50}, Box{11, 10, 50, 50}}};
  EXPECT_DOUBLE_EQ(evaluate(off, gt, cats).map_score, 0.0);
  EXPECT_DOUBLE_EQ(evaluate(fixed, gt, cats).map_score, 1.0);
}

TEST(Evaluate, RankingAcrossImagesUsesScores) {
  const std::vector<std::string> cats{"cat"};
  const std::vector<GroundTruthRecord> gt{record("a", {{"cat", {0, 0, 20, 20}, false}}),
                                          record("b", {{"cat", {0, 0, 20, 20}, false}})};
  // FP outranks one TP: precision 1, 1/2, 2/3 at recall 1/2, 1/2, 1.
  const std::vector<Detection> dets{{"b", 0, 0.5, {0, 0, 20, 20}, std::nullopt},
                                    {"a", 0, 0.9, {0, 0, 20, 20}, std::nullopt},
                                    {"a", 0, 0.7, {100, 100, 20, 20}, std::nullopt}};
  Protocol p;
  p.style = ApStyle::Continuous;
  EXPECT_NEAR(evaluate(dets, gt, cats, p).map_score, 0.5 * 1.0 + 0.5 * (2.0 / 3.0), 1e-12);
}

TEST(Evaluate, UnknownIdsAndCategoriesThrow) {
  const std::vector<std::string> cats{"cat"};
  const std::vector<GroundTruthRecord> gt{record("a", {{"cat", {0, 0, 20, 20}, false}})};
  const std::vector<Detection> stray{{"zzz", 0, 1.0, {0, 0, 20, 20}, std::nullopt}};
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code([&] { evaluate(stray, gt, cats); }), ErrorCode::UnknownImageId);
  const std::vector<GroundTruthRecord> odd{record("a", {{"yak", {0, 0, 20, 20}, false}})};
  EXPECT_EQ(code([&] { evaluate({}, odd, cats); }), ErrorCode::UnknownCategory);
}

TEST(Evaluate, ProtocolParsing) {
  EXPECT_EQ(parse_ap_style("11point"), ApStyle::ElevenPoint);
  EXPECT_EQ(parse_ap_style("continuous"), ApStyle::Continuous);
  EXPECT_EQ(to_string(ApStyle::Continuous), "continuous");
  EXPECT_EQ(parse_ap_style("area"), ApStyle::Continuous);
  EXPECT_THROW(parse_ap_style("median"), Error);
}
