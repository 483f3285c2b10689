#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "mldetect/error.hpp"
#include "mldetect/svm.hpp"

using namespace mldetect;

namespace {

FeatureRows rows_of(std::initializer_list<std::vector<double>> xs) {
  FeatureRows r;
  for (const auto& x : xs) r.push(x);
  return r;
}

FeatureRows gaussian_blob(std::size_t n, std::vector<double> centre, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, sigma);
  FeatureRows r(centre.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x = centre;
    for (double& v : x) v += g(rng);
    r.push(x);
  }
  return r;
}

struct Example {
  Eigen::VectorXd x;  // augmented with the constant bias feature
  double y;
  double c;
};

std::vector<Example> augmented(const FeatureRows& pos, const FeatureRows& neg, const SvmConfig& cfg) {
  const double n = static_cast<double>(pos.rows() + neg.rows());
  std::vector<Example> out;
  for (int cls = 0; cls < 2; ++cls) {
    const FeatureRows& src = cls == 0 ? pos : neg;
    const double c = cfg.balance_classes ? cfg.c * n / (2.0 * static_cast<double>(src.rows())) : cfg.c;
    for (std::size_t i = 0; i < src.rows(); ++i) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(src.dim() + 1));
      for (std::size_t k = 0; k < src.dim(); ++k) x(static_cast<Eigen::Index>(k)) = src.row(i)[k];
      x(static_cast<Eigen::Index>(src.dim())) = cfg.bias_scale;
      out.push_back({x, cls == 0 ? 1.0 : -1.0, c});
    }
  }
  return out;
}

double primal(const Eigen::VectorXd& w, const std::vector<Example>& ex) {
  double obj = 0.5 * w.squaredNorm();
  for (const auto& e : ex) obj += e.c * std::max(0.0, 1.0 - e.y * w.dot(e.x));
  return obj;
}

// Exact optimum by enumerating which dual variables sit at 0, at C, or
// strictly between (where the margin is exactly 1). The optimum is among
// the candidates, and every candidate is a feasible primal point, so the
// least primal objective over all of them is the true minimum.
double brute_force_optimum(const std::vector<Example>& ex) {
  const std::size_t n = ex.size();
  std::size_t states = 1;
  for (std::size_t i = 0; i < n; ++i) states *= 3;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < states; ++s) {
    std::vector<int> st(n);
    std::size_t t = s;
    for (std::size_t i = 0; i < n; ++i, t /= 3) st[i] = static_cast<int>(t % 3);
    std::vector<std::size_t> free;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (st[i] == 1) alpha(static_cast<Eigen::Index>(i)) = ex[i].c;
      if (st[i] == 2) free.push_back(i);
    }
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd q(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        const Example& ea = ex[free[a]];
        double fixed = 0.0;
        for (std::size_t j = 0; j < n; ++j) fixed += alpha(static_cast<Eigen::Index>(j)) * ex[j].y * ea.y * ea.x.dot(ex[j].x);
        rhs(a) = 1.0 - fixed;
        for (Eigen::Index b = 0; b < nf; ++b) q(a, b) = ea.y * ex[free[b]].y * ea.x.dot(ex[free[b]].x);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(q);
      if (lu.rank() < nf) continue;
      const Eigen::VectorXd af = lu.solve(rhs);
      for (Eigen::Index a = 0; a < nf; ++a) alpha(static_cast<Eigen::Index>(free[a])) = af(a);
    }
    Eigen::VectorXd w = Eigen::VectorXd::Zero(ex[0].x.size());
    for (std::size_t i = 0; i < n; ++i) w += alpha(static_cast<Eigen::Index>(i)) * ex[i].y * ex[i].x;
    best = std::min(best, primal(w, ex));
  }
  return best;
}

Eigen::VectorXd augmented_weights(const LinearModel& m, double bias_scale) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(m.weights.size() + 1));
  for (std::size_t k = 0; k < m.weights.size(); ++k) w(static_cast<Eigen::Index>(k)) = m.weights[k];
  w(static_cast<Eigen::Index>(m.weights.size())) = m.bias / bias_scale;
  return w;
}

}  // namespace

TEST(Svm, OneDimensionalBoundarySitsBetweenTheClasses) {
  const FeatureRows pos = rows_of({{1.0}, {2.0}, {3.0}});
  const FeatureRows neg = rows_of({{-1.0}, {-2.0}, {-3.0}});
  SvmConfig cfg;
  cfg.c = 100.0;
  cfg.tolerance = 1e-8;
  const LinearModel m = train_svm(pos, neg, cfg);
  EXPECT_NEAR(-m.bias / m.weights[0], 0.0, 1e-3);
  EXPECT_NEAR(m.score(pos.row(0)), 1.0, 1e-3);
  EXPECT_NEAR(m.score(neg.row(0)), -1.0, 1e-3);
}

TEST(Svm, SeparatesWellSpacedBlobs) {
  std::mt19937_64 rng(1);
  const FeatureRows pos = gaussian_blob(100, {2.0, 2.0}, 0.5, rng);
  const FeatureRows neg = gaussian_blob(300, {-2.0, -2.0}, 0.5, rng);
  const LinearModel m = train_svm(pos, neg, SvmConfig{});
  for (std::size_t i = 0; i < pos.rows(); ++i) EXPECT_GT(m.score(pos.row(i)), 0.0);
  for (std::size_t i = 0; i < neg.rows(); ++i) EXPECT_LT(m.score(neg.row(i)), 0.0);
}

TEST(Svm, ObjectiveMatchesExhaustiveQpSolution) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 24; ++trial) {
    const FeatureRows pos = gaussian_blob(3 + trial % 3, {0.5, 0.3}, 1.0, rng);
    const FeatureRows neg = gaussian_blob(4 + trial % 2, {-0.5, 0.1}, 1.0, rng);
    SvmConfig cfg;
    cfg.c = 0.05 + 0.4 * trial;
    cfg.balance_classes = trial % 4 != 1;
    cfg.bias_scale = trial % 3 == 0 ? 1.0 : 2.0;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto ex = augmented(pos, neg, cfg);
    const double optimum = brute_force_optimum(ex);
    const LinearModel m = train_svm(pos, neg, cfg);
    const double got = primal(augmented_weights(m, cfg.bias_scale), ex);
    EXPECT_NEAR(got, optimum, 1e-4) << "trial " << trial;
    EXPECT_NEAR(svm_objective(m, pos, neg, cfg), got, 1e-9);
  }
}

TEST(Svm, FloatAndDoubleScoringAgree) {
  LinearModel m{{0.5, -1.0, 2.0}, 0.25};
  const std::vector<double> xd{1.0, 2.0, 3.0};
  const std::vector<float> xf{1.0f, 2.0f, 3.0f};
  EXPECT_DOUBLE_EQ(m.score(std::span<const double>(xd)), 4.75);
  EXPECT_DOUBLE_EQ(m.score(std::span<const float>(xf)), 4.75);
}

TEST(Svm, DeterministicForAFixedSeed) {
  std::mt19937_64 rng(3);
  const FeatureRows pos = gaussian_blob(50, {0.3, 0.0, 1.0}, 1.0, rng);
  const FeatureRows neg = gaussian_blob(80, {-0.3, 0.2, 0.0}, 1.0, rng);
  const LinearModel a = train_svm(pos, neg, SvmConfig{});
  const LinearModel b = train_svm(pos, neg, SvmConfig{});
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(Svm, DegenerateInputsThrow) {
  auto code = [](const FeatureRows& p, const FeatureRows& n) {
    try {
      train_svm(p, n, SvmConfig{});
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  const FeatureRows same = rows_of({{1.0, 1.0}, {1.0, 1.0}});
  EXPECT_EQ(code(same, same), ErrorCode::DegenerateData);
  EXPECT_EQ(code(rows_of({{1.0, 0.0}}), FeatureRows(2)), ErrorCode::DegenerateData);
  EXPECT_EQ(code(rows_of({{1.0, 0.0}}), rows_of({{1.0}})), ErrorCode::DegenerateData);
}
