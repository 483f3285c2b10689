#include "mldetect/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "mldetect/error.hpp"

namespace mldetect {

double LinearModel::score(std::span<const double> x) const noexcept {
  double s = bias;
  const std::size_t n = std::min(x.size(), weights.size());
  for (std::size_t i = 0; i < n; ++i) s += weights[i] * x[i];
  return s;
}

double LinearModel::score(std::span<const float> x) const noexcept {
  double s = bias;
  const std::size_t n = std::min(x.size(), weights.size());
  for (std::size_t i = 0; i < n; ++i) s += weights[i] * static_cast<double>(x[i]);
  return s;
}

namespace {

// Face solves are dense in the number of free dual variables.
constexpr std::size_t kMaxPolishSize = 1500;
constexpr int kActiveSetIterations = 200;

struct ClassWeights {
  double pos;
  double neg;
};

ClassWeights class_weights(std::size_t n_pos, std::size_t n_neg, const SvmConfig& cfg) {
  if (!cfg.balance_classes) return {cfg.c, cfg.c};
  const double n = static_cast<double>(n_pos + n_neg);
  return {cfg.c * n / (2.0 * static_cast<double>(n_pos)), cfg.c * n / (2.0 * static_cast<double>(n_neg))};
}

bool all_identical(const FeatureRows& pos, const FeatureRows& neg) {
  const auto first = pos.row(0);
  auto same = [&](std::span<const double> r) { return std::equal(r.begin(), r.end(), first.begin()); };
  for (std::size_t i = 1; i < pos.rows(); ++i)
    if (!same(pos.row(i))) return false;
  for (std::size_t i = 0; i < neg.rows(); ++i)
    if (!same(neg.row(i))) return false;
  return true;
}

}  // namespace

LinearModel train_svm(const FeatureRows& pos, const FeatureRows& neg, const SvmConfig& cfg) {
  if (pos.empty() || neg.empty())
    throw Error(ErrorCode::DegenerateData, "SVM training needs at least one positive and one negative");
  if (pos.dim() != neg.dim()) throw Error(ErrorCode::DegenerateData, "positive and negative dimensions differ");
  if (all_identical(pos, neg)) throw Error(ErrorCode::DegenerateData, "all training features are identical");

  const std::size_t dim = pos.dim();
  const std::size_t n_pos = pos.rows();
  const std::size_t n = n_pos + neg.rows();
  const ClassWeights cw = class_weights(n_pos, neg.rows(), cfg);
  const double bscale = cfg.bias_scale;

  auto row = [&](std::size_t i) { return i < n_pos ? pos.row(i) : neg.row(i - n_pos); };

  // Dual coordinate descent on
  //   min 0.5 a'Qa - sum a  s.t. 0 <= a_i <= C_i,  Q_ij = y_i y_j x~_i . x~_j
  // with x~ = [x, bias_scale]; w~ = sum a_i y_i x~_i is kept explicitly.
  std::vector<double> w(dim, 0.0);
  double wb = 0.0;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = row(i);
    qii[i] = std::inner_product(x.begin(), x.end(), x.begin(), bscale * bscale);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  auto upper_of = [&](std::size_t i) { return i < n_pos ? cw.pos : cw.neg; };
  auto y_of = [&](std::size_t i) { return i < n_pos ? 1.0 : -1.0; };

  auto coordinate_descent = [&] {
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double pg_max = -std::numeric_limits<double>::infinity();
      double pg_min = std::numeric_limits<double>::infinity();
      for (std::size_t i : order) {
        const double y = y_of(i);
        const double upper = upper_of(i);
        const auto x = row(i);
        const double margin = std::inner_product(x.begin(), x.end(), w.begin(), wb * bscale);
        const double g = y * margin - 1.0;
        double pg = g;
        if (alpha[i] <= 0.0)
          pg = std::min(g, 0.0);
        else if (alpha[i] >= upper)
          pg = std::max(g, 0.0);
        pg_max = std::max(pg_max, pg);
        pg_min = std::min(pg_min, pg);
        if (pg == 0.0 || qii[i] <= 0.0) continue;
        const double old = alpha[i];
        alpha[i] = std::clamp(old - g / qii[i], 0.0, upper);
        const double step = (alpha[i] - old) * y;
        if (step == 0.0) continue;
        for (std::size_t d = 0; d < dim; ++d) w[d] += step * x[d];
        wb += step * bscale;
      }
      if (pg_max - pg_min < cfg.tolerance) return;
    }
  };

  auto rebuild_w = [&] {
    std::fill(w.begin(), w.end(), 0.0);
    wb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] == 0.0) continue;
      const double a = alpha[i] * y_of(i);
      const auto x = row(i);
      for (std::size_t d = 0; d < dim; ++d) w[d] += a * x[d];
      wb += a * bscale;
    }
  };

  // Coordinate descent crawls on ill-conditioned problems, so it is
  // followed by an active-set phase: solve the dual exactly on the face of
  // free variables (the rest held at their bounds), step toward that
  // solution as far as the box allows, and release bound variables whose
  // gradient violates optimality. Returns false when it gives up (face too
  // large or no progress); coordinate descent then has the final word.
  auto gradient = [&](std::size_t i) {
    const auto x = row(i);
    return y_of(i) * std::inner_product(x.begin(), x.end(), w.begin(), wb * bscale) - 1.0;
  };
  auto active_set = [&]() -> bool {
    std::vector<char> is_free(n, 0);
    for (std::size_t i = 0; i < n; ++i) is_free[i] = alpha[i] > 0.0 && alpha[i] < upper_of(i);
    for (int iter = 0; iter < kActiveSetIterations; ++iter) {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (is_free[i]) free.push_back(i);
      if (free.size() > kMaxPolishSize) return false;
      if (!free.empty()) {
        const auto nf = static_cast<Eigen::Index>(free.size());
        const auto da = static_cast<Eigen::Index>(dim + 1);
        Eigen::MatrixXd xf(nf, da);
        for (Eigen::Index a = 0; a < nf; ++a) {
          const auto x = row(free[a]);
          const double y = y_of(free[a]);
          for (std::size_t d = 0; d < dim; ++d) xf(a, static_cast<Eigen::Index>(d)) = y * x[d];
          xf(a, da - 1) = y * bscale;
        }
        Eigen::VectorXd wfix(da);
        for (std::size_t d = 0; d < dim; ++d) wfix(static_cast<Eigen::Index>(d)) = w[d];
        wfix(da - 1) = wb;
        Eigen::VectorXd cur(nf);
        for (Eigen::Index a = 0; a < nf; ++a) cur(a) = alpha[free[a]];
        wfix -= xf.transpose() * cur;
        const Eigen::MatrixXd q = xf * xf.transpose();
        const Eigen::VectorXd rhs = Eigen::VectorXd::Ones(nf) - xf * wfix;
        // The face objective 0.5 a'Qa - rhs'a has a minimizer only when rhs
        // lies in the range of Q. Otherwise it decreases without bound along
        // the null-space part of rhs, and the step runs to the first bound.
        const Eigen::VectorXd ls = q.completeOrthogonalDecomposition().solve(rhs);
        if (!ls.allFinite()) return false;
        const Eigen::VectorXd null_part = rhs - q * ls;
        const bool unbounded = null_part.norm() > 1e-9 * (1.0 + rhs.norm());
        const Eigen::VectorXd dir = unbounded ? null_part : Eigen::VectorXd(ls - cur);
        double t = unbounded ? std::numeric_limits<double>::infinity() : 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index a = 0; a < nf; ++a) {
          const double d = dir(a);
          if (d == 0.0) continue;
          const double limit = d < 0.0 ? -cur(a) / d : (upper_of(free[a]) - cur(a)) / d;
          if (limit < t) {
            t = limit;
            blocking = a;
          }
        }
        if (blocking < 0 && unbounded) return false;
        for (Eigen::Index a = 0; a < nf; ++a) {
          const std::size_t i = free[a];
          alpha[i] = std::clamp(cur(a) + t * dir(a), 0.0, upper_of(i));
        }
        if (blocking >= 0) {
          const std::size_t i = free[blocking];
          alpha[i] = dir(blocking) < 0.0 ? 0.0 : upper_of(i);
          is_free[i] = 0;
        }
        rebuild_w();
        if (blocking >= 0) continue;
      }
      // Face optimum reached: release every bound variable that wants to move.
      bool released = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (is_free[i]) continue;
        const double g = gradient(i);
        if ((alpha[i] <= 0.0 && g < -0.5 * cfg.tolerance) || (alpha[i] >= upper_of(i) && g > 0.5 * cfg.tolerance)) {
          is_free[i] = 1;
          released = true;
        }
      }
      if (!released) return true;
    }
    return false;
  };

  coordinate_descent();
  if (active_set()) coordinate_descent();

  LinearModel m;
  m.weights = std::move(w);
  m.bias = wb * bscale;
  return m;
}

double svm_objective(const LinearModel& m, const FeatureRows& pos, const FeatureRows& neg, const SvmConfig& cfg) {
  const ClassWeights cw = class_weights(pos.rows(), neg.rows(), cfg);
  const double wb = m.bias / cfg.bias_scale;
  double obj = 0.5 * wb * wb;
  for (double v : m.weights) obj += 0.5 * v * v;
  for (std::size_t i = 0; i < pos.rows(); ++i) obj += cw.pos * std::max(0.0, 1.0 - m.score(pos.row(i)));
  for (std::size_t i = 0; i < neg.rows(); ++i) obj += cw.neg * std::max(0.0, 1.0 + m.score(neg.row(i)));
  return obj;
}

}  // namespace mldetect
