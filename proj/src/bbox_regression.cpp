#include "mldetect/bbox_regression.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mldetect/error.hpp"

namespace mldetect {

RegressionTargets regression_targets(const Box& p, const Box& g) noexcept {
  return {(g.x1 - p.x1) / p.w, (g.y1 - p.y1) / p.h, std::log(g.w / p.w), std::log(g.h / p.h)};
}

Box apply_targets(const Box& p, const RegressionTargets& t) noexcept {
  return {p.x1 + t.tx * p.w, p.y1 + t.ty * p.h, p.w * std::exp(t.tw), p.h * std::exp(t.th)};
}

RegressionTargets BoxRegressor::predict(std::span<const double> f) const {
  if (f.size() != mean.size())
    throw Error(ErrorCode::ContractMismatch, "regressor expects " + std::to_string(mean.size()) +
                                                 "-dim features, got " + std::to_string(f.size()));
  std::array<double, 4> out = bias;
  for (std::size_t d = 0; d < f.size(); ++d) {
    const double z = (f[d] - mean[d]) / scale[d];
    for (int k = 0; k < 4; ++k) out[k] += weights[k][d] * z;
  }
  return {out[0], out[1], out[2], out[3]};
}

Box BoxRegressor::apply(std::span<const double> f, const Box& proposal) const {
  return apply_targets(proposal, predict(f));
}

std::array<std::vector<double>, 4> BoxRegressor::raw_weights() const {
  std::array<std::vector<double>, 4> out;
  for (int k = 0; k < 4; ++k) {
    out[k].resize(mean.size());
    for (std::size_t d = 0; d < mean.size(); ++d) out[k][d] = weights[k][d] / scale[d];
  }
  return out;
}

std::array<double, 4> BoxRegressor::raw_bias() const {
  std::array<double, 4> out = bias;
  for (int k = 0; k < 4; ++k)
    for (std::size_t d = 0; d < mean.size(); ++d) out[k] -= weights[k][d] * mean[d] / scale[d];
  return out;
}

BoxRegressor fit_regressor(std::span<const RegressionPair> pairs, double ridge_lambda, double min_iou) {
  std::vector<const RegressionPair*> used;
  for (const auto& p : pairs)
    if (iou(p.proposal, p.truth) >= min_iou) used.push_back(&p);
  if (used.size() < 2)
    throw Error(ErrorCode::InsufficientPairs, "box regression needs at least 2 pairs with IoU >= " +
                                                  std::to_string(min_iou) + ", got " + std::to_string(used.size()));
  const std::size_t dim = used.front()->feature.size();
  for (const auto* p : used)
    if (p->feature.size() != dim) throw Error(ErrorCode::ContractMismatch, "regression features differ in length");

  const auto n = static_cast<Eigen::Index>(used.size());
  const auto nd = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd z(n, nd);
  Eigen::MatrixXd t(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto* p = used[static_cast<std::size_t>(i)];
    z.row(i) = Eigen::Map<const Eigen::RowVectorXd>(p->feature.data(), nd);
    const RegressionTargets r = regression_targets(p->proposal, p->truth);
    t.row(i) << r.tx, r.ty, r.tw, r.th;
  }

  BoxRegressor reg;
  reg.ridge_lambda = ridge_lambda;
  const Eigen::RowVectorXd mu = z.colwise().mean();
  z.rowwise() -= mu;
  Eigen::RowVectorXd sd = (z.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index d = 0; d < nd; ++d)
    if (!(sd[d] > 1e-12)) sd[d] = 1.0;
  z.array().rowwise() /= sd.array();

  const Eigen::RowVector4d t_mean = t.colwise().mean();
  t.rowwise() -= t_mean;

  // Centered design, so the unpenalized intercept is just the target mean.
  Eigen::MatrixXd gram = z.transpose() * z;
  gram.diagonal().array() += ridge_lambda;
  const Eigen::MatrixXd w = gram.ldlt().solve(z.transpose() * t);

  reg.mean.assign(mu.data(), mu.data() + nd);
  reg.scale.assign(sd.data(), sd.data() + nd);
  for (int k = 0; k < 4; ++k) {
    reg.weights[k].assign(w.col(k).data(), w.col(k).data() + nd);
    reg.bias[k] = t_mean[k];
  }
  return reg;
}

}  // namespace mldetect
