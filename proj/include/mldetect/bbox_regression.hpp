#pragma once

#include <array>
#include <span>
#include <vector>

#include "mldetect/geometry.hpp"

namespace mldetect {

/// Corner translation scaled by the proposal size, log-space rescaling.
struct RegressionTargets {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
};

RegressionTargets regression_targets(const Box& proposal, const Box& truth) noexcept;
Box apply_targets(const Box& proposal, const RegressionTargets& t) noexcept;

struct RegressionPair {
  std::vector<double> feature;
  Box proposal;
  Box truth;
};

/// Four independent ridge regressions on standardized features. The
/// per-dimension mean/deviation used for standardization are part of the model.
struct BoxRegressor {
  std::array<std::vector<double>, 4> weights;  // standardized space
  std::array<double, 4> bias{};
  std::vector<double> mean;
  std::vector<double> scale;  // per-dimension standard deviation (1 when constant)
  double ridge_lambda = 1.0;

  RegressionTargets predict(std::span<const double> feature) const;
  Box apply(std::span<const double> feature, const Box& proposal) const;

  /// Equivalent weights and biases on unstandardized features.
  std::array<std::vector<double>, 4> raw_weights() const;
  std::array<double, 4> raw_bias() const;
};

/// Fits on the pairs whose IoU(proposal, truth) >= min_iou. Throws
/// InsufficientPairs when fewer than two qualify.
BoxRegressor fit_regressor(std::span<const RegressionPair> pairs, double ridge_lambda = 1.0, double min_iou = 0.6);

}  // namespace mldetect
