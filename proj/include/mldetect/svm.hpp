#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mldetect {

/// Dense row-major feature rows of a fixed dimension.
class FeatureRows {
 public:
  FeatureRows() = default;
  explicit FeatureRows(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return rows() == 0; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  template <typename T>
  void push(std::span<const T> values) {
    if (dim_ == 0 && data_.empty()) dim_ = values.size();
    data_.insert(data_.end(), values.begin(), values.end());
  }
  void push(const std::vector<double>& values) { push(std::span<const double>(values)); }
  void reserve(std::size_t n) { data_.reserve(n * dim_); }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;

  double score(std::span<const double> x) const noexcept;
  double score(std::span<const float> x) const noexcept;
};

struct SvmConfig {
  double c = 1.0;            // hinge-loss weight against 0.5 * ||w||^2
  double bias_scale = 1.0;   // constant feature appended for the bias
  bool balance_classes = true;
  int max_epochs = 500;
  double tolerance = 1e-4;   // projected-gradient gap stopping rule
  std::uint64_t seed = 0;
};

/// L2-regularized hinge-loss linear SVM solved by dual coordinate descent.
/// With balance_classes, each class's losses are scaled so both classes
/// carry equal total weight (n / (2 n_class) per example). The bias is
/// learned as the weight of a constant `bias_scale` feature.
/// Throws DegenerateData when every example is identical or a class is empty.
LinearModel train_svm(const FeatureRows& pos, const FeatureRows& neg, const SvmConfig& cfg);

/// Primal objective minimized by train_svm.
double svm_objective(const LinearModel& m, const FeatureRows& pos, const FeatureRows& neg, const SvmConfig& cfg);

}  // namespace mldetect
