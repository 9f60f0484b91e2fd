#pragma once

#include "lpssl/dense.hpp"

#include <optional>
#include <span>
#include <vector>

namespace lpssl {

struct MetricsReport {
  double accuracy = 0.0;
  /// Positive-class (label 1) F1 for two classes, macro F1 otherwise.
  double f1 = 0.0;
  /// Absent when the evaluated labels hold a single class.
  std::optional<double> auc_roc;
  std::vector<std::size_t> per_class_counts;
  std::vector<std::size_t> predicted_counts;
};

double accuracy(std::span<const int> predicted, std::span<const int> gold);

/// Binary F1 with class 1 positive when num_classes == 2; macro F1 over
/// classes occurring in gold or predictions otherwise. 0 when undefined.
double f1_score(std::span<const int> predicted, std::span<const int> gold, int num_classes);

/// Mann-Whitney rank statistic with mid-ranks for tied scores. Throws
/// SingleClassEval when only one class is present.
double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> positive);

/// Metrics from per-class scores. The two-class AUC ranks the score margin
/// s1 - s0; more classes use one-vs-rest macro AUC over softmax scores.
MetricsReport compute_metrics(const DenseRows<double>& scores, std::span<const int> gold, int num_classes);

}  // namespace lpssl
