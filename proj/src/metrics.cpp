#include "lpssl/metrics.hpp"

#include "lpssl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lpssl {

double accuracy(std::span<const int> predicted, std::span<const int> gold) {
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

namespace {

double class_f1(std::span<const int> predicted, std::span<const int> gold, int cls) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == cls;
    const bool g = gold[i] == cls;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
  return denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

}  // namespace

double f1_score(std::span<const int> predicted, std::span<const int> gold, int num_classes) {
  if (num_classes == 2) return class_f1(predicted, gold, 1);
  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < num_classes; ++c) {
    const bool occurs = std::find(gold.begin(), gold.end(), c) != gold.end() ||
                        std::find(predicted.begin(), predicted.end(), c) != predicted.end();
    if (!occurs) continue;
    sum += class_f1(predicted, gold, c);
    ++used;
  }
  return used ? sum / used : 0.0;
}

double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    // ranks are 1-based; the tie group shares the mean of start+1 .. end
    const double mid_rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t r = start; r < end; ++r) {
      if (positive[order[r]]) {
        positive_rank_sum += mid_rank;
        ++n_pos;
      }
    }
    start = end;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::SingleClassEval, "AUC needs both classes");
  const double u = positive_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport compute_metrics(const DenseRows<double>& scores, std::span<const int> gold, int num_classes) {
  const auto n = static_cast<std::size_t>(scores.rows());
  std::vector<int> predicted(n);
  MetricsReport report;
  report.per_class_counts.assign(static_cast<std::size_t>(num_classes), 0);
  report.predicted_counts.assign(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    const auto row = scores.row(static_cast<Eigen::Index>(i));
    for (Eigen::Index c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    predicted[i] = static_cast<int>(best);
    ++report.per_class_counts[static_cast<std::size_t>(gold[i])];
    ++report.predicted_counts[static_cast<std::size_t>(best)];
  }
  report.accuracy = accuracy(predicted, gold);
  report.f1 = f1_score(predicted, gold, num_classes);

  std::vector<std::uint8_t> positive(n);
  std::vector<double> ranked(n);
  if (num_classes == 2) {
    for (std::size_t i = 0; i < n; ++i) {
      positive[i] = gold[i] == 1;
      ranked[i] = scores(static_cast<Eigen::Index>(i), 1) - scores(static_cast<Eigen::Index>(i), 0);
    }
    try {
      report.auc_roc = auc_roc(ranked, positive);
    } catch (const Error&) {
      report.auc_roc.reset();
    }
    return report;
  }

  DenseRows<double> probs = scores;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    probs.row(i).array() -= probs.row(i).maxCoeff();
    probs.row(i) = probs.row(i).array().exp().matrix();
    probs.row(i) /= probs.row(i).sum();
  }
  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      positive[i] = gold[i] == c;
      ranked[i] = probs(static_cast<Eigen::Index>(i), c);
    }
    try {
      sum += auc_roc(ranked, positive);
      ++used;
    } catch (const Error&) {
    }
  }
  if (used) report.auc_roc = sum / used;
  return report;
}

}  // namespace lpssl
