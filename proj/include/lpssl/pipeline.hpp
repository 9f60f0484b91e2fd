#pragma once

// Three-way comparison: a baseline trained on the labeled subset, a fully
// supervised upper bound, and the label-propagation route (features from the
// baseline -> kNN graph -> diffusion -> weighted pseudo-label training ->
// one refresh round).

#include "lpssl/config.hpp"
#include "lpssl/corpus.hpp"
#include "lpssl/diffusion.hpp"
#include "lpssl/embeddings.hpp"
#include "lpssl/metrics.hpp"
#include "lpssl/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lpssl {

enum class Stage { Baseline, FullySupervised, LpSsl, Full };

const char* to_string(Stage stage) noexcept;
std::optional<Stage> parse_stage(std::string_view name) noexcept;

/// Diagnostics of one propagation round.
struct PropagationSummary {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t isolated = 0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = true;
  std::size_t fallback_count = 0;
  std::vector<double> class_weights;
  /// Accuracy of pseudo-labels on unlabeled points, against gold labels.
  std::optional<double> pseudo_label_accuracy;
  double mean_certainty = 0.0;
};

struct RunRecord {
  Stage stage = Stage::Baseline;
  MetricsReport metrics;
  std::optional<MetricsReport> test_metrics;
  double wall_time_s = 0.0;
  std::string config_digest;
  std::vector<std::filesystem::path> artifacts;
  std::vector<double> loss_curve;
  std::optional<PropagationSummary> propagation;
};

struct PreparedData {
  Vocabulary vocab;
  EmbeddingTable embeddings;
  IndexedSplits splits;
  std::optional<IndexedDataset> test;
  std::size_t rejected_rows = 0;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct RunOptions {
  /// Writes measured wall time into metrics JSON; otherwise the field is
  /// null there and the time lives only in the stage record.
  bool record_timing = false;
  std::ostream* log = nullptr;
};

using Model = ClassifierParams<float>;

struct Propagation {
  PseudoLabelSet pseudo;
  PropagationSummary summary;
  FeatureMatrix<double> features;
  SparseAffinity<double> graph;
};

/// Features from `params` over the train split, graph, diffusion and
/// pseudo-label extraction. Non-convergence is logged and the partial
/// solution is used.
Propagation propagate(const Model& params, const IndexedDataset& train, const ExperimentConfig& cfg,
                      std::ostream* log = nullptr);

class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg, RunOptions options = {});

  const ExperimentConfig& config() const noexcept { return cfg_; }
  std::uint64_t digest() const noexcept { return digest_; }
  std::filesystem::path out_dir() const { return cfg_.out; }
  const PreparedData& data();

  /// Writes the resolved config, vocabulary dump and dataset summary.
  void write_prepared();

  RunRecord run_baseline();
  RunRecord run_fully_supervised();
  /// Propagation from the stored baseline checkpoint, pseudo-label export.
  Propagation run_propagation_only();
  /// Returns the lp_ssl and full stage records. Refuses to start unless the
  /// baseline checkpoint on disk carries this config's digest.
  std::vector<RunRecord> run_lp_ssl(const RunRecord& baseline);
  /// baseline, fully_supervised, lp_ssl, full.
  std::vector<RunRecord> run_all();

 private:
  Model load_baseline_checkpoint() const;
  RunRecord finish_stage(Stage stage, const Model& params, std::vector<double> curve, double seconds,
                         std::optional<PropagationSummary> propagation);
  void export_pseudo_labels(const std::filesystem::path& dir, const Propagation& p) const;
  void log(const std::string& line) const;

  ExperimentConfig cfg_;
  RunOptions options_;
  std::uint64_t digest_;
  std::optional<PreparedData> data_;
};

/// One long-format row per (cell, stage, metric).
struct SummaryRow {
  std::size_t cell = 0;
  std::string config_digest;
  std::map<std::string, std::string> axes;
  std::string stage;
  std::string metric;
  double value = 0.0;
};

inline const std::vector<std::string>& summary_axes() {
  static const std::vector<std::string> axes{"label_fraction", "hidden_dim", "k", "vocab_size"};
  return axes;
}

std::vector<SummaryRow> summary_rows(std::size_t cell, const ExperimentConfig& cfg,
                                     const std::vector<RunRecord>& records);
void write_summary(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary(const std::filesystem::path& path);

/// Grouped bar chart per metric (accuracy, f1, auc_roc) with one group per
/// value of `axis` and bars for baseline, lp_ssl and fully_supervised. Rows
/// sharing a group are averaged. Each SVG gets a CSV of the plotted values.
std::vector<std::filesystem::path> emit_charts(const std::vector<SummaryRow>& rows, const std::string& axis,
                                               const std::filesystem::path& out_dir);

struct GridResult {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<std::string> failures;
};

/// Runs every cell of the sweep under `<out>/cell_NNN`, writes
/// `<out>/summary.csv` and charts per swept axis. Failed cells are recorded in
/// `<out>/failures.csv` and the sweep continues.
GridResult run_grid(const ExperimentConfig& base, const GridSpec& sweep, RunOptions options = {});

}  // namespace lpssl
