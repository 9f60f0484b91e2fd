#include "lpssl/pipeline.hpp"

#include "lpssl/binary_io.hpp"
#include "lpssl/csv.hpp"
#include "lpssl/error.hpp"
#include "lpssl/graph.hpp"
#include "lpssl/random.hpp"
#include "lpssl/svg_chart.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <set>

namespace lpssl {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::Baseline: return "baseline";
    case Stage::FullySupervised: return "fully_supervised";
    case Stage::LpSsl: return "lp_ssl";
    case Stage::Full: return "full";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) noexcept {
  for (Stage s : {Stage::Baseline, Stage::FullySupervised, Stage::LpSsl, Stage::Full})
    if (name == to_string(s)) return s;
  return std::nullopt;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::ofstream open_text(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::FileUnreadable, "cannot write " + path.string());
  return out;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json metrics_json(Stage stage, const MetricsReport& m, std::optional<double> wall_time,
                          const std::string& digest) {
  ordered_json j;
  j["stage"] = to_string(stage);
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["auc_roc"] = optional_number(m.auc_roc);
  j["wall_time_s"] = optional_number(wall_time);
  j["config_digest"] = digest;
  return j;
}

ordered_json propagation_json(const PropagationSummary& p) {
  ordered_json j;
  j["nodes"] = p.nodes;
  j["edges"] = p.edges;
  j["isolated"] = p.isolated;
  j["residual"] = p.residual;
  j["iterations"] = p.iterations;
  j["converged"] = p.converged;
  j["fallback_count"] = p.fallback_count;
  j["class_weights"] = p.class_weights;
  j["pseudo_label_accuracy"] = optional_number(p.pseudo_label_accuracy);
  j["mean_certainty"] = p.mean_certainty;
  return j;
}

io::ExpectedShape expected_shape(const ExperimentConfig& cfg, const PreparedData& data) {
  return {static_cast<std::uint32_t>(data.vocab.size()), static_cast<std::uint32_t>(data.embeddings.dim()),
          static_cast<std::uint32_t>(cfg.hidden_dim), static_cast<std::uint32_t>(cfg.hidden_layers),
          static_cast<std::uint32_t>(cfg.num_classes)};
}

TrainConfig train_config(const ExperimentConfig& cfg, int epochs, std::string_view tag, Weighting weighting) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = cfg.batch_size;
  t.learning_rate = cfg.learning_rate;
  t.seed = derive_seed(cfg.split.seed, tag);
  t.weighting = weighting;
  return t;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  auto loaded = load_csv_dataset(cfg.dataset);
  PreparedData data;
  data.rejected_rows = loaded.rejected_rows;

  const auto halves = split_documents(loaded.documents, cfg.split);
  std::vector<std::vector<std::string>> train_tokens;
  train_tokens.reserve(halves.train.size());
  for (const auto& doc : halves.train) train_tokens.push_back(tokenize(clean_text(doc.text)));
  data.vocab = build_vocabulary(train_tokens, cfg.vocab_size);

  data.splits = index_dataset(loaded.documents, data.vocab, cfg.max_len, cfg.split, cfg.num_classes);
  data.embeddings = cfg.embeddings.empty()
                        ? default_embedding_table(data.vocab, static_cast<std::size_t>(cfg.embedding_dim))
                        : load_word_vectors(cfg.embeddings, data.vocab, static_cast<std::size_t>(cfg.embedding_dim));
  if (!cfg.test_dataset.empty()) {
    const auto test = load_csv_dataset(cfg.test_dataset);
    data.test = index_documents(test.documents, data.vocab, cfg.max_len, cfg.num_classes, SplitTag::Test);
  }
  return data;
}

Propagation propagate(const Model& params, const IndexedDataset& train, const ExperimentConfig& cfg,
                      std::ostream* log) {
  Propagation p;
  p.features = extract_features(params, train).cast<double>();
  p.graph = build_graph(p.features, cfg.k, cfg.gamma);

  const auto missing = classes_without_seeds(train);
  if (log && !missing.empty()) *log << "warning: " << missing.size() << " class(es) have no labeled example\n";

  const DenseRows<double> y = seed_matrix<double>(train);
  LabelDistribution<double> z;
  try {
    z = diffuse(p.graph, y, cfg.diffusion);
  } catch (const NotConvergedError<double>& e) {
    if (log) *log << "warning: " << e.what() << "; continuing with the partial solution\n";
    z = e.partial();
  }
  p.pseudo = extract_pseudo_labels(z, train);

  auto& s = p.summary;
  s.nodes = static_cast<std::size_t>(p.graph.n());
  s.edges = static_cast<std::size_t>(p.graph.nnz() / 2);
  s.isolated = p.graph.isolated.size();
  s.residual = z.residual_norm;
  s.iterations = z.iterations;
  s.converged = z.converged;
  s.fallback_count = z.fallback_count();
  s.class_weights = p.pseudo.class_weights;
  std::size_t unlabeled = 0, correct = 0;
  double certainty = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    certainty += p.pseudo.certainty[i];
    if (train.labeled_mask[i]) continue;
    ++unlabeled;
    correct += p.pseudo.labels[i] == train.gold_labels[i];
  }
  if (unlabeled) s.pseudo_label_accuracy = static_cast<double>(correct) / static_cast<double>(unlabeled);
  if (train.size()) s.mean_certainty = certainty / static_cast<double>(train.size());
  return p;
}

// ---------------------------------------------------------------------------
// Experiment

Experiment::Experiment(ExperimentConfig cfg, RunOptions options)
    : cfg_(std::move(cfg)), options_(options), digest_(cfg_.digest()) {
  cfg_.validate();
}

const PreparedData& Experiment::data() {
  if (!data_) data_ = prepare_data(cfg_);
  return *data_;
}

void Experiment::log(const std::string& line) const {
  if (options_.log) *options_.log << line << '\n';
}

void Experiment::write_prepared() {
  const auto& d = data();
  const fs::path out = out_dir();
  {
    auto f = open_text(out / "config.resolved");
    f << "# digest " << digest_hex(digest_) << '\n';
    for (const auto& [key, value] : cfg_.resolved()) f << key << " = " << value << '\n';
  }
  {
    auto f = open_text(out / "vocab.tsv");
    d.vocab.dump(f);
  }
  const auto report = embedding_stats(d.embeddings);
  ordered_json j;
  j["config_digest"] = digest_hex(digest_);
  j["documents_rejected"] = d.rejected_rows;
  j["vocab_size"] = d.vocab.size();
  j["train_size"] = d.splits.train.size();
  j["validation_size"] = d.splits.validation.size();
  j["labeled"] = d.splits.train.labeled_count();
  j["test_size"] = d.test ? d.test->size() : 0;
  j["embedding"] = {{"dim", report.dim},
                    {"matched_count", report.matched_count},
                    {"coverage", report.coverage},
                    {"duplicates", d.embeddings.duplicate_count}};
  auto f = open_text(out / "dataset.json");
  f << j.dump(2) << '\n';
}

RunRecord Experiment::finish_stage(Stage stage, const Model& params, std::vector<double> curve, double seconds,
                                   std::optional<PropagationSummary> propagation) {
  const auto& d = data();
  RunRecord r;
  r.stage = stage;
  r.metrics = evaluate(params, d.splits.validation);
  if (d.test) r.test_metrics = evaluate(params, *d.test);
  r.wall_time_s = seconds;
  r.config_digest = digest_hex(digest_);
  r.loss_curve = std::move(curve);
  r.propagation = std::move(propagation);

  const fs::path dir = out_dir() / to_string(stage);
  const auto ck = dir / "checkpoint.lpck";
  io::write_checkpoint(ck, params, digest_);
  r.artifacts.push_back(ck);

  const std::optional<double> timing = options_.record_timing ? std::optional<double>(seconds) : std::nullopt;
  {
    auto f = open_text(dir / "metrics.json");
    f << metrics_json(stage, r.metrics, timing, r.config_digest).dump(2) << '\n';
    r.artifacts.push_back(dir / "metrics.json");
  }
  if (r.test_metrics) {
    auto f = open_text(dir / "metrics_test.json");
    f << metrics_json(stage, *r.test_metrics, timing, r.config_digest).dump(2) << '\n';
    r.artifacts.push_back(dir / "metrics_test.json");
  }

  ordered_json rec;
  rec["stage"] = to_string(stage);
  rec["config_digest"] = r.config_digest;
  rec["wall_time_s"] = seconds;
  rec["loss_curve"] = r.loss_curve;
  rec["per_class_counts"] = r.metrics.per_class_counts;
  rec["predicted_counts"] = r.metrics.predicted_counts;
  if (r.propagation) rec["propagation"] = propagation_json(*r.propagation);
  std::vector<std::string> paths;
  for (const auto& a : r.artifacts) paths.push_back(a.string());
  rec["artifacts"] = paths;
  auto f = open_text(dir / "record.json");
  f << rec.dump(2) << '\n';

  char line[160];
  std::snprintf(line, sizeof line, "%-16s accuracy %.4f  f1 %.4f  auc %s  (%.2fs)", to_string(stage),
                r.metrics.accuracy, r.metrics.f1,
                r.metrics.auc_roc ? std::to_string(*r.metrics.auc_roc).substr(0, 6).c_str() : "n/a", seconds);
  log(line);
  return r;
}

RunRecord Experiment::run_baseline() {
  const auto start = Clock::now();
  const auto& d = data();
  if (d.splits.train.labeled_count() == 0)
    throw Error(ErrorKind::NoLabeledPoints, "label_fraction leaves no labeled training documents");
  Model params = init_classifier<float>(d.embeddings, cfg_.hidden_dim, cfg_.hidden_layers, cfg_.num_classes,
                                        derive_seed(cfg_.split.seed, "model-init"), cfg_.finetune_embeddings);
  auto curve = train(params, d.splits.train, nullptr,
                     train_config(cfg_, cfg_.epochs.baseline, "train-baseline", Weighting::None));
  return finish_stage(Stage::Baseline, params, std::move(curve), seconds_since(start), std::nullopt);
}

RunRecord Experiment::run_fully_supervised() {
  const auto start = Clock::now();
  const auto& d = data();
  IndexedDataset all = d.splits.train;
  std::fill(all.labeled_mask.begin(), all.labeled_mask.end(), std::uint8_t{1});
  Model params = init_classifier<float>(d.embeddings, cfg_.hidden_dim, cfg_.hidden_layers, cfg_.num_classes,
                                        derive_seed(cfg_.split.seed, "model-init"), cfg_.finetune_embeddings);
  auto curve =
      train(params, all, nullptr, train_config(cfg_, cfg_.epochs.baseline, "train-baseline", Weighting::None));
  return finish_stage(Stage::FullySupervised, params, std::move(curve), seconds_since(start), std::nullopt);
}

Model Experiment::load_baseline_checkpoint() const {
  const fs::path path = out_dir() / to_string(Stage::Baseline) / "checkpoint.lpck";
  if (!fs::exists(path))
    throw Error(ErrorKind::MissingCheckpoint, "no baseline checkpoint at " + path.string() + "; run the baseline first");
  auto ck = io::read_checkpoint<float>(path, expected_shape(cfg_, *data_));
  if (ck.header.config_digest != digest_)
    throw Error(ErrorKind::MissingCheckpoint, "baseline checkpoint digest " + digest_hex(ck.header.config_digest) +
                                                  " does not match config digest " + digest_hex(digest_));
  return std::move(ck.params);
}

void Experiment::export_pseudo_labels(const fs::path& dir, const Propagation& p) const {
  {
    auto f = open_text(dir / "pseudo_labels.csv");
    f << "index,pseudo_label,certainty,is_seed\n";
    for (std::size_t i = 0; i < p.pseudo.size(); ++i)
      f << i << ',' << p.pseudo.labels[i] << ',' << format_double(p.pseudo.certainty[i]) << ','
        << static_cast<int>(p.pseudo.source_mask[i]) << '\n';
  }
  ordered_json j;
  j["class_weights"] = p.summary.class_weights;
  j["residual"] = p.summary.residual;
  j["iterations"] = p.summary.iterations;
  j["converged"] = p.summary.converged;
  j["fallback_count"] = p.summary.fallback_count;
  j["config_digest"] = digest_hex(digest_);
  auto f = open_text(dir / "pseudo_labels.json");
  f << j.dump(2) << '\n';
  io::write_features(dir / "features.lpfm", p.features);
  io::write_graph(dir / "graph.lpgr", p.graph);
}

Propagation Experiment::run_propagation_only() {
  const auto& d = data();
  const Model baseline = load_baseline_checkpoint();
  auto p = propagate(baseline, d.splits.train, cfg_, options_.log);
  export_pseudo_labels(out_dir() / "lp", p);
  return p;
}

std::vector<RunRecord> Experiment::run_lp_ssl(const RunRecord& baseline) {
  if (baseline.stage != Stage::Baseline || baseline.config_digest != digest_hex(digest_))
    throw Error(ErrorKind::MissingCheckpoint, "LP-SSL needs a baseline record from the same config");
  const auto& d = data();
  std::vector<RunRecord> out;

  // LP-SSL: baseline features -> pseudo-labels, fresh head, weighted training.
  auto start = Clock::now();
  Model params = load_baseline_checkpoint();
  auto first = propagate(params, d.splits.train, cfg_, options_.log);
  export_pseudo_labels(out_dir() / to_string(Stage::LpSsl), first);
  reset_output_layer(params, derive_seed(cfg_.split.seed, "lp-ssl-head"));
  auto curve = train(params, d.splits.train, &first.pseudo,
                     train_config(cfg_, cfg_.epochs.lp_ssl, "train-lp-ssl", Weighting::CertaintyAndClass));
  out.push_back(finish_stage(Stage::LpSsl, params, std::move(curve), seconds_since(start), first.summary));

  // Full pipeline: continue from LP-SSL weights with refreshed pseudo-labels.
  start = Clock::now();
  auto second = propagate(params, d.splits.train, cfg_, options_.log);
  export_pseudo_labels(out_dir() / to_string(Stage::Full), second);
  curve = train(params, d.splits.train, &second.pseudo,
                train_config(cfg_, cfg_.epochs.full, "train-full", Weighting::CertaintyAndClass));
  out.push_back(finish_stage(Stage::Full, params, std::move(curve), seconds_since(start), second.summary));
  return out;
}

std::vector<RunRecord> Experiment::run_all() {
  write_prepared();
  std::vector<RunRecord> records;
  records.push_back(run_baseline());
  records.push_back(run_fully_supervised());
  for (auto& r : run_lp_ssl(records.front())) records.push_back(std::move(r));
  write_summary(out_dir() / "summary.csv", summary_rows(0, cfg_, records));
  return records;
}

// ---------------------------------------------------------------------------
// Summaries, charts, grids

std::vector<SummaryRow> summary_rows(std::size_t cell, const ExperimentConfig& cfg,
                                     const std::vector<RunRecord>& records) {
  const auto resolved = cfg.resolved();
  std::map<std::string, std::string> axes;
  for (const auto& a : summary_axes()) axes[a] = resolved.at(a);
  std::vector<SummaryRow> rows;
  for (const auto& r : records) {
    auto add = [&](const char* metric, double value) {
      rows.push_back({cell, r.config_digest, axes, to_string(r.stage), metric, value});
    };
    add("accuracy", r.metrics.accuracy);
    add("f1", r.metrics.f1);
    if (r.metrics.auc_roc) add("auc_roc", *r.metrics.auc_roc);
  }
  return rows;
}

void write_summary(const fs::path& path, const std::vector<SummaryRow>& rows) {
  auto f = open_text(path);
  f << "cell,config_digest";
  for (const auto& a : summary_axes()) f << ',' << a;
  f << ",stage,metric,value\n";
  for (const auto& r : rows) {
    f << r.cell << ',' << r.config_digest;
    for (const auto& a : summary_axes()) f << ',' << csv::escape(r.axes.at(a));
    f << ',' << r.stage << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
}

std::vector<SummaryRow> read_summary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileUnreadable, "cannot open " + path.string());
  const auto table = csv::parse(in);
  if (table.empty()) throw Error(ErrorKind::EmptyFile, path.string() + " is empty");
  const auto& header = table.front();
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::FileUnreadable, path.string() + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_cell = column("cell"), c_digest = column("config_digest"), c_stage = column("stage"),
             c_metric = column("metric"), c_value = column("value");
  std::vector<SummaryRow> rows;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& row = table[r];
    if (row.size() != header.size()) throw Error(ErrorKind::FileUnreadable, path.string() + ": ragged row");
    SummaryRow s;
    s.cell = std::stoul(row[c_cell]);
    s.config_digest = row[c_digest];
    for (const auto& a : summary_axes()) s.axes[a] = row[column(a)];
    s.stage = row[c_stage];
    s.metric = row[c_metric];
    s.value = std::stod(row[c_value]);
    rows.push_back(std::move(s));
  }
  return rows;
}

std::vector<fs::path> emit_charts(const std::vector<SummaryRow>& rows, const std::string& axis,
                                  const fs::path& out_dir) {
  if (std::find(summary_axes().begin(), summary_axes().end(), axis) == summary_axes().end())
    throw Error(ErrorKind::InvalidConfig, "unknown chart axis '" + axis + "'");
  static const std::vector<std::pair<Stage, const char*>> kSeries{
      {Stage::Baseline, "Baseline"}, {Stage::LpSsl, "LP-SSL"}, {Stage::FullySupervised, "Fully supervised"}};
  static const std::vector<std::pair<const char*, const char*>> kMetrics{
      {"accuracy", "Accuracy"}, {"f1", "F1 score"}, {"auc_roc", "AUC-ROC"}};

  std::vector<std::string> groups;
  for (const auto& r : rows)
    if (std::find(groups.begin(), groups.end(), r.axes.at(axis)) == groups.end()) groups.push_back(r.axes.at(axis));
  std::stable_sort(groups.begin(), groups.end(), [](const std::string& a, const std::string& b) {
    try {
      return std::stod(a) < std::stod(b);
    } catch (const std::exception&) {
      return a < b;
    }
  });

  std::vector<fs::path> written;
  for (const auto& [metric, metric_title] : kMetrics) {
    BarChart chart;
    chart.title = std::string(metric_title) + " by " + axis;
    chart.x_label = axis;
    chart.y_label = metric_title;
    chart.groups = groups;
    bool any = false;
    for (const auto& [stage, label] : kSeries) {
      chart.series.push_back(label);
      std::vector<double> values;
      for (const auto& g : groups) {
        double sum = 0.0;
        int count = 0;
        for (const auto& r : rows)
          if (r.metric == metric && r.stage == to_string(stage) && r.axes.at(axis) == g) {
            sum += r.value;
            ++count;
          }
        any = any || count > 0;
        values.push_back(count ? sum / count : 0.0);
      }
      chart.values.push_back(std::move(values));
    }
    if (!any) continue;

    const auto stem = "chart_" + axis + "_" + metric;
    const auto svg_path = out_dir / (stem + ".svg");
    const auto csv_path = out_dir / (stem + ".csv");
    {
      auto f = open_text(svg_path);
      f << render_svg(chart);
    }
    auto f = open_text(csv_path);
    f << axis << ",stage,value\n";
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
      for (std::size_t si = 0; si < kSeries.size(); ++si)
        f << csv::escape(groups[gi]) << ',' << to_string(kSeries[si].first) << ','
          << chart_value(chart.values[si][gi]) << '\n';
    written.push_back(svg_path);
    written.push_back(csv_path);
  }
  return written;
}

GridResult run_grid(const ExperimentConfig& base, const GridSpec& sweep, RunOptions options) {
  if (sweep.empty()) throw Error(ErrorKind::InvalidConfig, "grid needs at least one sweep axis");
  GridResult result;
  const auto cells = sweep.expand(base);
  const fs::path root = base.out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ExperimentConfig cell = cells[c];
    char name[32];
    std::snprintf(name, sizeof name, "cell_%03zu", c);
    cell.out = (root / name).string();
    if (options.log) *options.log << "== " << name << " (" << digest_hex(cell.digest()) << ")\n";
    try {
      Experiment experiment(cell, options);
      auto records = experiment.run_all();
      for (auto& row : summary_rows(c, cell, records)) result.summary.push_back(std::move(row));
      for (auto& r : records) result.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      result.failures.push_back(std::string(name) + "," + csv::escape(e.what()));
      if (options.log) *options.log << "cell failed: " << e.what() << '\n';
    }
  }
  write_summary(root / "summary.csv", result.summary);
  if (!result.failures.empty()) {
    auto f = open_text(root / "failures.csv");
    f << "cell,error\n";
    for (const auto& line : result.failures) f << line << '\n';
  }
  for (const auto& axis : sweep.axes()) emit_charts(result.summary, axis, root);
  return result;
}

}  // namespace lpssl
