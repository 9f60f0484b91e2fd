// lpssl: command-line front end for the label-propagation pipeline.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include "lpssl/config.hpp"
#include "lpssl/error.hpp"
#include "lpssl/pipeline.hpp"
#include "lpssl/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct CommonFlags {
  std::string config;
  std::optional<std::string> dataset, embeddings, out, seed, k, gamma, alpha, label_fraction, hidden_dim, epochs;
  bool record_timing = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--dataset", f.dataset, "label,text CSV");
  cmd->add_option("--embeddings", f.embeddings, "pretrained word-vector file (.gz accepted)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "split / training seed (u64)");
  cmd->add_option("--k", f.k, "neighbors per node");
  cmd->add_option("--gamma", f.gamma, "affinity exponent");
  cmd->add_option("--alpha", f.alpha, "diffusion strength in (0, 1)");
  cmd->add_option("--label-fraction", f.label_fraction, "fraction of train marked labeled");
  cmd->add_option("--hidden-dim", f.hidden_dim, "hidden layer width");
  cmd->add_option("--epochs", f.epochs, "M,E,N or a single count");
  cmd->add_flag("--record-timing", f.record_timing, "write wall time into metrics JSON");
  cmd->add_flag("-q,--quiet", f.quiet, "suppress progress output");
}

lpssl::KeyValues merged_key_values(const CommonFlags& f) {
  lpssl::KeyValues kv;
  if (!f.config.empty()) kv = lpssl::read_key_values(f.config);
  auto set = [&](const char* key, const std::optional<std::string>& v) {
    if (v) kv[key] = *v;
  };
  set("dataset", f.dataset);
  set("embeddings", f.embeddings);
  set("out", f.out);
  set("seed", f.seed);
  set("k", f.k);
  set("gamma", f.gamma);
  set("alpha", f.alpha);
  set("label_fraction", f.label_fraction);
  set("hidden_dim", f.hidden_dim);
  set("epochs", f.epochs);
  return kv;
}

lpssl::ExperimentConfig load_config(const CommonFlags& f) {
  lpssl::ExperimentConfig cfg;
  cfg.apply(merged_key_values(f));
  return cfg;
}

lpssl::RunOptions run_options(const CommonFlags& f) {
  return {f.record_timing, f.quiet ? nullptr : &std::cerr};
}

int exit_code(const lpssl::Error& e) {
  switch (e.category()) {
    case lpssl::ErrorCategory::Config: return kExitConfig;
    case lpssl::ErrorCategory::Data: return kExitData;
    case lpssl::ErrorCategory::Numerical: return kExitNumerical;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-based label propagation for semi-supervised text classification"};
  app.require_subcommand(1);

  CommonFlags common;
  auto* prepare = app.add_subcommand("prepare", "clean, split and index the corpus; dump vocabulary");
  auto* baseline = app.add_subcommand("baseline", "train on the labeled subset only");
  auto* supervised = app.add_subcommand("supervised", "train on every training document");
  auto* lp = app.add_subcommand("lp", "propagate labels from the baseline checkpoint and export pseudo-labels");
  auto* run = app.add_subcommand("run", "baseline, fully supervised, LP-SSL and full pipeline");
  auto* grid = app.add_subcommand("grid", "sweep label fraction / hidden dim / k / vocabulary size");
  for (auto* cmd : {prepare, baseline, supervised, lp, run, grid}) add_common(cmd, common);

  std::optional<std::string> sweep_lf, sweep_hd, sweep_k, sweep_vs;
  grid->add_option("--sweep-label-fraction", sweep_lf, "comma list");
  grid->add_option("--sweep-hidden-dim", sweep_hd, "comma list");
  grid->add_option("--sweep-k", sweep_k, "comma list");
  grid->add_option("--sweep-vocab-size", sweep_vs, "comma list");

  auto* chart = app.add_subcommand("chart", "SVG bar charts from a summary.csv");
  std::string chart_dir;
  std::vector<std::string> chart_axes;
  chart->add_option("--out", chart_dir, "directory holding summary.csv")->required();
  chart->add_option("--axis", chart_axes, "axis to chart (default: every axis with more than one value)");

  auto* synth = app.add_subcommand("synth", "write the synthetic two-class text corpus");
  lpssl::SyntheticTextSpec synth_spec;
  std::string synth_path;
  synth->add_option("--out", synth_path, "CSV path")->required();
  synth->add_option("--documents", synth_spec.documents, "document count");
  synth->add_option("--seed", synth_spec.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*prepare) {
      lpssl::Experiment experiment(load_config(common), run_options(common));
      experiment.write_prepared();
      const auto& d = experiment.data();
      std::cout << "vocabulary " << d.vocab.size() << ", train " << d.splits.train.size() << " ("
                << d.splits.train.labeled_count() << " labeled), validation " << d.splits.validation.size()
                << ", digest " << lpssl::digest_hex(experiment.digest()) << '\n';
    } else if (*baseline) {
      lpssl::Experiment experiment(load_config(common), run_options(common));
      experiment.write_prepared();
      experiment.run_baseline();
    } else if (*supervised) {
      lpssl::Experiment experiment(load_config(common), run_options(common));
      experiment.write_prepared();
      experiment.run_fully_supervised();
    } else if (*lp) {
      lpssl::Experiment experiment(load_config(common), run_options(common));
      const auto p = experiment.run_propagation_only();
      std::cout << "pseudo-labels for " << p.pseudo.size() << " points, residual " << p.summary.residual
                << ", iterations " << p.summary.iterations << ", fallback " << p.summary.fallback_count << '\n';
    } else if (*run) {
      lpssl::Experiment experiment(load_config(common), run_options(common));
      for (const auto& r : experiment.run_all())
        std::cout << lpssl::to_string(r.stage) << " accuracy " << r.metrics.accuracy << " f1 " << r.metrics.f1
                  << '\n';
    } else if (*grid) {
      auto kv = merged_key_values(common);
      if (sweep_lf) kv["sweep_label_fraction"] = *sweep_lf;
      if (sweep_hd) kv["sweep_hidden_dim"] = *sweep_hd;
      if (sweep_k) kv["sweep_k"] = *sweep_k;
      if (sweep_vs) kv["sweep_vocab_size"] = *sweep_vs;
      lpssl::ExperimentConfig cfg;
      cfg.apply(kv);
      cfg.validate();
      lpssl::GridSpec sweep;
      sweep.apply(kv);
      const auto result = lpssl::run_grid(cfg, sweep, run_options(common));
      std::cout << result.summary.size() << " summary rows, " << result.failures.size() << " failed cell(s)\n";
      if (!result.failures.empty() && result.records.empty()) return kExitData;
    } else if (*chart) {
      const auto rows = lpssl::read_summary(std::filesystem::path(chart_dir) / "summary.csv");
      auto axes = chart_axes;
      if (axes.empty()) {
        for (const auto& axis : lpssl::summary_axes()) {
          std::set<std::string> values;
          for (const auto& r : rows) values.insert(r.axes.at(axis));
          if (values.size() > 1) axes.push_back(axis);
        }
        if (axes.empty()) axes.push_back("label_fraction");
      }
      for (const auto& axis : axes)
        for (const auto& path : lpssl::emit_charts(rows, axis, chart_dir)) std::cout << path.string() << '\n';
    } else if (*synth) {
      lpssl::write_csv_dataset(synth_path, lpssl::make_synthetic_corpus(synth_spec));
    }
  } catch (const lpssl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
