#include "lpssl/config.hpp"
#include "lpssl/csv.hpp"
#include "lpssl/pipeline.hpp"
#include "lpssl/svg_chart.hpp"
#include "lpssl/synthetic.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <sys/wait.h>

using namespace lpssl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lpssl_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const fs::path& small_corpus() {
  static const fs::path path = [] {
    const auto p = fs::temp_directory_path() / "lpssl_pipeline_corpus.csv";
    SyntheticTextSpec spec;
    spec.documents = 300;
    write_csv_dataset(p, make_synthetic_corpus(spec));
    return p;
  }();
  return path;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.dataset = small_corpus().string();
  c.embedding_dim = 8;
  c.vocab_size = 400;
  c.max_len = 48;
  c.k = 5;
  c.hidden_dim = 8;
  c.batch_size = 32;
  c.learning_rate = 1e-2;
  c.epochs = {3, 3, 3};
  c.split.label_fraction = 0.2;
  c.split.seed = 4;
  c.out = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LPSSL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidConfig;
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in("# comment\ndataset = a.csv\nk=7  # trailing\n\nepochs = 2,3,4\nalpha=0.5\n");
  ExperimentConfig c;
  c.apply(parse_key_values(in));
  CHECK(c.dataset == "a.csv");
  CHECK(c.k == 7);
  CHECK(c.epochs.baseline == 2);
  CHECK(c.epochs.full == 4);
  CHECK(c.diffusion.alpha == 0.5);

  std::istringstream unknown("colour = red\n");
  CHECK(kind_of([&] { c.apply(parse_key_values(unknown)); }) == ErrorKind::InvalidConfig);
  std::istringstream repeated("k = 1\nk = 2\n");
  CHECK_THROWS_AS(parse_key_values(repeated), Error);
  std::istringstream bad("k = seven\n");
  CHECK_THROWS_AS(c.apply(parse_key_values(bad)), Error);

  ExperimentConfig d;
  d.dataset = "x.csv";
  d.diffusion.alpha = 1.0;
  CHECK(kind_of([&] { d.validate(false); }) == ErrorKind::AlphaOutOfRange);
}

TEST_CASE("config digest tracks every setting except the output directory") {
  auto a = small_config("/tmp/one");
  auto b = small_config("/tmp/two");
  CHECK(a.digest() == b.digest());
  b.gamma = 2.0;
  CHECK(a.digest() != b.digest());
  CHECK(digest_hex(0x1f) == "000000000000001f");
  CHECK(a.canonical().find("out=") == std::string::npos);
}

TEST_CASE("grid expansion") {
  GridSpec g;
  std::istringstream in("sweep_k = 5, 10\nsweep_hidden_dim = 16,32,64\n");
  g.apply(parse_key_values(in));
  const auto cells = g.expand(small_config("/tmp/x"));
  CHECK(cells.size() == 6);
  CHECK(g.axes() == std::vector<std::string>{"hidden_dim", "k"});
  CHECK(cells[0].hidden_dim == 16);
  CHECK(cells[1].k == 10);
}

TEST_CASE("full labels make the baseline the supervised model") {
  auto cfg = small_config(scratch("full_labels"));
  cfg.split.label_fraction = 1.0;
  Experiment e(cfg);
  const auto base = e.run_baseline();
  const auto sup = e.run_fully_supervised();
  CHECK(base.metrics.accuracy == sup.metrics.accuracy);
  CHECK(base.metrics.f1 == sup.metrics.f1);
  CHECK(base.loss_curve == sup.loss_curve);
}

TEST_CASE("no labeled points") {
  auto cfg = small_config(scratch("no_labels"));
  cfg.split.label_fraction = 0.001;
  Experiment e(cfg);
  CHECK(kind_of([&] { e.run_baseline(); }) == ErrorKind::NoLabeledPoints);
}

TEST_CASE("propagation needs the baseline checkpoint") {
  const auto out = scratch("ordering");
  Experiment e(small_config(out));
  CHECK(kind_of([&] { e.run_propagation_only(); }) == ErrorKind::MissingCheckpoint);

  e.run_baseline();
  auto other = small_config(out);
  other.gamma = 2.0;
  Experiment stale(other);
  CHECK(kind_of([&] { stale.run_propagation_only(); }) == ErrorKind::MissingCheckpoint);

  const auto p = e.run_propagation_only();
  CHECK(fs::exists(out / "lp" / "pseudo_labels.csv"));
  CHECK(p.pseudo.size() == e.data().splits.train.size());
}

TEST_CASE("near-zero alpha falls back to uniform rows") {
  auto cfg = small_config(scratch("tiny_alpha"));
  cfg.diffusion.alpha = 1e-12;
  Experiment e(cfg);
  e.run_baseline();
  const auto p = e.run_propagation_only();
  const auto& train = e.data().splits.train;
  CHECK(p.summary.fallback_count == train.size() - train.labeled_count());
}

TEST_CASE("run_all writes every stage") {
  const auto out = scratch("run_all");
  Experiment e(small_config(out));
  const auto records = e.run_all();
  REQUIRE(records.size() == 4);
  CHECK(records[0].stage == Stage::Baseline);
  CHECK(records[1].stage == Stage::FullySupervised);
  CHECK(records[2].stage == Stage::LpSsl);
  CHECK(records[3].stage == Stage::Full);
  for (const char* dir : {"baseline", "fully_supervised", "lp_ssl", "full"}) {
    CHECK(fs::exists(out / dir / "metrics.json"));
    CHECK(fs::exists(out / dir / "checkpoint.lpck"));
  }
  CHECK(fs::exists(out / "lp_ssl" / "graph.lpgr"));
  CHECK(fs::exists(out / "vocab.tsv"));
  CHECK(fs::exists(out / "summary.csv"));
  const auto metrics = slurp(out / "lp_ssl" / "metrics.json");
  CHECK(metrics.find("\"wall_time_s\": null") != std::string::npos);
  CHECK(records[2].propagation.has_value());

  // pseudo-label export covers every training point
  std::ifstream in(out / "lp_ssl" / "pseudo_labels.csv");
  const auto rows = csv::parse(in);
  CHECK(rows.size() == e.data().splits.train.size() + 1);
  CHECK(rows[0] == std::vector<std::string>{"index", "pseudo_label", "certainty", "is_seed"});
}

TEST_CASE("summary round trip") {
  const auto out = scratch("summary");
  const auto cfg = small_config(out);
  RunRecord r;
  r.stage = Stage::LpSsl;
  r.metrics.accuracy = 0.75;
  r.metrics.f1 = 0.5;
  r.config_digest = digest_hex(cfg.digest());
  const auto rows = summary_rows(2, cfg, {r});
  write_summary(out / "summary.csv", rows);
  const auto back = read_summary(out / "summary.csv");
  REQUIRE(back.size() == rows.size());
  CHECK(back[0].cell == 2);
  CHECK(back[0].stage == "lp_ssl");
  CHECK(back[0].axes.at("k") == "5");
  CHECK(back[0].value == 0.75);
}

TEST_CASE("charts agree with their CSV") {
  const auto out = scratch("charts");
  std::vector<SummaryRow> rows;
  const std::map<std::string, std::string> axes{{"label_fraction", "0.1"}, {"hidden_dim", "64"}, {"k", "10"}, {"vocab_size", "100"}};
  const std::vector<std::pair<std::string, double>> values{{"baseline", 0.61}, {"lp_ssl", 0.7}, {"fully_supervised", 1.0}};
  for (const auto& [stage, v] : values) rows.push_back({0, "d", axes, stage, "accuracy", v});

  const auto written = emit_charts(rows, "label_fraction", out);
  REQUIRE(written.size() == 2);
  const auto svg = slurp(out / "chart_label_fraction_accuracy.svg");
  std::ifstream csv_in(out / "chart_label_fraction_accuracy.csv");
  const auto table = csv::parse(csv_in);
  REQUIRE(table.size() == 4);

  const std::regex bar(R"re(<rect class="bar" data-series="[^"]*" data-group="([^"]*)" data-value="([^"]*)" x="[^"]*" y="([^"]*)")re");
  std::vector<std::pair<std::string, double>> bars;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), bar); it != std::sregex_iterator(); ++it)
    bars.emplace_back((*it)[2].str(), std::stod((*it)[3].str()));
  REQUIRE(bars.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(bars[i].first == table[i + 1][2]);

  const std::regex top(R"re(<line class="gridline" data-value="1.000000" x1="[^"]*" y1="([^"]*)")re");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, top));
  CHECK(bars[2].second == std::stod(m[1].str()));
  CHECK(bars[0].second > bars[1].second);

  CHECK_THROWS_AS(emit_charts(rows, "colour", out), Error);
}

TEST_CASE("chart geometry") {
  ChartGeometry g;
  CHECK(g.y_of(1.0) == g.plot_top());
  CHECK(g.y_of(0.0) == g.plot_bottom());
  CHECK(chart_value(0.5) == "0.500000");
}

TEST_CASE("grid with one value per axis") {
  const auto out = scratch("grid_single");
  GridSpec g;
  g.label_fraction = {0.2};
  const auto result = run_grid(small_config(out), g);
  CHECK(result.failures.empty());
  CHECK(result.records.size() == 4);
  CHECK(fs::exists(out / "cell_000" / "baseline" / "metrics.json"));
  CHECK(fs::exists(out / "summary.csv"));
  CHECK(fs::exists(out / "chart_label_fraction_accuracy.svg"));
}

TEST_CASE("grid records failing cells and continues") {
  const auto out = scratch("grid_failure");
  GridSpec g;
  g.k = {5, 100000};
  const auto result = run_grid(small_config(out), g);
  CHECK(result.failures.size() == 1);
  CHECK(result.records.size() == 4);
  CHECK(fs::exists(out / "failures.csv"));
}

TEST_CASE("CLI exit codes") {
  const auto out = scratch("cli");
  const auto conf = out / "bad.conf";
  std::ofstream(conf) << "colour = red\n";
  CHECK(run_cli("run --config " + conf.string()) == 2);
  CHECK(run_cli("run --dataset " + small_corpus().string() + " --alpha 1.5 --out " + out.string()) == 2);
  CHECK(run_cli("lp --dataset " + small_corpus().string() + " --out " + (out / "empty").string()) == 3);
  CHECK(run_cli("run --no-such-flag") == 2);
  CHECK(run_cli("synth --out " + (out / "s.csv").string() + " --documents 20") == 0);
  CHECK(fs::exists(out / "s.csv"));
}
