#include "lpssl/config.hpp"

#include "lpssl/error.hpp"
#include "lpssl/random.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lpssl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorKind::InvalidConfig, "bad value for '" + key + "': '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* first = value.data();
  const auto* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": expected 'key = value'");
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": repeated key '" + key + "'");
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open config " + path.string());
  return parse_key_values(in);
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

void ExperimentConfig::apply(const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key.starts_with("sweep_")) continue;
    if (key == "dataset") dataset = value;
    else if (key == "test_dataset") test_dataset = value;
    else if (key == "embeddings") embeddings = value;
    else if (key == "embedding_dim") embedding_dim = parse_number<int>(key, value);
    else if (key == "vocab_size") vocab_size = parse_number<std::size_t>(key, value);
    else if (key == "max_len") max_len = parse_number<std::size_t>(key, value);
    else if (key == "num_classes") num_classes = parse_number<int>(key, value);
    else if (key == "train_fraction") split.train_fraction = parse_number<double>(key, value);
    else if (key == "label_fraction") split.label_fraction = parse_number<double>(key, value);
    else if (key == "seed") split.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "k") k = parse_number<Eigen::Index>(key, value);
    else if (key == "gamma") gamma = parse_number<double>(key, value);
    else if (key == "alpha") diffusion.alpha = parse_number<double>(key, value);
    else if (key == "tol") diffusion.tol = parse_number<double>(key, value);
    else if (key == "max_iter") diffusion.max_iter = parse_number<int>(key, value);
    else if (key == "hidden_dim") hidden_dim = parse_number<int>(key, value);
    else if (key == "hidden_layers") hidden_layers = parse_number<int>(key, value);
    else if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
    else if (key == "batch_size") batch_size = parse_number<int>(key, value);
    else if (key == "epochs") {
      const auto parts = split_list(value);
      if (parts.size() == 1) {
        epochs.baseline = epochs.lp_ssl = epochs.full = parse_number<int>(key, parts[0]);
      } else if (parts.size() == 3) {
        epochs.baseline = parse_number<int>(key, parts[0]);
        epochs.lp_ssl = parse_number<int>(key, parts[1]);
        epochs.full = parse_number<int>(key, parts[2]);
      } else {
        bad_value(key, value);
      }
    } else if (key == "finetune_embeddings") finetune_embeddings = parse_bool(key, value);
    else if (key == "out") out = value;
    else throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
  }
}

void ExperimentConfig::validate(bool check_files) const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::InvalidConfig, what);
  };
  require(!dataset.empty(), "dataset path is required");
  require(embedding_dim >= 1, "embedding_dim must be >= 1");
  require(vocab_size >= 1, "vocab_size must be >= 1");
  require(max_len >= 1, "max_len must be >= 1");
  require(num_classes >= 2, "num_classes must be >= 2");
  split.validate();
  require(k >= 1, "k must be >= 1");
  require(gamma > 0.0, "gamma must be > 0");
  if (!(diffusion.alpha > 0.0 && diffusion.alpha < 1.0))
    throw Error(ErrorKind::AlphaOutOfRange, "alpha must lie in (0, 1)");
  require(diffusion.tol > 0.0, "tol must be > 0");
  require(diffusion.max_iter >= 1, "max_iter must be >= 1");
  require(hidden_dim >= 1, "hidden_dim must be >= 1");
  require(hidden_layers >= 1, "hidden_layers must be >= 1");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs.baseline >= 1 && epochs.lp_ssl >= 1 && epochs.full >= 1, "epochs must be >= 1");
  if (check_files) {
    require(std::filesystem::exists(dataset), "dataset not found: " + dataset);
    require(test_dataset.empty() || std::filesystem::exists(test_dataset), "test_dataset not found: " + test_dataset);
    require(embeddings.empty() || std::filesystem::exists(embeddings), "embeddings not found: " + embeddings);
  }
}

KeyValues ExperimentConfig::resolved() const {
  return {
      {"alpha", format_double(diffusion.alpha)},
      {"batch_size", std::to_string(batch_size)},
      {"dataset", dataset},
      {"embedding_dim", std::to_string(embedding_dim)},
      {"embeddings", embeddings},
      {"epochs", std::to_string(epochs.baseline) + "," + std::to_string(epochs.lp_ssl) + "," +
                     std::to_string(epochs.full)},
      {"finetune_embeddings", finetune_embeddings ? "true" : "false"},
      {"gamma", format_double(gamma)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"hidden_layers", std::to_string(hidden_layers)},
      {"k", std::to_string(k)},
      {"label_fraction", format_double(split.label_fraction)},
      {"learning_rate", format_double(learning_rate)},
      {"max_iter", std::to_string(diffusion.max_iter)},
      {"max_len", std::to_string(max_len)},
      {"num_classes", std::to_string(num_classes)},
      {"out", out},
      {"seed", std::to_string(split.seed)},
      {"test_dataset", test_dataset},
      {"tol", format_double(diffusion.tol)},
      {"train_fraction", format_double(split.train_fraction)},
      {"vocab_size", std::to_string(vocab_size)},
  };
}

std::string ExperimentConfig::canonical() const {
  std::string out_text;
  for (const auto& [key, value] : resolved()) {
    if (key == "out") continue;
    out_text += key + "=" + value + "\n";
  }
  return out_text;
}

std::uint64_t ExperimentConfig::digest() const { return fnv1a64(canonical()); }

void GridSpec::apply(const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (!key.starts_with("sweep_")) continue;
    const auto items = split_list(value);
    if (key == "sweep_label_fraction") {
      label_fraction.clear();
      for (const auto& v : items) label_fraction.push_back(parse_number<double>(key, v));
    } else if (key == "sweep_hidden_dim") {
      hidden_dim.clear();
      for (const auto& v : items) hidden_dim.push_back(parse_number<int>(key, v));
    } else if (key == "sweep_k") {
      k.clear();
      for (const auto& v : items) k.push_back(parse_number<Eigen::Index>(key, v));
    } else if (key == "sweep_vocab_size") {
      vocab_size.clear();
      for (const auto& v : items) vocab_size.push_back(parse_number<std::size_t>(key, v));
    } else {
      throw Error(ErrorKind::InvalidConfig, "unknown sweep key '" + key + "'");
    }
  }
}

bool GridSpec::empty() const { return label_fraction.empty() && hidden_dim.empty() && k.empty() && vocab_size.empty(); }

std::vector<std::string> GridSpec::axes() const {
  std::vector<std::string> out;
  if (!label_fraction.empty()) out.push_back("label_fraction");
  if (!hidden_dim.empty()) out.push_back("hidden_dim");
  if (!k.empty()) out.push_back("k");
  if (!vocab_size.empty()) out.push_back("vocab_size");
  return out;
}

std::vector<ExperimentConfig> GridSpec::expand(const ExperimentConfig& base) const {
  const std::vector<double> lf = label_fraction.empty() ? std::vector<double>{base.split.label_fraction} : label_fraction;
  const std::vector<int> hd = hidden_dim.empty() ? std::vector<int>{base.hidden_dim} : hidden_dim;
  const std::vector<Eigen::Index> ks = k.empty() ? std::vector<Eigen::Index>{base.k} : k;
  const std::vector<std::size_t> vs = vocab_size.empty() ? std::vector<std::size_t>{base.vocab_size} : vocab_size;

  std::vector<ExperimentConfig> cells;
  for (double f : lf)
    for (int h : hd)
      for (auto kk : ks)
        for (auto v : vs) {
          ExperimentConfig c = base;
          c.split.label_fraction = f;
          c.hidden_dim = h;
          c.k = kk;
          c.vocab_size = v;
          cells.push_back(std::move(c));
        }
  return cells;
}

}  // namespace lpssl
