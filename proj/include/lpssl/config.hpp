#pragma once

// Experiment configuration: a flat `key = value` file plus overrides.
// The digest is FNV-1a 64 over the canonical `key=value\n` list of every
// resolved key except the output directory.

#include "lpssl/corpus.hpp"
#include "lpssl/diffusion.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lpssl {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment. Throws InvalidConfig on
/// malformed lines or repeated keys.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& path);

struct EpochSchedule {
  int baseline = 10;  // M, also used by the fully supervised stage
  int lp_ssl = 10;    // E
  int full = 10;      // N
};

struct ExperimentConfig {
  std::string dataset;
  std::string test_dataset;
  std::string embeddings;
  int embedding_dim = 100;
  std::size_t vocab_size = 10000;
  std::size_t max_len = 256;
  int num_classes = 2;
  SplitSpec split;

  Eigen::Index k = 100;
  double gamma = 3.0;
  DiffusionOptions diffusion;

  int hidden_dim = 64;
  int hidden_layers = 1;
  double learning_rate = 1e-3;
  int batch_size = 64;
  EpochSchedule epochs;
  bool finetune_embeddings = true;

  std::string out = "runs";

  /// Applies every known key; unknown keys throw InvalidConfig. Keys starting
  /// with `sweep_` are left to GridSpec.
  void apply(const KeyValues& kv);

  /// Range checks; with `check_files` the referenced files must exist.
  void validate(bool check_files = true) const;

  /// Every key with its canonical value, `out` included.
  KeyValues resolved() const;
  /// Canonical `key=value\n` lines without `out`.
  std::string canonical() const;
  std::uint64_t digest() const;
};

std::string digest_hex(std::uint64_t digest);

/// Shortest round-tripping decimal form.
std::string format_double(double value);

struct GridSpec {
  std::vector<double> label_fraction;
  std::vector<int> hidden_dim;
  std::vector<Eigen::Index> k;
  std::vector<std::size_t> vocab_size;

  /// Reads `sweep_label_fraction`, `sweep_hidden_dim`, `sweep_k` and
  /// `sweep_vocab_size` as comma lists.
  void apply(const KeyValues& kv);
  bool empty() const;

  /// Cartesian product; axes left empty keep the base value.
  std::vector<ExperimentConfig> expand(const ExperimentConfig& base) const;
  /// Axes with at least one value.
  std::vector<std::string> axes() const;
};

}  // namespace lpssl
