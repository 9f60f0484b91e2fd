#pragma once

// Text ingestion: cleaning, tokenization, vocabulary construction and
// indexing of documents into padded token-id matrices.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lpssl {

struct RawDocument {
  std::string text;
  std::optional<int> gold_label;
};

/// Token ids of a split, one padded row per document.
using TokenMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Vocabulary {
 public:
  static constexpr std::int32_t pad_id = 0;
  static constexpr std::int32_t unk_id = 1;
  static constexpr std::string_view pad_token = "<pad>";
  static constexpr std::string_view unk_token = "<unk>";

  Vocabulary();

  /// Appends a token with the next free id. Duplicates are ignored.
  std::int32_t add(std::string token, std::uint64_t frequency);

  std::int32_t id_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  std::uint64_t frequency(std::int32_t id) const { return frequencies_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return id_to_token_.size(); }
  std::size_t max_size() const noexcept { return max_size_; }
  void set_max_size(std::size_t max_size) noexcept { max_size_ = max_size; }

  /// `token<TAB>id<TAB>frequency`, one line per entry in id order.
  void dump(std::ostream& out) const;

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };

  std::unordered_map<std::string, std::int32_t, StringHash, std::equal_to<>> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::uint64_t> frequencies_;
  std::size_t max_size_ = 0;
};

enum class SplitTag { Train, Validation, Test };

const char* to_string(SplitTag tag) noexcept;

struct IndexedDataset {
  TokenMatrix sequences;
  std::vector<int> gold_labels;
  std::vector<std::uint8_t> labeled_mask;
  int num_classes = 2;
  SplitTag split = SplitTag::Train;

  std::size_t size() const noexcept { return gold_labels.size(); }
  std::size_t max_len() const noexcept { return static_cast<std::size_t>(sequences.cols()); }
  std::size_t labeled_count() const noexcept;
  std::vector<std::size_t> labeled_indices() const;

  /// Rows selected by `indices`, in that order.
  IndexedDataset subset(std::span<const std::size_t> indices) const;
};

struct SplitSpec {
  double train_fraction = 0.8;
  double label_fraction = 0.1;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig unless 0 < train_fraction < 1 and 0 < label_fraction <= 1.
  void validate() const;
};

/// Lowercase, trim, pad the punctuation set `. , ! ? ; : ' " ( ) -` with
/// spaces, drop every other non-letter non-digit character, collapse runs of
/// whitespace. Input is UTF-8; undecodable bytes are dropped.
std::string clean_text(std::string_view raw);

std::vector<std::string> tokenize(std::string_view cleaned);

/// Tokens ranked by descending frequency, ties lexicographic ascending; ids
/// start at 2 after pad and unk. Throws EmptyCorpus when there are no tokens.
Vocabulary build_vocabulary(std::span<const std::vector<std::string>> corpus, std::size_t max_size);

struct DocumentSplit {
  std::vector<RawDocument> train;
  std::vector<RawDocument> validation;
};

/// Seeded shuffle followed by the train/validation cut.
DocumentSplit split_documents(std::span<const RawDocument> docs, const SplitSpec& spec);

struct IndexedSplits {
  IndexedDataset train;
  IndexedDataset validation;
};

/// Splits like `split_documents`, indexes both halves and marks a
/// class-stratified `label_fraction` of the train half as labeled.
IndexedSplits index_dataset(std::span<const RawDocument> docs, const Vocabulary& vocab,
                            std::size_t max_len, const SplitSpec& spec, int num_classes);

/// Indexes documents in order with every row marked labeled.
IndexedDataset index_documents(std::span<const RawDocument> docs, const Vocabulary& vocab,
                               std::size_t max_len, int num_classes, SplitTag tag);

/// Stratified labeled mask for a set of labels: round(fraction * n) rows in
/// total, distributed over classes by largest remainder.
std::vector<std::uint8_t> stratified_mask(std::span<const int> labels, int num_classes,
                                          double fraction, std::uint64_t seed);

struct LoadedCorpus {
  std::vector<RawDocument> documents;
  std::size_t rejected_rows = 0;
};

/// Reads a `label,text` CSV. Rows with blank text are rejected and counted.
LoadedCorpus load_csv_dataset(const std::filesystem::path& path);

}  // namespace lpssl
