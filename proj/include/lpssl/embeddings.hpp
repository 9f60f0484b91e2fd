#pragma once

#include "lpssl/corpus.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>

namespace lpssl {

using EmbeddingMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Vocabulary-aligned word vectors. Row `Vocabulary::pad_id` is zero.
struct EmbeddingTable {
  EmbeddingMatrix matrix;
  std::size_t matched_count = 0;
  std::size_t duplicate_count = 0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix.cols()); }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
};

/// Default vector for a token without a pretrained row: uniform on
/// [-0.05, 0.05], seeded by the FNV-1a hash of the token.
Eigen::VectorXf default_embedding(std::string_view token, std::size_t dim);

/// Table where every row except pad carries its default vector.
EmbeddingTable default_embedding_table(const Vocabulary& vocab, std::size_t dim);

/// Reads `token v1 ... vd` lines (an optional leading `count dim` header is
/// skipped; `.gz` files are decompressed). Later duplicates overwrite earlier
/// ones and are counted. `expected_dim` of 0 accepts the file's dimension.
EmbeddingTable load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                                 std::size_t expected_dim = 0);

struct EmbeddingReport {
  std::size_t dim = 0;
  std::size_t matched_count = 0;
  std::size_t vocab_size = 0;
  double coverage = 0.0;  // rounded to 4 decimals
};

EmbeddingReport embedding_stats(const EmbeddingTable& table);

}  // namespace lpssl
