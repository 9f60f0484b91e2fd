#include "lpssl/embeddings.hpp"

#include "lpssl/error.hpp"
#include "lpssl/random.hpp"

#include <zlib.h>

#include <charconv>
#include <cstring>
#include <cmath>
#include <memory>
#include <vector>

namespace lpssl {

namespace {

// Line reader over zlib; plain files pass through gzread unchanged.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : file_(gzopen(path.c_str(), "rb"), &gzclose) {
    if (!file_) throw Error(ErrorKind::FileUnreadable, "cannot open " + path.string());
  }

  bool next(std::string& line) {
    line.clear();
    for (;;) {
      if (pos_ == len_) {
        const int got = gzread(file_.get(), buffer_.data(), static_cast<unsigned>(buffer_.size()));
        if (got < 0) throw Error(ErrorKind::FileUnreadable, "read error in compressed stream");
        if (got == 0) return !line.empty();
        pos_ = 0;
        len_ = static_cast<std::size_t>(got);
      }
      const char* begin = buffer_.data() + pos_;
      const char* nl = static_cast<const char*>(std::memchr(begin, '\n', len_ - pos_));
      if (nl) {
        line.append(begin, nl);
        pos_ += static_cast<std::size_t>(nl - begin) + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
      line.append(begin, len_ - pos_);
      pos_ = len_;
    }
  }

 private:
  std::unique_ptr<gzFile_s, int (*)(gzFile)> file_;
  std::vector<char> buffer_ = std::vector<char>(1 << 16);
  std::size_t pos_ = 0;
  std::size_t len_ = 0;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto start = line.find_first_not_of(" \t", pos);
    if (start == std::string_view::npos) break;
    auto end = line.find_first_of(" \t", start);
    if (end == std::string_view::npos) end = line.size();
    fields.push_back(line.substr(start, end - start));
    pos = end;
  }
  return fields;
}

bool parse_unsigned(std::string_view s, std::size_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Eigen::VectorXf default_embedding(std::string_view token, std::size_t dim) {
  Rng rng(fnv1a64(token));
  Eigen::VectorXf v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<float>(uniform(rng, -0.05, 0.05));
  return v;
}

EmbeddingTable default_embedding_table(const Vocabulary& vocab, std::size_t dim) {
  if (dim < 1) throw Error(ErrorKind::InvalidConfig, "embedding dimension must be >= 1");
  EmbeddingTable table;
  table.matrix.resize(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    const auto row = static_cast<Eigen::Index>(id);
    if (static_cast<std::int32_t>(id) == Vocabulary::pad_id)
      table.matrix.row(row).setZero();
    else
      table.matrix.row(row) = default_embedding(vocab.token(static_cast<std::int32_t>(id)), dim).transpose();
  }
  return table;
}

EmbeddingTable load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                                 std::size_t expected_dim) {
  LineReader reader(path);
  std::string line;
  std::size_t dim = expected_dim;
  std::size_t line_no = 0;
  bool any_vector = false;

  std::vector<std::uint8_t> matched(vocab.size(), 0);
  EmbeddingMatrix pretrained;
  std::size_t duplicates = 0;

  while (reader.next(line)) {
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    std::size_t a, b;
    if (line_no == 1 && fields.size() == 2 && parse_unsigned(fields[0], a) && parse_unsigned(fields[1], b)) {
      continue;  // `count dim` header
    }
    const std::size_t d = fields.size() - 1;
    if (d == 0) throw Error(ErrorKind::DimensionMismatch, "line " + std::to_string(line_no) + " has no values");
    if (dim == 0) dim = d;
    if (d != dim)
      throw Error(ErrorKind::DimensionMismatch, "line " + std::to_string(line_no) + " has " + std::to_string(d) +
                                                    " values, expected " + std::to_string(dim));
    if (!any_vector) {
      pretrained = EmbeddingMatrix::Zero(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim));
      any_vector = true;
    }
    const auto tok = fields[0];
    if (!vocab.contains(tok) || tok == Vocabulary::pad_token || tok == Vocabulary::unk_token) continue;
    const auto id = static_cast<std::size_t>(vocab.id_of(tok));
    if (matched[id]) ++duplicates;
    matched[id] = 1;
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = fields[j + 1];
      float value = 0.0f;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(value))
        throw Error(ErrorKind::FileUnreadable,
                    "line " + std::to_string(line_no) + ": bad value '" + std::string(f) + "'");
      pretrained(static_cast<Eigen::Index>(id), static_cast<Eigen::Index>(j)) = value;
    }
  }
  if (!any_vector) throw Error(ErrorKind::EmptyFile, path.string() + " holds no vectors");

  EmbeddingTable table = default_embedding_table(vocab, dim);
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (!matched[id]) continue;
    table.matrix.row(static_cast<Eigen::Index>(id)) = pretrained.row(static_cast<Eigen::Index>(id));
    ++table.matched_count;
  }
  table.duplicate_count = duplicates;
  return table;
}

EmbeddingReport embedding_stats(const EmbeddingTable& table) {
  EmbeddingReport r;
  r.dim = table.dim();
  r.matched_count = table.matched_count;
  r.vocab_size = table.rows();
  if (r.vocab_size > 0)
    r.coverage = std::round(static_cast<double>(r.matched_count) / static_cast<double>(r.vocab_size) * 1e4) / 1e4;
  return r;
}

}  // namespace lpssl
