#pragma once

// Little-endian binary formats.
//
//   LPFM  features    "LPFM" u32 n u32 h, then n*h f32 row-major
//   LPGR  graph       "LPGR" u32 n u64 nnz, then (n+1) u64 row offsets,
//                     nnz u32 column indices, nnz f32 weights
//   LPCK  checkpoint  "LPCK" u16 version u64 config digest, u32 vocab
//                     u32 embed_dim u32 hidden_dim u32 hidden_layers
//                     u32 classes u8 finetune, then f32 blocks: embedding,
//                     (weights, bias) per hidden layer, output weights, bias

#include "lpssl/error.hpp"
#include "lpssl/graph.hpp"
#include "lpssl/model.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace lpssl::io {

namespace detail {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  std::array<char, sizeof(T)> bytes;
  for (std::size_t b = 0; b < sizeof(T); ++b)
    bytes[b] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * b)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

inline void put_f32(std::ostream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  put(out, bits);
}

template <typename T>
T get(std::istream& in) {
  static_assert(std::is_integral_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw Error(ErrorKind::FileUnreadable, "unexpected end of binary file");
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  return static_cast<T>(v);
}

inline float get_f32(std::istream& in) {
  const auto bits = get<std::uint32_t>(in);
  float value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

inline void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::filesystem::path& path) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
    throw Error(ErrorKind::FileUnreadable, path.string() + " is not a " + std::string(magic, 4) + " file");
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::FileUnreadable, "cannot write " + path.string());
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileUnreadable, "cannot open " + path.string());
  return in;
}

template <typename Matrix>
void put_block(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f32(out, static_cast<float>(m(i, j)));
}

template <typename Matrix>
void get_block(std::istream& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<typename Matrix::Scalar>(get_f32(in));
}

}  // namespace detail

template <typename Scalar>
void write_features(const std::filesystem::path& path, const FeatureMatrix<Scalar>& features) {
  auto out = detail::open_out(path);
  detail::put_magic(out, "LPFM");
  detail::put(out, static_cast<std::uint32_t>(features.rows()));
  detail::put(out, static_cast<std::uint32_t>(features.dim()));
  detail::put_block(out, features.values);
}

template <typename Scalar = float>
FeatureMatrix<Scalar> read_features(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::expect_magic(in, "LPFM", path);
  const auto n = detail::get<std::uint32_t>(in);
  const auto h = detail::get<std::uint32_t>(in);
  FeatureMatrix<Scalar> f;
  f.values.resize(n, h);
  detail::get_block(in, f.values);
  return f;
}

template <typename Scalar>
void write_graph(const std::filesystem::path& path, const SparseAffinity<Scalar>& graph) {
  const auto& m = graph.matrix;
  if (!m.isCompressed()) throw Error(ErrorKind::InvalidConfig, "graph must be compressed before writing");
  auto out = detail::open_out(path);
  detail::put_magic(out, "LPGR");
  detail::put(out, static_cast<std::uint32_t>(m.rows()));
  detail::put(out, static_cast<std::uint64_t>(m.nonZeros()));
  for (Eigen::Index i = 0; i <= m.rows(); ++i) detail::put(out, static_cast<std::uint64_t>(m.outerIndexPtr()[i]));
  for (Eigen::Index e = 0; e < m.nonZeros(); ++e) detail::put(out, static_cast<std::uint32_t>(m.innerIndexPtr()[e]));
  for (Eigen::Index e = 0; e < m.nonZeros(); ++e) detail::put_f32(out, static_cast<float>(m.valuePtr()[e]));
}

/// Reads the CSR arrays back; k, gamma and the normalized flag are not stored.
template <typename Scalar = double>
SparseAffinity<Scalar> read_graph(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::expect_magic(in, "LPGR", path);
  const auto n = detail::get<std::uint32_t>(in);
  const auto nnz = detail::get<std::uint64_t>(in);
  std::vector<std::uint64_t> offsets(n + 1);
  for (auto& o : offsets) o = detail::get<std::uint64_t>(in);
  std::vector<std::uint32_t> cols(nnz);
  for (auto& c : cols) c = detail::get<std::uint32_t>(in);
  if (offsets.front() != 0 || offsets.back() != nnz)
    throw Error(ErrorKind::FileUnreadable, path.string() + ": inconsistent row offsets");

  std::vector<float> weights(nnz);
  for (auto& w : weights) w = detail::get_f32(in);

  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(nnz);
  for (std::uint32_t i = 0; i < n; ++i)
    for (auto e = offsets[i]; e < offsets[i + 1]; ++e) {
      if (cols[e] >= n) throw Error(ErrorKind::FileUnreadable, path.string() + ": column index out of range");
      triplets.emplace_back(i, cols[e], static_cast<Scalar>(weights[e]));
    }

  SparseAffinity<Scalar> g;
  g.matrix.resize(n, n);
  g.matrix.setFromTriplets(triplets.begin(), triplets.end());
  g.matrix.makeCompressed();
  return g;
}

struct CheckpointHeader {
  std::uint16_t version = 1;
  std::uint64_t config_digest = 0;
  std::uint32_t vocab_size = 0;
  std::uint32_t embed_dim = 0;
  std::uint32_t hidden_dim = 0;
  std::uint32_t hidden_layers = 0;
  std::uint32_t num_classes = 0;
  bool finetune_embeddings = true;
};

template <typename Scalar>
void write_checkpoint(const std::filesystem::path& path, const ClassifierParams<Scalar>& params,
                      std::uint64_t config_digest) {
  auto out = detail::open_out(path);
  detail::put_magic(out, "LPCK");
  detail::put(out, std::uint16_t{1});
  detail::put(out, config_digest);
  detail::put(out, static_cast<std::uint32_t>(params.vocab_size()));
  detail::put(out, static_cast<std::uint32_t>(params.embed_dim()));
  detail::put(out, static_cast<std::uint32_t>(params.hidden_dim()));
  detail::put(out, static_cast<std::uint32_t>(params.hidden.size()));
  detail::put(out, static_cast<std::uint32_t>(params.num_classes()));
  detail::put(out, static_cast<std::uint8_t>(params.finetune_embeddings));
  detail::put_block(out, params.embedding);
  for (const auto& layer : params.hidden) {
    detail::put_block(out, layer.weights);
    detail::put_block(out, layer.bias);
  }
  detail::put_block(out, params.output.weights);
  detail::put_block(out, params.output.bias);
  if (!out) throw Error(ErrorKind::FileUnreadable, "failed writing " + path.string());
}

inline CheckpointHeader read_checkpoint_header(std::istream& in, const std::filesystem::path& path) {
  detail::expect_magic(in, "LPCK", path);
  CheckpointHeader h;
  h.version = detail::get<std::uint16_t>(in);
  if (h.version != 1) throw Error(ErrorKind::FileUnreadable, path.string() + ": unsupported checkpoint version");
  h.config_digest = detail::get<std::uint64_t>(in);
  h.vocab_size = detail::get<std::uint32_t>(in);
  h.embed_dim = detail::get<std::uint32_t>(in);
  h.hidden_dim = detail::get<std::uint32_t>(in);
  h.hidden_layers = detail::get<std::uint32_t>(in);
  h.num_classes = detail::get<std::uint32_t>(in);
  h.finetune_embeddings = detail::get<std::uint8_t>(in) != 0;
  return h;
}

struct ExpectedShape {
  std::uint32_t vocab_size = 0;
  std::uint32_t embed_dim = 0;
  std::uint32_t hidden_dim = 0;
  std::uint32_t hidden_layers = 0;
  std::uint32_t num_classes = 0;
};

template <typename Scalar>
struct LoadedCheckpoint {
  CheckpointHeader header;
  ClassifierParams<Scalar> params;
};

/// Loads a checkpoint, rejecting it with DimensionMismatch when `expected`
/// is given and any dimension differs.
template <typename Scalar>
LoadedCheckpoint<Scalar> read_checkpoint(const std::filesystem::path& path,
                                         const std::optional<ExpectedShape>& expected = std::nullopt) {
  auto in = detail::open_in(path);
  LoadedCheckpoint<Scalar> ck;
  ck.header = read_checkpoint_header(in, path);
  const auto& h = ck.header;
  if (expected && (expected->vocab_size != h.vocab_size || expected->embed_dim != h.embed_dim ||
                   expected->hidden_dim != h.hidden_dim || expected->hidden_layers != h.hidden_layers ||
                   expected->num_classes != h.num_classes))
    throw Error(ErrorKind::DimensionMismatch, path.string() + ": checkpoint dimensions do not match the config");

  auto& p = ck.params;
  p.finetune_embeddings = h.finetune_embeddings;
  p.embedding.resize(h.vocab_size, h.embed_dim);
  detail::get_block(in, p.embedding);
  Eigen::Index in_dim = h.embed_dim;
  for (std::uint32_t l = 0; l < h.hidden_layers; ++l) {
    DenseLayer<Scalar> layer{DenseRows<Scalar>(in_dim, h.hidden_dim), RowVector<Scalar>(h.hidden_dim)};
    detail::get_block(in, layer.weights);
    detail::get_block(in, layer.bias);
    p.hidden.push_back(std::move(layer));
    in_dim = h.hidden_dim;
  }
  p.output = {DenseRows<Scalar>(in_dim, h.num_classes), RowVector<Scalar>(h.num_classes)};
  detail::get_block(in, p.output.weights);
  detail::get_block(in, p.output.bias);
  return ck;
}

}  // namespace lpssl::io
