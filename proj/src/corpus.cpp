#include "lpssl/corpus.hpp"

#include "lpssl/csv.hpp"
#include "lpssl/error.hpp"
#include "lpssl/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>

namespace lpssl {

namespace {

constexpr std::string_view kPunctuation = ".,!?;:'\"()-";

// Decodes one UTF-8 sequence starting at `pos`. Returns false for malformed
// input, in which case `pos` advances past the offending byte.
bool decode_utf8(std::string_view s, std::size_t& pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  int len;
  if (b0 < 0x80) {
    cp = b0;
    ++pos;
    return true;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return false;
  }
  if (pos + static_cast<std::size_t>(len) > s.size()) {
    ++pos;
    return false;
  }
  for (int i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + static_cast<std::size_t>(i)]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return false;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++pos;
    return false;
  }
  pos += static_cast<std::size_t>(len);
  return true;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Letters are ASCII plus the Latin-1, Latin Extended-A/B, Greek and Cyrillic
// blocks; everything else outside ASCII digits is filtered.
bool is_letter(char32_t c) {
  if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
  if (c == 0xAA || c == 0xB5 || c == 0xBA) return true;
  if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
  if (c >= 0x370 && c <= 0x3FF) return c != 0x37E && c != 0x387 && c != 0x375;
  if (c >= 0x400 && c <= 0x481) return true;
  if (c >= 0x48A && c <= 0x52F) return true;
  return false;
}

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' ||
         c == 0xA0 || c == 0x2028 || c == 0x2029 || (c >= 0x2000 && c <= 0x200A) || c == 0x3000;
}

char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x100 && c <= 0x137 && c != 0x130) return c | 1;
  if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return c | 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

bool is_punctuation(char32_t c) {
  return c < 0x80 && kPunctuation.find(static_cast<char>(c)) != std::string_view::npos;
}

}  // namespace

const char* to_string(SplitTag tag) noexcept {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Validation: return "validation";
    case SplitTag::Test: return "test";
  }
  return "unknown";
}

std::string clean_text(std::string_view raw) {
  std::string spaced;
  spaced.reserve(raw.size() + 8);
  std::size_t pos = 0;
  while (pos < raw.size()) {
    char32_t cp;
    if (!decode_utf8(raw, pos, cp)) continue;
    cp = to_lower(cp);
    if (is_punctuation(cp)) {
      spaced.push_back(' ');
      spaced.push_back(static_cast<char>(cp));
      spaced.push_back(' ');
    } else if (is_space(cp)) {
      spaced.push_back(' ');
    } else if (is_letter(cp) || is_digit(cp)) {
      encode_utf8(cp, spaced);
    }
  }

  std::string out;
  out.reserve(spaced.size());
  for (char c : spaced) {
    if (c == ' ') {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<std::string> tokenize(std::string_view cleaned) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    const auto start = cleaned.find_first_not_of(" \t\n\r\v\f", pos);
    if (start == std::string_view::npos) break;
    auto end = cleaned.find_first_of(" \t\n\r\v\f", start);
    if (end == std::string_view::npos) end = cleaned.size();
    tokens.emplace_back(cleaned.substr(start, end - start));
    pos = end;
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  add(std::string(pad_token), 0);
  add(std::string(unk_token), 0);
}

std::int32_t Vocabulary::add(std::string token, std::uint64_t frequency) {
  if (auto it = token_to_id_.find(token); it != token_to_id_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
  frequencies_.push_back(frequency);
  return id;
}

std::int32_t Vocabulary::id_of(std::string_view token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? unk_id : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return token_to_id_.find(token) != token_to_id_.end(); }

void Vocabulary::dump(std::ostream& out) const {
  for (std::size_t id = 0; id < id_to_token_.size(); ++id)
    out << id_to_token_[id] << '\t' << id << '\t' << frequencies_[id] << '\n';
}

Vocabulary build_vocabulary(std::span<const std::vector<std::string>> corpus, std::size_t max_size) {
  if (max_size < 1) throw Error(ErrorKind::InvalidConfig, "vocabulary max_size must be >= 1");

  std::unordered_map<std::string_view, std::uint64_t> counts;
  for (const auto& doc : corpus)
    for (const auto& tok : doc) ++counts[tok];
  if (counts.empty()) throw Error(ErrorKind::EmptyCorpus, "no tokens in training corpus");

  std::vector<std::pair<std::string_view, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.set_max_size(max_size);
  std::size_t taken = 0;
  for (const auto& [tok, freq] : ranked) {
    if (taken == max_size) break;
    // corpus tokens that collide with the reserved markers keep the reserved id
    if (tok == Vocabulary::pad_token || tok == Vocabulary::unk_token) continue;
    vocab.add(std::string(tok), freq);
    ++taken;
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Datasets

std::size_t IndexedDataset::labeled_count() const noexcept {
  return static_cast<std::size_t>(std::count(labeled_mask.begin(), labeled_mask.end(), 1));
}

std::vector<std::size_t> IndexedDataset::labeled_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labeled_mask.size(); ++i)
    if (labeled_mask[i]) idx.push_back(i);
  return idx;
}

IndexedDataset IndexedDataset::subset(std::span<const std::size_t> indices) const {
  IndexedDataset out;
  out.num_classes = num_classes;
  out.split = split;
  out.sequences.resize(static_cast<Eigen::Index>(indices.size()), sequences.cols());
  out.gold_labels.reserve(indices.size());
  out.labeled_mask.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.sequences.row(static_cast<Eigen::Index>(r)) = sequences.row(static_cast<Eigen::Index>(indices[r]));
    out.gold_labels.push_back(gold_labels[indices[r]]);
    out.labeled_mask.push_back(labeled_mask[indices[r]]);
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorKind::InvalidConfig, "train_fraction must lie in (0, 1)");
  if (!(label_fraction > 0.0 && label_fraction <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "label_fraction must lie in (0, 1]");
}

DocumentSplit split_documents(std::span<const RawDocument> docs, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, "split"));
  shuffle(order, rng);

  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(docs.size())));
  if (n_train == 0 || n_train == docs.size())
    throw Error(ErrorKind::EmptySplit, "split of " + std::to_string(docs.size()) + " documents leaves an empty side");

  DocumentSplit out;
  out.train.reserve(n_train);
  out.validation.reserve(docs.size() - n_train);
  for (std::size_t r = 0; r < order.size(); ++r)
    (r < n_train ? out.train : out.validation).push_back(docs[order[r]]);
  return out;
}

IndexedDataset index_documents(std::span<const RawDocument> docs, const Vocabulary& vocab,
                               std::size_t max_len, int num_classes, SplitTag tag) {
  if (max_len < 1) throw Error(ErrorKind::InvalidConfig, "max_len must be >= 1");
  IndexedDataset ds;
  ds.num_classes = num_classes;
  ds.split = tag;
  ds.sequences = TokenMatrix::Constant(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(max_len),
                                       Vocabulary::pad_id);
  ds.gold_labels.reserve(docs.size());
  ds.labeled_mask.assign(docs.size(), 1);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& label = docs[i].gold_label;
    if (!label) throw Error(ErrorKind::LabelOutOfRange, "document " + std::to_string(i) + " has no label");
    if (*label < 0 || *label >= num_classes)
      throw Error(ErrorKind::LabelOutOfRange,
                  "label " + std::to_string(*label) + " outside [0, " + std::to_string(num_classes) + ")");
    ds.gold_labels.push_back(*label);
    const auto tokens = tokenize(clean_text(docs[i].text));
    const std::size_t len = std::min(tokens.size(), max_len);
    for (std::size_t t = 0; t < len; ++t)
      ds.sequences(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = vocab.id_of(tokens[t]);
  }
  return ds;
}

std::vector<std::uint8_t> stratified_mask(std::span<const int> labels, int num_classes, double fraction,
                                          std::uint64_t seed) {
  const auto n = labels.size();
  const auto total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  // largest-remainder apportionment of `total` across classes
  std::vector<std::size_t> quota(members.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    const double exact = fraction * static_cast<double>(members[c].size());
    quota[c] = std::min(members[c].size(), static_cast<std::size_t>(std::floor(exact)));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [rem, c] : remainders) {
    if (assigned >= total) break;
    if (quota[c] < members[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::vector<std::uint8_t> mask(n, 0);
  Rng rng(derive_seed(seed, "labeled"));
  for (std::size_t c = 0; c < members.size(); ++c) {
    shuffle(members[c], rng);
    for (std::size_t r = 0; r < quota[c]; ++r) mask[members[c][r]] = 1;
  }
  return mask;
}

IndexedSplits index_dataset(std::span<const RawDocument> docs, const Vocabulary& vocab, std::size_t max_len,
                            const SplitSpec& spec, int num_classes) {
  const auto halves = split_documents(docs, spec);
  IndexedSplits out{index_documents(halves.train, vocab, max_len, num_classes, SplitTag::Train),
                    index_documents(halves.validation, vocab, max_len, num_classes, SplitTag::Validation)};
  out.train.labeled_mask = stratified_mask(out.train.gold_labels, num_classes, spec.label_fraction, spec.seed);
  return out;
}

LoadedCorpus load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileUnreadable, "cannot open " + path.string());
  auto rows = csv::parse(in);
  if (rows.empty()) throw Error(ErrorKind::EmptyFile, path.string() + " is empty");

  auto& header = rows.front();
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  if (header.size() < 2 || header[0] != "label" || header[1] != "text")
    throw Error(ErrorKind::FileUnreadable, path.string() + ": expected header 'label,text'");

  LoadedCorpus out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 2 || clean_text(row[1]).empty()) {
      ++out.rejected_rows;
      continue;
    }
    RawDocument doc{row[1], std::nullopt};
    if (!row[0].empty()) {
      int label = 0;
      const auto* first = row[0].data();
      const auto* last = first + row[0].size();
      auto [ptr, ec] = std::from_chars(first, last, label);
      if (ec != std::errc() || ptr != last)
        throw Error(ErrorKind::LabelOutOfRange, path.string() + ": row " + std::to_string(r) + " has label '" +
                                                    row[0] + "'");
      doc.gold_label = label;
    }
    out.documents.push_back(std::move(doc));
  }
  if (out.documents.empty()) throw Error(ErrorKind::EmptyFile, path.string() + " has no usable rows");
  return out;
}

}  // namespace lpssl
