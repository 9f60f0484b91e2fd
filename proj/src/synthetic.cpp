#include "lpssl/synthetic.hpp"

#include "lpssl/csv.hpp"
#include "lpssl/error.hpp"
#include "lpssl/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace lpssl {

namespace {

std::string word_name(std::size_t id) {
  // pronounceable and distinct: consonant-vowel syllables from the id digits
  static const char* kSyllables[] = {"ba", "ke", "lo", "mi", "nu", "ra", "se", "ti", "vo", "zu"};
  std::string w;
  std::size_t v = id;
  do {
    w += kSyllables[v % 10];
    v /= 10;
  } while (v > 0);
  return w + (id % 2 ? "n" : "r");
}

// Zipf-like sampler over n items via a cumulative table.
class ZipfSampler {
 public:
  explicit ZipfSampler(std::size_t n) : cdf_(n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += 1.0 / std::pow(static_cast<double>(i + 1), 0.9);
      cdf_[i] = total;
    }
    for (auto& c : cdf_) c /= total;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

std::vector<RawDocument> make_synthetic_corpus(const SyntheticTextSpec& spec) {
  if (spec.num_classes < 2 || spec.topics_per_class < 1 || spec.words_per_topic < 1 || spec.shared_words < 1 ||
      spec.min_length < 1 || spec.max_length < spec.min_length)
    throw Error(ErrorKind::InvalidConfig, "invalid synthetic corpus spec");

  Rng rng(derive_seed(spec.seed, "synthetic"));
  const std::size_t topics = static_cast<std::size_t>(spec.num_classes * spec.topics_per_class);
  std::vector<std::size_t> ids(spec.shared_words + topics * spec.words_per_topic);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  shuffle(ids, rng);

  auto word = [&](std::size_t slot) { return word_name(ids[slot]); };
  auto topic_word = [&](std::size_t topic, std::size_t r) {
    return word(spec.shared_words + topic * spec.words_per_topic + r);
  };

  std::vector<int> labels(spec.documents);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
  shuffle(labels, rng);

  const ZipfSampler shared(spec.shared_words);
  const ZipfSampler in_topic(spec.words_per_topic);
  std::vector<RawDocument> docs;
  docs.reserve(spec.documents);
  for (int label : labels) {
    const auto topic = static_cast<std::size_t>(label * spec.topics_per_class) +
                       uniform_index(rng, static_cast<std::uint64_t>(spec.topics_per_class));
    const auto len = spec.min_length + uniform_index(rng, spec.max_length - spec.min_length + 1);
    std::string text;
    for (std::size_t t = 0; t < len; ++t) {
      const double u = uniform01(rng);
      std::string w;
      if (u < spec.topic_rate) {
        w = topic_word(topic, in_topic(rng));
      } else if (u < spec.topic_rate + spec.leak_rate) {
        auto other = uniform_index(rng, static_cast<std::uint64_t>(spec.num_classes - 1));
        if (static_cast<int>(other) >= label) ++other;
        const auto other_topic = other * static_cast<std::uint64_t>(spec.topics_per_class) +
                                 uniform_index(rng, static_cast<std::uint64_t>(spec.topics_per_class));
        w = topic_word(other_topic, in_topic(rng));
      } else {
        w = word(shared(rng));
      }
      if (!text.empty()) text.push_back(' ');
      text += w;
      if (uniform01(rng) < 0.06) text += uniform01(rng) < 0.5 ? "," : ".";
    }
    if (!text.empty() && text.back() != '.') text += '.';
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    docs.push_back({std::move(text), label});
  }
  return docs;
}

void write_csv_dataset(const std::filesystem::path& path, const std::vector<RawDocument>& docs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::FileUnreadable, "cannot write " + path.string());
  out << "label,text\n";
  for (const auto& d : docs) {
    if (d.gold_label) out << *d.gold_label;
    out << ',' << csv::escape(d.text) << '\n';
  }
}

}  // namespace lpssl
