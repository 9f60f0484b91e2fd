#pragma once

#include "lpssl/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lpssl {

/// Two-or-more-class text corpus built from vocabulary mixtures. Each class
/// owns a few topics with their own word lists; a document picks one topic of
/// its class and mixes topic words, words leaking from another class and
/// shared filler words.
struct SyntheticTextSpec {
  std::size_t documents = 2000;
  int num_classes = 2;
  std::size_t shared_words = 600;
  int topics_per_class = 4;
  std::size_t words_per_topic = 60;
  std::size_t min_length = 20;
  std::size_t max_length = 80;
  double topic_rate = 0.12;
  double leak_rate = 0.05;
  std::uint64_t seed = 20240808;
};

/// Labels are exactly balanced (up to one document per class).
std::vector<RawDocument> make_synthetic_corpus(const SyntheticTextSpec& spec);

/// `label,text` CSV.
void write_csv_dataset(const std::filesystem::path& path, const std::vector<RawDocument>& docs);

}  // namespace lpssl
