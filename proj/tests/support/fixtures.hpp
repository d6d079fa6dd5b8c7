#pragma once

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "intentsynth/corpus.hpp"
#include "intentsynth/embed.hpp"
#include "intentsynth/rng.hpp"

namespace intentsynth::testing {

// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "intentsynth-XXXXXX").string();
    if (!mkdtemp(tmpl.data()))
      throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

// Pronounceable pseudo-words that land in pairwise distinct hashed_bow
// buckets (also distinct from `taken`, which is updated).
inline std::vector<std::string> distinct_bucket_words(std::size_t count, std::size_t dim, SplitMix64 &rng,
                                                      std::set<std::size_t> &taken) {
  static const char *consonants = "bdfgklmnprstvwz";
  static const char *vowels = "aeiou";
  std::vector<std::string> out;
  std::set<std::string> seen;
  while (out.size() < count) {
    std::string w;
    const auto syllables = 2 + rng.below(2);
    for (std::uint64_t s = 0; s < syllables; ++s) {
      w.push_back(consonants[rng.below(15)]);
      w.push_back(vowels[rng.below(5)]);
    }
    if (!seen.insert(w).second)
      continue;
    const auto bucket = bow_bucket(w, dim);
    if (!taken.insert(bucket).second)
      continue;
    out.push_back(w);
  }
  return out;
}

// One keyword pool per class, no hash collisions across classes.
inline std::vector<std::vector<std::string>> class_vocabularies(std::size_t per_class, std::size_t dim,
                                                                std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::set<std::size_t> taken;
  std::vector<std::vector<std::string>> vocab;
  for (std::size_t c = 0; c < kNumLabels; ++c)
    vocab.push_back(distinct_bucket_words(per_class, dim, rng, taken));
  return vocab;
}

// Each item is `words` distinct keywords drawn from its class pool, in random
// order. Texts are unique within the dataset.
inline Dataset keyword_corpus(const std::vector<std::vector<std::string>> &vocab, std::size_t per_class,
                              std::size_t words, std::uint64_t seed, std::string name = "keywords") {
  SplitMix64 rng(seed);
  Dataset d;
  d.name = std::move(name);
  std::set<std::string> texts;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    std::size_t made = 0;
    while (made < per_class) {
      auto pool = vocab[c];
      shuffle_in_place(std::span<std::string>(pool), rng);
      std::string text;
      for (std::size_t i = 0; i < words && i < pool.size(); ++i)
        text += (i ? " " : "") + pool[i];
      if (!texts.insert(text).second)
        continue;
      Utterance u;
      u.text = text;
      u.label = kAllLabels[c];
      u.source = "fixture";
      u.prompt_id = "fixture/" + std::to_string(c);
      d.items.push_back(std::move(u));
      ++made;
    }
  }
  return d;
}

// Corpora that share a small per-class vocabulary and otherwise use their
// own words. Each item mixes `shared_words` shared keywords with
// `own_words` corpus-specific ones.
struct OverlapSpec {
  std::size_t corpora = 3;
  std::size_t shared_per_class = 6;
  std::size_t own_per_class = 14;
  std::size_t shared_words = 3;
  std::size_t own_words = 10;
  std::size_t per_class = 80;
  std::size_t dim = 1024;
};

inline std::vector<Dataset> overlap_corpora(const OverlapSpec &spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::set<std::size_t> taken;
  std::vector<std::vector<std::string>> shared;
  for (std::size_t c = 0; c < kNumLabels; ++c)
    shared.push_back(distinct_bucket_words(spec.shared_per_class, spec.dim, rng, taken));
  std::vector<Dataset> out;
  for (std::size_t k = 0; k < spec.corpora; ++k) {
    Dataset d;
    d.name = std::string("llm") + static_cast<char>('A' + k);
    std::set<std::string> texts;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      const auto own = distinct_bucket_words(spec.own_per_class, spec.dim, rng, taken);
      std::size_t made = 0;
      while (made < spec.per_class) {
        auto s = shared[c];
        auto o = own;
        shuffle_in_place(std::span<std::string>(s), rng);
        shuffle_in_place(std::span<std::string>(o), rng);
        std::vector<std::string> words(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(spec.shared_words));
        words.insert(words.end(), o.begin(), o.begin() + static_cast<std::ptrdiff_t>(spec.own_words));
        shuffle_in_place(std::span<std::string>(words), rng);
        std::string text;
        for (const auto &w : words)
          text += (text.empty() ? "" : " ") + w;
        if (!texts.insert(text).second)
          continue;
        Utterance u;
        u.text = text;
        u.label = kAllLabels[c];
        u.source = d.name;
        d.items.push_back(std::move(u));
        ++made;
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

// Two Gaussian blobs per class at opposite corners of the square: label
// help at (+,+) and (-,-), light_on at (+,-) and (-,+).
inline void xor_features(std::size_t per_cluster, double stddev, std::uint64_t seed,
                         std::vector<EmbeddingVector> &features, std::vector<IntentLabel> &labels) {
  SplitMix64 rng(seed);
  const double corners[4][2] = {{1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      EmbeddingVector v;
      v.provider_id = "xor";
      v.values = {corners[k][0] + stddev * rng.normal(), corners[k][1] + stddev * rng.normal()};
      features.push_back(std::move(v));
      labels.push_back(k < 2 ? IntentLabel::help : IntentLabel::light_on);
    }
  }
}

} // namespace intentsynth::testing
