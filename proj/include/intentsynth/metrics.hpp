#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intentsynth/labels.hpp"

namespace intentsynth {

double accuracy(std::span<const IntentLabel> predictions, std::span<const IntentLabel> golds);

// Rows are gold labels, columns predictions, both in canonical order.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> counts{};

  void add(IntentLabel gold, IntentLabel predicted) {
    ++counts[label_index(gold)][label_index(predicted)];
  }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(IntentLabel gold) const;
  ConfusionMatrix &operator+=(const ConfusionMatrix &other);
  bool operator==(const ConfusionMatrix &) const = default;
};

ConfusionMatrix confusion(std::span<const IntentLabel> predictions, std::span<const IntentLabel> golds);

// Text normalization applied before WER/CER. The name travels with every
// ErrorRate so numbers computed under different policies are never mixed.
struct TextNorm {
  std::string name;
  bool casefold = true;
  bool strip_punctuation = true;

  // Case-fold, strip . , ! ? ; : " « », collapse whitespace.
  static TextNorm standard();
  // Whitespace collapse only.
  static TextNorm identity();
  static TextNorm by_name(std::string_view name);

  std::string apply(std::string_view text) const;
};

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  std::size_t distance() const { return substitutions + deletions + insertions; }
  bool operator==(const EditCounts &) const = default;
};

// Unit-cost Levenshtein alignment in O(min(|ref|, |hyp|)) memory. Each cell
// keeps the operation counts of its preferred predecessor (diagonal, then
// deletion, then insertion), which reproduces a backtrace with that tie order.
template <typename T>
EditCounts align_counts(std::span<const T> ref, std::span<const T> hyp) {
  struct Cell {
    std::size_t cost = 0;
    EditCounts ops;
  };
  auto pick = [](const Cell &diag, bool mismatch, const Cell &del_from, const Cell &ins_from) {
    Cell best = diag;
    best.cost += mismatch ? 1 : 0;
    if (mismatch)
      ++best.ops.substitutions;
    if (del_from.cost + 1 < best.cost) {
      best = del_from;
      ++best.cost;
      ++best.ops.deletions;
    }
    if (ins_from.cost + 1 < best.cost) {
      best = ins_from;
      ++best.cost;
      ++best.ops.insertions;
    }
    return best;
  };

  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  if (m <= n) {
    // One row over hyp positions; row i holds cells (i, 0..m).
    std::vector<Cell> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
      prev[j].cost = j;
      prev[j].ops.insertions = j;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      cur[0].cost = i;
      cur[0].ops = EditCounts{0, i, 0};
      for (std::size_t j = 1; j <= m; ++j)
        cur[j] = pick(prev[j - 1], !(ref[i - 1] == hyp[j - 1]), prev[j], cur[j - 1]);
      std::swap(prev, cur);
    }
    return prev[m].ops;
  }
  // One column over ref positions; column j holds cells (0..n, j).
  std::vector<Cell> prev(n + 1), cur(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    prev[i].cost = i;
    prev[i].ops.deletions = i;
  }
  for (std::size_t j = 1; j <= m; ++j) {
    cur[0].cost = j;
    cur[0].ops = EditCounts{0, 0, j};
    for (std::size_t i = 1; i <= n; ++i)
      cur[i] = pick(prev[i - 1], !(ref[i - 1] == hyp[j - 1]), cur[i - 1], prev[i]);
    std::swap(prev, cur);
  }
  return prev[n].ops;
}

struct ErrorRate {
  double rate = 0.0; // may exceed 1
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_len = 0;
  std::string unit; // "word" or "char"
  std::string norm;

  std::size_t errors() const { return substitutions + insertions + deletions; }
};

std::vector<std::string> word_units(std::string_view normalized);
std::u32string char_units(std::string_view normalized);

// Throw DataError when the reference is empty after normalization.
ErrorRate word_error_rate(std::string_view reference, std::string_view hypothesis,
                          const TextNorm &norm = TextNorm::standard());
ErrorRate char_error_rate(std::string_view reference, std::string_view hypothesis,
                          const TextNorm &norm = TextNorm::standard());

// Total edit operations over total reference length.
class CorpusErrorRate {
public:
  explicit CorpusErrorRate(std::string unit, std::string norm)
      : total_{0.0, 0, 0, 0, 0, std::move(unit), std::move(norm)} {}

  void add(const ErrorRate &utterance);
  ErrorRate result() const;

private:
  ErrorRate total_;
};

enum class AggregationMode { per_epoch_checkpoints, per_run_finals };

std::string_view mode_name(AggregationMode mode);
AggregationMode parse_mode(std::string_view name);

struct AggregateScore {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  AggregationMode mode = AggregationMode::per_run_finals;

  bool operator==(const AggregateScore &) const = default;
};

// Arithmetic mean and Bessel-corrected sample standard deviation (0 for n = 1).
AggregateScore aggregate(std::span<const double> values, AggregationMode mode);

} // namespace intentsynth
