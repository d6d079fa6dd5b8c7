#include "intentsynth/metrics.hpp"

#include <cmath>
#include <numeric>

#include "intentsynth/errors.hpp"
#include "intentsynth/text.hpp"

namespace intentsynth {

double accuracy(std::span<const IntentLabel> predictions, std::span<const IntentLabel> golds) {
  if (predictions.size() != golds.size())
    throw UsageError("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(golds.size()) + " gold labels");
  if (golds.empty())
    throw UsageError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < golds.size(); ++i)
    hits += predictions[i] == golds[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

std::size_t ConfusionMatrix::total() const {
  std::size_t sum = 0;
  for (const auto &row : counts)
    sum = std::accumulate(row.begin(), row.end(), sum);
  return sum;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t sum = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i)
    sum += counts[i][i];
  return sum;
}

std::size_t ConfusionMatrix::row_sum(IntentLabel gold) const {
  const auto &row = counts[label_index(gold)];
  return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

ConfusionMatrix &ConfusionMatrix::operator+=(const ConfusionMatrix &other) {
  for (std::size_t g = 0; g < kNumLabels; ++g)
    for (std::size_t p = 0; p < kNumLabels; ++p)
      counts[g][p] += other.counts[g][p];
  return *this;
}

ConfusionMatrix confusion(std::span<const IntentLabel> predictions, std::span<const IntentLabel> golds) {
  if (predictions.size() != golds.size())
    throw UsageError("confusion: length mismatch");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < golds.size(); ++i)
    m.add(golds[i], predictions[i]);
  return m;
}

TextNorm TextNorm::standard() { return TextNorm{"casefold-strip-punct-v1", true, true}; }

TextNorm TextNorm::identity() { return TextNorm{"whitespace-only-v1", false, false}; }

TextNorm TextNorm::by_name(std::string_view name) {
  for (auto norm : {standard(), identity()}) {
    if (norm.name == name)
      return norm;
  }
  throw ConfigError("unknown text normalization '" + std::string(name) + "'");
}

namespace {
bool is_stripped_punct(char32_t c) {
  switch (c) {
  case U'.':
  case U',':
  case U'!':
  case U'?':
  case U';':
  case U':':
  case U'"':
  case U'«':
  case U'»':
    return true;
  default:
    return false;
  }
}
} // namespace

std::string TextNorm::apply(std::string_view input) const {
  auto cps = text::decode_utf8(input);
  std::u32string kept;
  kept.reserve(cps.size());
  for (char32_t c : cps) {
    if (strip_punctuation && is_stripped_punct(c))
      continue;
    kept.push_back(casefold ? text::fold_char(c) : c);
  }
  return text::collapse_whitespace(text::encode_utf8(kept));
}

std::vector<std::string> word_units(std::string_view normalized) {
  return text::split_whitespace(normalized);
}

std::u32string char_units(std::string_view normalized) { return text::decode_utf8(normalized); }

namespace {
ErrorRate make_rate(const EditCounts &ops, std::size_t ref_len, std::string unit, const TextNorm &norm) {
  ErrorRate r;
  r.substitutions = ops.substitutions;
  r.deletions = ops.deletions;
  r.insertions = ops.insertions;
  r.ref_len = ref_len;
  r.rate = static_cast<double>(ops.distance()) / static_cast<double>(ref_len);
  r.unit = std::move(unit);
  r.norm = norm.name;
  return r;
}
} // namespace

ErrorRate word_error_rate(std::string_view reference, std::string_view hypothesis, const TextNorm &norm) {
  const auto ref = word_units(norm.apply(reference));
  const auto hyp = word_units(norm.apply(hypothesis));
  if (ref.empty())
    throw DataError("reference is empty after normalization");
  return make_rate(align_counts<std::string>(ref, hyp), ref.size(), "word", norm);
}

ErrorRate char_error_rate(std::string_view reference, std::string_view hypothesis, const TextNorm &norm) {
  const auto ref = char_units(norm.apply(reference));
  const auto hyp = char_units(norm.apply(hypothesis));
  if (ref.empty())
    throw DataError("reference is empty after normalization");
  return make_rate(align_counts<char32_t>(std::span<const char32_t>(ref.data(), ref.size()),
                                          std::span<const char32_t>(hyp.data(), hyp.size())),
                   ref.size(), "char", norm);
}

void CorpusErrorRate::add(const ErrorRate &u) {
  if (u.unit != total_.unit || u.norm != total_.norm)
    throw UsageError("cannot pool error rates with different units or normalization");
  total_.substitutions += u.substitutions;
  total_.insertions += u.insertions;
  total_.deletions += u.deletions;
  total_.ref_len += u.ref_len;
}

ErrorRate CorpusErrorRate::result() const {
  ErrorRate r = total_;
  r.rate = r.ref_len == 0 ? 0.0 : static_cast<double>(r.errors()) / static_cast<double>(r.ref_len);
  return r;
}

std::string_view mode_name(AggregationMode mode) {
  return mode == AggregationMode::per_epoch_checkpoints ? "per_epoch_checkpoints" : "per_run_finals";
}

AggregationMode parse_mode(std::string_view name) {
  if (name == "per_epoch_checkpoints")
    return AggregationMode::per_epoch_checkpoints;
  if (name == "per_run_finals")
    return AggregationMode::per_run_finals;
  throw ConfigError("unknown aggregation mode '" + std::string(name) + "'");
}

AggregateScore aggregate(std::span<const double> values, AggregationMode mode) {
  if (values.empty())
    throw UsageError("aggregate: empty input");
  AggregateScore score;
  score.n = values.size();
  score.mode = mode;
  // Sorting makes the floating-point sum independent of input order.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  score.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  if (sorted.size() > 1) {
    double ss = 0.0;
    for (double v : sorted)
      ss += (v - score.mean) * (v - score.mean);
    score.std = std::sqrt(ss / (n - 1.0));
  }
  return score;
}

} // namespace intentsynth
