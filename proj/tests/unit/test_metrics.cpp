#include <doctest.h>

#include <cmath>

#include "intentsynth/errors.hpp"
#include "intentsynth/metrics.hpp"

using namespace intentsynth;
using L = IntentLabel;

TEST_CASE("accuracy") {
  const std::vector<L> a = {L::help, L::light_on, L::roll_up, L::no_command};
  CHECK(accuracy(a, a) == 1.0);
  const std::vector<L> disjoint = {L::light_off, L::light_off, L::light_off, L::light_off};
  CHECK(accuracy(disjoint, a) == 0.0);
  const std::vector<L> three = {L::help, L::light_on, L::roll_up, L::help};
  CHECK(accuracy(three, a) == 0.75);
  CHECK_THROWS_AS((void)accuracy(std::vector<L>{}, std::vector<L>{}), UsageError);
  CHECK_THROWS_AS((void)accuracy(a, std::span<const L>(three).subspan(0, 2)), UsageError);
}

TEST_CASE("confusion") {
  const std::vector<L> g = {L::help, L::light_on, L::roll_down};
  const auto diag = confusion(g, g);
  for (std::size_t i = 0; i < kNumLabels; ++i)
    for (std::size_t j = 0; j < kNumLabels; ++j)
      if (i != j)
        CHECK(diag.counts[i][j] == 0);
  CHECK(diag.trace() == 3);

  const std::vector<L> gold = {L::help};
  const std::vector<L> pred = {L::no_command};
  const auto one = confusion(pred, gold);
  CHECK(one.counts[0][5] == 1);
  CHECK(one.total() == 1);
  CHECK(one.trace() == 0);
  CHECK(one.row_sum(L::help) == 1);

  auto sum = diag;
  sum += one;
  CHECK(sum.total() == 4);
}

TEST_CASE("word error rate") {
  SUBCASE("identical") { CHECK(word_error_rate("mach das licht an", "mach das licht an").rate == 0.0); }

  SUBCASE("one deletion") {
    const auto r = word_error_rate("mach das licht an", "mach licht an");
    CHECK(r.deletions == 1);
    CHECK(r.substitutions == 0);
    CHECK(r.insertions == 0);
    CHECK(r.ref_len == 4);
    CHECK(r.rate == 0.25);
  }

  SUBCASE("one substitution") {
    const auto r = word_error_rate("licht an", "licht aus");
    CHECK(r.substitutions == 1);
    CHECK(r.rate == 0.5);
  }

  SUBCASE("normalization removes case and punctuation") {
    CHECK(word_error_rate("Mach das Licht an!", "mach, das licht an").rate == 0.0);
    CHECK(word_error_rate("Mach das Licht an!", "mach, das licht an", TextNorm::identity()).rate == 0.75);
    CHECK(word_error_rate("a", "a").norm == "casefold-strip-punct-v1");
    CHECK(TextNorm::standard().apply("  «Hallo»,  Welt? ") == "hallo welt");
  }

  SUBCASE("rates above one are allowed") {
    CHECK(word_error_rate("an", "das licht ist an").rate == 3.0);
  }

  SUBCASE("empty reference") {
    CHECK_THROWS_AS((void)word_error_rate(" ... ", "hallo"), DataError);
  }
}

TEST_CASE("character error rate") {
  CHECK(char_error_rate("licht", "licht").rate == 0.0);
  const auto r = char_error_rate("an", "aus");
  CHECK(r.substitutions == 1);
  CHECK(r.insertions == 1);
  CHECK(r.ref_len == 2);
  CHECK(r.rate == 1.0);
  // umlauts count as one character
  CHECK(char_error_rate("tür", "tur").rate == doctest::Approx(1.0 / 3.0));
  CHECK(char_units("tür").size() == 3);
}

TEST_CASE("alignment handles either operand being shorter") {
  const std::vector<int> a = {1, 2, 3, 4, 5};
  const std::vector<int> b = {2, 3, 9};
  const auto ab = align_counts<int>(a, b);
  const auto ba = align_counts<int>(b, a);
  CHECK(ab.distance() == 3);
  CHECK(ba.distance() == 3);
  CHECK(ab.deletions == ba.insertions);
  CHECK(ab.insertions == ba.deletions);
}

TEST_CASE("corpus error rate pools operations") {
  CorpusErrorRate wer("word", "casefold-strip-punct-v1");
  wer.add(word_error_rate("mach das licht an", "mach licht an")); // 1 of 4
  wer.add(word_error_rate("hilfe", "hilfe"));                    // 0 of 1
  const auto r = wer.result();
  CHECK(r.rate == doctest::Approx(1.0 / 5.0));
  CHECK(r.ref_len == 5);
  CHECK_THROWS_AS(wer.add(word_error_rate("a", "b", TextNorm::identity())), UsageError);
}

TEST_CASE("aggregate") {
  const std::vector<double> one = {0.8};
  CHECK(aggregate(one, AggregationMode::per_run_finals).mean == 0.8);
  CHECK(aggregate(one, AggregationMode::per_run_finals).std == 0.0);
  const std::vector<double> flat = {0.9, 0.9, 0.9};
  CHECK(aggregate(flat, AggregationMode::per_run_finals).mean == doctest::Approx(0.9));
  CHECK(aggregate(flat, AggregationMode::per_run_finals).std == doctest::Approx(0.0));
  const std::vector<double> two = {0.94, 0.96};
  const auto s = aggregate(two, AggregationMode::per_epoch_checkpoints);
  CHECK(s.mean == doctest::Approx(0.95));
  CHECK(s.std == doctest::Approx(0.01 * std::sqrt(2.0)));
  CHECK(s.n == 2);
  CHECK(s.mode == AggregationMode::per_epoch_checkpoints);
  CHECK(parse_mode("per_run_finals") == AggregationMode::per_run_finals);
  CHECK_THROWS_AS(parse_mode("median"), ConfigError);
}
