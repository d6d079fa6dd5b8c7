#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "intentsynth/corpus.hpp"
#include "intentsynth/errors.hpp"
#include "intentsynth/text.hpp"

using namespace intentsynth;

namespace {

Utterance utt(std::string text, IntentLabel label) {
  Utterance u;
  u.text = std::move(text);
  u.label = label;
  u.source = "test";
  return u;
}

Dataset balanced(std::size_t per_label, const std::string &name = "d") {
  Dataset d;
  d.name = name;
  for (auto l : kAllLabels) {
    for (std::size_t i = 0; i < per_label; ++i)
      d.items.push_back(utt(std::string(label_name(l)) + " " + std::to_string(i), l));
  }
  return d;
}

} // namespace

TEST_CASE("labels round-trip through their names") {
  for (auto l : kAllLabels)
    CHECK(parse_label(label_name(l)) == l);
  CHECK(label_name(IntentLabel::roll_down) == "roll_down");
  CHECK_THROWS_AS(parse_label("lights_on"), DataError);
  CHECK_FALSE(try_parse_label("Help").has_value());
}

TEST_CASE("load_dataset") {
  testing::TempDir tmp;

  SUBCASE("empty file gives an empty dataset") {
    std::ofstream(tmp / "empty.jsonl").close();
    const auto d = load_dataset(tmp / "empty.jsonl");
    CHECK(d.empty());
    CHECK(d.name == "empty");
  }

  SUBCASE("a single line becomes one utterance") {
    std::ofstream(tmp / "one.jsonl") << R"({"text":"Hilfe","label":"help","source":"leolm","prompt_id":"help/full","seed":42,"status":"raw"})"
                                     << "\n";
    const auto d = load_dataset(tmp / "one.jsonl");
    REQUIRE(d.size() == 1);
    CHECK(d.items[0].text == "Hilfe");
    CHECK(d.items[0].label == IntentLabel::help);
    CHECK(d.items[0].source == "leolm");
    CHECK(d.items[0].seed == 42u);
  }

  SUBCASE("an unknown label is reported with its line number") {
    std::ofstream(tmp / "bad.jsonl") << R"({"text":"a","label":"help"})" << "\n"
                                     << R"({"text":"b","label":"lights_on"})" << "\n";
    try {
      (void)load_dataset(tmp / "bad.jsonl");
      FAIL("expected a DataError");
    } catch (const DataError &e) {
      CHECK(std::string(e.what()).find("unknown label") != std::string::npos);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SUBCASE("malformed JSON names the line") {
    std::ofstream(tmp / "broken.jsonl") << R"({"text":"a","label":"help"})" << "\n{not json\n";
    CHECK_THROWS_WITH_AS((void)load_dataset(tmp / "broken.jsonl"), doctest::Contains("line 2"), DataError);
  }

  SUBCASE("a missing file is a data error") {
    CHECK_THROWS_AS((void)load_dataset(tmp / "nope.jsonl"), DataError);
  }
}

TEST_CASE("save and load round-trip") {
  testing::TempDir tmp;
  Dataset d;
  d.name = "rt";
  d.items.push_back(utt("Mach das Licht an", IntentLabel::light_on));
  d.items.push_back(utt("Ich bin gestürzt", IntentLabel::help));
  auto relabeled = utt("Rollo runter", IntentLabel::roll_down);
  relabeled.status = UtteranceStatus::relabeled;
  relabeled.original_label = IntentLabel::roll_up;
  relabeled.seed = 123456789;
  relabeled.prompt_id = "roll_down/std";
  d.items.push_back(relabeled);

  save_dataset(d, tmp / "rt.jsonl");
  CHECK(load_dataset(tmp / "rt.jsonl") == d);
  CHECK(parse_dataset(serialize_dataset(d), "rt") == d);
}

TEST_CASE("dedup") {
  Dataset d;
  SUBCASE("exact duplicate") {
    d.items = {utt("Hilfe", IntentLabel::help), utt("Hilfe", IntentLabel::help)};
    CHECK(dedup(d).size() == 1);
  }
  SUBCASE("case and trailing whitespace are ignored") {
    d.items = {utt("Hilfe", IntentLabel::help), utt("hilfe ", IntentLabel::help)};
    const auto out = dedup(d);
    REQUIRE(out.size() == 1);
    CHECK(out.items[0].text == "Hilfe");
  }
  SUBCASE("different labels are kept") {
    d.items = {utt("Hilfe", IntentLabel::help), utt("Hilfe", IntentLabel::no_command)};
    CHECK(dedup(d).size() == 2);
  }
  SUBCASE("the key folds umlauts and collapses interior whitespace") {
    CHECK(dedup_key("  ÄRZTIN   rufen ") == "ärztin rufen");
  }
}

TEST_CASE("stratified_split") {
  SUBCASE("100 per label gives exactly 70/20/10 per label") {
    const auto b = stratified_split(balanced(100), {0.7, 0.2, 0.1}, 1);
    for (auto l : kAllLabels) {
      CHECK(b.train.label_counts()[label_index(l)] == 70);
      CHECK(b.val.label_counts()[label_index(l)] == 20);
      CHECK(b.test.label_counts()[label_index(l)] == 10);
    }
  }

  SUBCASE("ratios (1,0,0) keep everything in train") {
    const auto d = balanced(5);
    const auto b = stratified_split(d, {1.0, 0.0, 0.0}, 3);
    CHECK(b.train.size() == d.size());
    CHECK(b.val.empty());
    CHECK(b.test.empty());
  }

  SUBCASE("same seed, same membership; different seed, different order") {
    const auto d = balanced(40);
    const auto a = stratified_split(d, {0.7, 0.2, 0.1}, 9);
    const auto b = stratified_split(d, {0.7, 0.2, 0.1}, 9);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.val_indices == b.val_indices);
    CHECK(a.test_indices == b.test_indices);
    const auto c = stratified_split(d, {0.7, 0.2, 0.1}, 10);
    CHECK(a.train_indices != c.train_indices);
  }

  SUBCASE("a label with too few items is named") {
    auto d = balanced(10);
    d.items.push_back(utt("nur einmal", IntentLabel::help));
    d.items.erase(d.items.begin(), d.items.begin() + 10); // one help item left
    CHECK_THROWS_WITH_AS((void)stratified_split(d, {0.7, 0.2, 0.1}, 0), doctest::Contains("help"), DataError);
  }

  SUBCASE("ratios must be non-negative and sum to one") {
    CHECK_THROWS_AS((void)stratified_split(balanced(10), {0.5, 0.2, 0.1}, 0), UsageError);
    CHECK_THROWS_AS((void)stratified_split(balanced(10), {1.2, -0.1, -0.1}, 0), UsageError);
  }
}

TEST_CASE("merge") {
  Dataset a;
  a.name = "a";
  a.items = {utt("Licht an", IntentLabel::light_on), utt("licht an", IntentLabel::light_on),
             utt("Hilfe", IntentLabel::help)};
  Dataset b;
  b.name = "b";
  b.items = {utt("Hilfe", IntentLabel::help)};

  const std::vector<Dataset> one = {a};
  auto m1 = merge(one, "m");
  auto expected = dedup(a);
  expected.name = "m";
  CHECK(m1 == expected);

  const std::vector<Dataset> two = {a, b};
  CHECK(merge(two, "m") == expected);
}

TEST_CASE("balanced quotas round up") {
  const auto q = balanced_quotas(2500);
  for (auto n : q)
    CHECK(n == 417);
  CHECK(balanced_quotas(6)[0] == 1);
}

TEST_CASE("text helpers") {
  CHECK(text::casefold("ÄÖÜ Straße") == "äöü straße");
  CHECK(text::collapse_whitespace("  a \t b\n") == "a b");
  CHECK(text::decode_utf8("\xff") == std::u32string(1, U'�'));
  CHECK(text::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
