#include <doctest.h>

#include <regex>

#include "fixtures.hpp"
#include "intentsynth/errors.hpp"
#include "intentsynth/harness.hpp"
#include "intentsynth/report.hpp"

using namespace intentsynth;

namespace {

// Predicts a fixed label, or throws on texts containing "poison".
class ConstantClassifier final : public Classifier {
public:
  explicit ConstantClassifier(IntentLabel label) : label_(label) {}
  std::vector<IntentLabel> predict(std::span<const Utterance> items) const override {
    for (const auto &u : items) {
      if (u.text.find("poison") != std::string::npos)
        throw DataError("poisoned item");
    }
    return std::vector<IntentLabel>(items.size(), label_);
  }

private:
  IntentLabel label_;
};

// Returns `epochs` constant classifiers; fails for train splits containing "broken".
class StubTrainer final : public Trainer {
public:
  explicit StubTrainer(int epochs = 1) : epochs_(epochs) {}
  std::vector<std::shared_ptr<const Classifier>> train(const SplitBundle &split, std::uint64_t) const override {
    for (const auto &u : split.train.items) {
      if (u.text.find("broken") != std::string::npos)
        throw DataError("cannot train on broken data");
    }
    std::vector<std::shared_ptr<const Classifier>> out;
    for (int e = 0; e < epochs_; ++e)
      out.push_back(std::make_shared<ConstantClassifier>(IntentLabel::help));
    return out;
  }
  std::string describe() const override { return "stub(" + std::to_string(epochs_) + ")"; }

private:
  int epochs_;
};

Dataset small(const std::string &name, std::size_t per_label = 10, const std::string &marker = "") {
  Dataset d;
  d.name = name;
  for (auto l : kAllLabels) {
    for (std::size_t i = 0; i < per_label; ++i) {
      Utterance u;
      u.text = name + " " + std::string(label_name(l)) + " " + std::to_string(i) + marker;
      u.label = l;
      d.items.push_back(u);
    }
  }
  return d;
}

ExperimentPlan stub_plan(int epochs = 1) {
  ExperimentPlan p;
  p.train_sets = {{"a", small("a")}, {"b", small("b")}, {"c", small("c")}};
  p.test_sets = {{"a", small("a")}, {"b", small("b")}, {"c", small("c")}, {"ext", small("ext", 3)}};
  p.runs = 2;
  p.trainer = std::make_shared<StubTrainer>(epochs);
  return p;
}

} // namespace

TEST_CASE("matrix shape") {
  auto plan = stub_plan();
  plan.add_combined = false;
  const auto m = cross_eval(plan);
  CHECK(m.cells.size() == 12);
  CHECK(m.train_names == std::vector<std::string>{"a", "b", "c"});
  CHECK(m.test_names == std::vector<std::string>{"a", "b", "c", "ext"});

  plan.add_combined = true;
  const auto mc = cross_eval(plan);
  CHECK(mc.cells.size() == 20);
  CHECK(mc.train_names.back() == "Combined");
  CHECK(mc.test_names.back() == "Combined");
}

TEST_CASE("test portions") {
  const auto m = cross_eval(stub_plan());
  CHECK(m.cell("a", "a").portion == "held-out test split");
  CHECK(m.cell("a", "a").test_items == 6); // 10 per label, 10 % test
  CHECK(m.cell("a", "b").portion == "full set");
  CHECK(m.cell("a", "b").test_items == 60);
  CHECK(m.cell("a", "ext").test_items == 18);
  CHECK(m.cell("a", "Combined").test_items == 18); // three test splits of six
  CHECK(m.cell("Combined", "Combined").test_items == 18);
  CHECK(m.cell("Combined", "a").test_items <= 18);
  CHECK(m.cell("Combined", "ext").portion == "full set");
  // the constant classifier is right on exactly the help items
  CHECK(m.cell("a", "b").score->mean == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("combined row never scores on its own training items") {
  auto plan = stub_plan();
  const auto m = cross_eval(plan);
  std::size_t restricted = 0;
  for (const auto &name : {"a", "b", "c"})
    restricted += m.cell("Combined", name).test_items;
  CHECK(restricted == m.cell("Combined", "Combined").test_items);
}

TEST_CASE("diagonal can use the full set") {
  auto plan = stub_plan();
  plan.diagonal_uses_test_split = false;
  const auto m = cross_eval(plan);
  CHECK(m.cell("a", "a").test_items == 60);
  CHECK(m.cell("a", "a").portion == "full set");
}

TEST_CASE("aggregation modes") {
  auto plan = stub_plan(5);
  plan.add_combined = false;
  plan.mode = AggregationMode::per_run_finals;
  const auto finals = cross_eval(plan);
  CHECK(finals.cell("a", "b").values.size() == 2);
  CHECK(finals.cell("a", "b").confusion.total() == 2 * 60);
  plan.mode = AggregationMode::per_epoch_checkpoints;
  const auto epochs = cross_eval(plan);
  CHECK(epochs.cell("a", "b").values.size() == 10);
  CHECK(epochs.cell("a", "b").score->n == 10);
  CHECK(epochs.cell("a", "b").confusion.total() == 10 * 60);
  CHECK(epochs.cell("a", "b").score->mode == AggregationMode::per_epoch_checkpoints);
}

TEST_CASE("failures are isolated") {
  auto plan = stub_plan();
  plan.train_sets[1].data = small("b", 10, " broken");
  plan.test_sets[3].data = small("ext", 3, " poison");
  const auto m = cross_eval(plan);
  for (const auto &col : m.test_names) {
    CHECK_FALSE(m.cell("b", col).score.has_value());
    CHECK(m.cell("b", col).error.find("training failed") != std::string::npos);
  }
  CHECK(m.cell("a", "ext").error.find("evaluation failed") != std::string::npos);
  CHECK(m.cell("a", "b").score.has_value());
  CHECK(m.cell("c", "a").score.has_value());
  // the combined row sees the broken items too
  CHECK_FALSE(m.cell("Combined", "a").score.has_value());
}

TEST_CASE("a train set too small to split fails its row only") {
  auto plan = stub_plan();
  plan.train_sets[2].data.items.resize(1);
  const auto m = cross_eval(plan);
  CHECK(m.cell("c", "a").error.find("split failed") != std::string::npos);
  CHECK(m.cell("a", "b").score.has_value());
}

TEST_CASE("plan validation") {
  auto plan = stub_plan();
  plan.runs = 0;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = stub_plan();
  plan.trainer.reset();
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = stub_plan();
  plan.train_sets.push_back({"a", small("a")});
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = stub_plan();
  plan.test_sets.push_back({"Combined", small("x")});
  CHECK_THROWS_AS(plan.validate(), ConfigError);
}

TEST_CASE("plan hash") {
  const auto a = stub_plan();
  auto b = stub_plan();
  CHECK(plan_hash(a) == plan_hash(b));
  CHECK(plan_hash(a).size() == 12);
  b.runs = 3;
  CHECK(plan_hash(a) != plan_hash(b));
  b = stub_plan();
  b.train_sets[0].data.items[0].text += "!";
  CHECK(plan_hash(a) != plan_hash(b));
}

TEST_CASE("separable single-set plan") {
  const auto vocab = testing::class_vocabularies(36, 256, 21);
  const auto d = testing::keyword_corpus(vocab, 150, 32, 21, "sep");
  ExperimentPlan plan;
  plan.train_sets = {{"sep", d}};
  plan.test_sets = {{"sep", d}};
  plan.add_combined = false;
  plan.runs = 2;
  plan.trainer = std::make_shared<HeadTrainer>(std::make_shared<HashedBowProvider>(256), HeadConfig{});
  const auto m = cross_eval(plan);
  REQUIRE(m.cell("sep", "sep").score.has_value());
  CHECK(m.cell("sep", "sep").score->mean >= 0.99);
}

TEST_CASE("identical plans give byte-identical JSON") {
  const auto corpora = testing::overlap_corpora({3, 6, 14, 3, 10, 30, 1024}, 5);
  ExperimentPlan plan;
  for (const auto &c : corpora) {
    plan.train_sets.push_back({c.name, c});
    plan.test_sets.push_back({c.name, c});
  }
  plan.runs = 2;
  plan.trainer = std::make_shared<HeadTrainer>(std::make_shared<HashedBowProvider>(1024), HeadConfig{});
  const auto first = matrix_to_json(cross_eval(plan)).dump(2);
  plan.max_parallel = 1;
  const auto second = matrix_to_json(cross_eval(plan)).dump(2);
  CHECK(first == second);
}

TEST_CASE("run directory naming") {
  testing::TempDir tmp;
  const auto a = make_run_dir(tmp.path(), "abcdef012345");
  const auto b = make_run_dir(tmp.path(), "abcdef012345");
  CHECK(std::filesystem::is_directory(a));
  CHECK(a != b);
  CHECK(std::regex_match(a.filename().string(), std::regex(R"(abcdef012345-\d{8}T\d{6}Z)")));
}
