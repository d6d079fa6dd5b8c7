#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "intentsynth/classify.hpp"
#include "intentsynth/corpus.hpp"
#include "intentsynth/embed.hpp"
#include "intentsynth/metrics.hpp"

namespace intentsynth {

// Anything that maps utterances to labels. Implementations must be safe to
// call from several threads at once.
class Classifier {
public:
  virtual ~Classifier() = default;
  virtual std::vector<IntentLabel> predict(std::span<const Utterance> items) const = 0;
};

// Produces one classifier per checkpoint, in epoch order.
class Trainer {
public:
  virtual ~Trainer() = default;
  virtual std::vector<std::shared_ptr<const Classifier>> train(const SplitBundle &split,
                                                               std::uint64_t seed) const = 0;
  // Stable description folded into the plan hash.
  virtual std::string describe() const = 0;
};

class HeadClassifier final : public Classifier {
public:
  HeadClassifier(ClassifierHead head, std::shared_ptr<const EmbeddingProvider> provider);
  std::vector<IntentLabel> predict(std::span<const Utterance> items) const override;
  const ClassifierHead &head() const { return head_; }

private:
  ClassifierHead head_;
  std::shared_ptr<const EmbeddingProvider> provider_;
};

// cn1 over a frozen provider, via train_head.
class HeadTrainer final : public Trainer {
public:
  HeadTrainer(std::shared_ptr<const EmbeddingProvider> provider, HeadConfig config);
  std::vector<std::shared_ptr<const Classifier>> train(const SplitBundle &split,
                                                       std::uint64_t seed) const override;
  std::string describe() const override;

private:
  std::shared_ptr<const EmbeddingProvider> provider_;
  HeadConfig config_;
};

// Memoizes vectors by text so repeated evaluation does not re-query a remote encoder.
class CachingEmbeddingProvider final : public EmbeddingProvider {
public:
  explicit CachingEmbeddingProvider(std::shared_ptr<const EmbeddingProvider> inner);

  const std::string &provider_id() const override { return inner_->provider_id(); }
  std::size_t dim() const override { return inner_->dim(); }
  ProviderKind kind() const override { return inner_->kind(); }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, EmbeddingVector> cache_;
};

struct NamedDataset {
  std::string name;
  Dataset data;
};

inline constexpr const char *kCombinedName = "Combined";

struct ExperimentPlan {
  std::vector<NamedDataset> train_sets;
  // Columns. A test set named like a train set is scored on that set's
  // held-out split in its own row (the diagonal) and in full elsewhere.
  std::vector<NamedDataset> test_sets;
  // Adds a "Combined" row (merge of the train sets, then split) and column
  // (merge of each train set's test split).
  bool add_combined = true;
  int runs = 5;
  std::uint64_t seed = 0; // split seed; run r trains with seed + r
  SplitRatios ratios;
  AggregationMode mode = AggregationMode::per_run_finals;
  bool diagonal_uses_test_split = true;
  std::size_t max_parallel = 0; // 0 = hardware concurrency
  std::shared_ptr<const Trainer> trainer;

  void validate() const;
};

struct CellResult {
  std::string train;
  std::string test;
  std::optional<AggregateScore> score;
  std::vector<double> values;  // one accuracy per evaluated checkpoint
  ConfusionMatrix confusion;   // summed over evaluated checkpoints
  std::size_t test_items = 0;
  std::string portion;         // which part of the test set was used
  std::string error;           // empty on success

  bool operator==(const CellResult &) const = default;
};

struct ResultMatrix {
  std::vector<std::string> train_names; // rows
  std::vector<std::string> test_names;  // columns
  std::vector<CellResult> cells;        // row-major
  AggregationMode mode = AggregationMode::per_run_finals;
  int runs = 0;
  std::string plan_hash;

  const CellResult &cell(const std::string &train, const std::string &test) const;
  bool operator==(const ResultMatrix &) const = default;
};

// Row and column names the plan will produce.
std::vector<std::string> plan_rows(const ExperimentPlan &plan);
std::vector<std::string> plan_columns(const ExperimentPlan &plan);

// Hash of everything that determines the result: names, dataset contents,
// runs, seeds, ratios, mode and the trainer description.
std::string plan_hash(const ExperimentPlan &plan);

// Rows train in parallel. A training failure marks every cell of its row
// with the error; evaluation failures mark only their cell.
ResultMatrix cross_eval(const ExperimentPlan &plan);

// "<parent>/<plan hash>-<UTC timestamp>", created.
std::filesystem::path make_run_dir(const std::filesystem::path &parent, const std::string &plan_hash);

} // namespace intentsynth
