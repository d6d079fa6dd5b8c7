#include "intentsynth/harness.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "intentsynth/errors.hpp"
#include "intentsynth/log.hpp"
#include "intentsynth/text.hpp"

namespace intentsynth {

HeadClassifier::HeadClassifier(ClassifierHead head, std::shared_ptr<const EmbeddingProvider> provider)
    : head_(std::move(head)), provider_(std::move(provider)) {
  if (!provider_)
    throw UsageError("HeadClassifier needs an embedding provider");
  if (provider_->dim() != head_.input_dim())
    throw DataError("embedding dim " + std::to_string(provider_->dim()) + " does not match head dim " +
                    std::to_string(head_.input_dim()));
}

std::vector<IntentLabel> HeadClassifier::predict(std::span<const Utterance> items) const {
  // Empty texts (an ASR hypothesis can be empty) score as the zero vector.
  std::vector<std::string> texts;
  for (const auto &u : items) {
    if (!u.text.empty())
      texts.push_back(u.text);
  }
  std::vector<EmbeddingVector> vectors;
  if (!texts.empty())
    vectors = provider_->embed_batch(texts);
  EmbeddingVector zero{std::vector<double>(head_.input_dim(), 0.0), provider_->provider_id()};
  std::vector<IntentLabel> out;
  out.reserve(items.size());
  std::size_t k = 0;
  for (const auto &u : items)
    out.push_back(head_.predict(u.text.empty() ? zero : vectors[k++]).label);
  return out;
}

HeadTrainer::HeadTrainer(std::shared_ptr<const EmbeddingProvider> provider, HeadConfig config)
    : provider_(std::move(provider)), config_(config) {
  if (!provider_)
    throw UsageError("HeadTrainer needs an embedding provider");
  config_.validate();
}

std::vector<std::shared_ptr<const Classifier>> HeadTrainer::train(const SplitBundle &split,
                                                                  std::uint64_t seed) const {
  auto config = config_;
  config.seed = seed;
  const auto set = train_head(split.train, split.val, *provider_, config);
  std::vector<std::shared_ptr<const Classifier>> out;
  for (const auto &cp : set.checkpoints)
    out.push_back(std::make_shared<HeadClassifier>(cp.head, provider_));
  return out;
}

std::string HeadTrainer::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << "cn1|" << provider_->provider_id() << "|dim=" << provider_->dim() << "|" << optimizer_description(config_)
      << "|dropout=" << config_.dropout << "|epochs=" << config_.epochs << "|batch=" << config_.batch_size;
  return out.str();
}

CachingEmbeddingProvider::CachingEmbeddingProvider(std::shared_ptr<const EmbeddingProvider> inner)
    : inner_(std::move(inner)) {
  if (!inner_)
    throw UsageError("CachingEmbeddingProvider needs a provider");
}

std::vector<EmbeddingVector> CachingEmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  std::vector<std::string> missing;
  {
    std::lock_guard lock(mutex_);
    std::unordered_set<std::string> queued;
    for (const auto &t : texts) {
      if (!cache_.count(t) && queued.insert(t).second)
        missing.push_back(t);
    }
  }
  if (!missing.empty()) {
    auto fresh = inner_->embed_batch(missing);
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < missing.size(); ++i)
      cache_.emplace(missing[i], std::move(fresh[i]));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::lock_guard lock(mutex_);
  for (const auto &t : texts)
    out.push_back(cache_.at(t));
  return out;
}

void ExperimentPlan::validate() const {
  if (runs < 1)
    throw ConfigError("plan runs must be at least 1");
  if (!trainer)
    throw ConfigError("plan has no trainer");
  if (train_sets.empty())
    throw ConfigError("plan has no train sets");
  const double sum = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 || std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  std::set<std::string> rows, cols;
  for (const auto &t : train_sets) {
    if (t.name.empty() || !rows.insert(t.name).second)
      throw ConfigError("train set names must be unique and non-empty ('" + t.name + "')");
  }
  for (const auto &t : test_sets) {
    if (t.name.empty() || !cols.insert(t.name).second)
      throw ConfigError("test set names must be unique and non-empty ('" + t.name + "')");
    if (t.data.empty())
      throw ConfigError("test set '" + t.name + "' is empty");
  }
  if (add_combined && (rows.count(kCombinedName) || cols.count(kCombinedName)))
    throw ConfigError(std::string("the name '") + kCombinedName + "' is reserved");
}

std::vector<std::string> plan_rows(const ExperimentPlan &plan) {
  std::vector<std::string> out;
  for (const auto &t : plan.train_sets)
    out.push_back(t.name);
  if (plan.add_combined)
    out.emplace_back(kCombinedName);
  return out;
}

std::vector<std::string> plan_columns(const ExperimentPlan &plan) {
  std::vector<std::string> out;
  for (const auto &t : plan.test_sets)
    out.push_back(t.name);
  if (plan.add_combined)
    out.emplace_back(kCombinedName);
  return out;
}

std::string plan_hash(const ExperimentPlan &plan) {
  nlohmann::ordered_json j;
  auto describe_sets = [](const std::vector<NamedDataset> &sets) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto &s : sets) {
      std::uint64_t h = 0xcbf29ce484222325ULL;
      for (const auto &u : s.data.items) {
        h = text::fnv1a64(u.text, h);
        h = text::fnv1a64(label_name(u.label), h);
        h = text::fnv1a64(std::string_view("\n", 1), h);
      }
      arr.push_back({{"name", s.name}, {"items", s.data.size()}, {"hash", text::hex64(h)}});
    }
    return arr;
  };
  j["train"] = describe_sets(plan.train_sets);
  j["test"] = describe_sets(plan.test_sets);
  j["add_combined"] = plan.add_combined;
  j["runs"] = plan.runs;
  j["seed"] = plan.seed;
  j["ratios"] = {plan.ratios.train, plan.ratios.val, plan.ratios.test};
  j["mode"] = mode_name(plan.mode);
  j["diagonal_uses_test_split"] = plan.diagonal_uses_test_split;
  j["trainer"] = plan.trainer ? plan.trainer->describe() : "";
  return text::hex64(text::fnv1a64(j.dump())).substr(0, 12);
}

const CellResult &ResultMatrix::cell(const std::string &train, const std::string &test) const {
  for (const auto &c : cells) {
    if (c.train == train && c.test == test)
      return c;
  }
  throw UsageError("no cell (" + train + ", " + test + ")");
}

namespace {

struct Row {
  std::string name;
  Dataset source;
  std::optional<SplitBundle> split;
  std::string error;
};

struct CellPlan {
  Dataset items;
  std::string portion;
  std::string error;
};

struct RunOutcome {
  std::string train_error;
  // Per column: accuracies of the evaluated checkpoints, summed confusion, error.
  std::vector<std::vector<double>> values;
  std::vector<ConfusionMatrix> confusions;
  std::vector<std::string> errors;
};

std::unordered_set<std::string> keys_of(const Dataset &d) {
  std::unordered_set<std::string> keys;
  for (const auto &u : d.items)
    keys.insert(dedup_key(u.text) + '\x1f' + std::string(label_name(u.label)));
  return keys;
}

Dataset restrict_to(const Dataset &items, const std::unordered_set<std::string> &keys, std::string name) {
  Dataset out;
  out.name = std::move(name);
  for (const auto &u : items.items) {
    if (keys.count(dedup_key(u.text) + '\x1f' + std::string(label_name(u.label))))
      out.items.push_back(u);
  }
  return out;
}

} // namespace

ResultMatrix cross_eval(const ExperimentPlan &plan) {
  plan.validate();

  std::vector<Row> rows;
  for (const auto &t : plan.train_sets)
    rows.push_back(Row{t.name, t.data, std::nullopt, {}});
  if (plan.add_combined) {
    std::vector<Dataset> parts;
    for (const auto &t : plan.train_sets)
      parts.push_back(t.data);
    rows.push_back(Row{kCombinedName, merge(parts, kCombinedName), std::nullopt, {}});
  }
  for (auto &row : rows) {
    try {
      row.split = stratified_split(row.source, plan.ratios, plan.seed);
    } catch (const Error &e) {
      row.error = std::string("split failed: ") + e.what();
    }
  }

  // Column contents that do not depend on the row.
  struct Column {
    std::string name;
    std::optional<Dataset> full; // external or Combined
    std::string error;
    bool is_train_name = false;
  };
  std::vector<Column> columns;
  for (const auto &t : plan.test_sets) {
    Column c{t.name, t.data, {}, false};
    for (const auto &tr : plan.train_sets)
      c.is_train_name = c.is_train_name || tr.name == t.name;
    columns.push_back(std::move(c));
  }
  if (plan.add_combined) {
    Column c{kCombinedName, std::nullopt, {}, true};
    std::vector<Dataset> tests;
    for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
      if (!rows[r].split) {
        c.error = "train set '" + rows[r].name + "' could not be split";
        break;
      }
      tests.push_back(rows[r].split->test);
    }
    if (c.error.empty())
      c.full = merge(tests, kCombinedName);
    columns.push_back(std::move(c));
  }

  // Test items per cell.
  std::vector<std::vector<CellPlan>> cell_plans(rows.size(), std::vector<CellPlan>(columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto &row = rows[r];
    const bool combined_row = plan.add_combined && r + 1 == rows.size();
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto &cp = cell_plans[r][c];
      const auto &col = columns[c];
      if (!col.error.empty()) {
        cp.error = col.error;
        continue;
      }
      const bool diagonal = row.name == col.name;
      if (diagonal && plan.diagonal_uses_test_split) {
        if (!row.split) {
          cp.error = row.error;
          continue;
        }
        cp.items = row.split->test;
        cp.portion = "held-out test split";
      } else if (combined_row && col.is_train_name && plan.diagonal_uses_test_split) {
        // The combined row trained on this set; score only its held-out part.
        if (!row.split) {
          cp.error = row.error;
          continue;
        }
        cp.items = restrict_to(row.split->test, keys_of(*col.full), col.name);
        cp.portion = "held-out test split items from " + col.name;
      } else {
        cp.items = *col.full;
        cp.portion = col.name == kCombinedName ? "merged test splits" : "full set";
      }
      if (cp.items.empty() && cp.error.empty())
        cp.error = "no test items";
    }
  }

  // One task per (row, run).
  const auto n_runs = static_cast<std::size_t>(plan.runs);
  std::vector<RunOutcome> outcomes(rows.size() * n_runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const auto task = next.fetch_add(1);
      if (task >= outcomes.size())
        return;
      const auto r = task / n_runs;
      const auto run = task % n_runs;
      auto &out = outcomes[task];
      out.values.assign(columns.size(), {});
      out.confusions.assign(columns.size(), ConfusionMatrix{});
      out.errors.assign(columns.size(), {});
      if (!rows[r].split) {
        out.train_error = rows[r].error;
        continue;
      }
      std::vector<std::shared_ptr<const Classifier>> checkpoints;
      try {
        checkpoints = plan.trainer->train(*rows[r].split, plan.seed + run);
        if (checkpoints.empty())
          throw DataError("trainer produced no checkpoints");
      } catch (const std::exception &e) {
        out.train_error = std::string("training failed: ") + e.what();
        log::warn("cell row '" + rows[r].name + "' run " + std::to_string(run) + ": " + out.train_error);
        continue;
      }
      std::vector<std::shared_ptr<const Classifier>> selected;
      if (plan.mode == AggregationMode::per_run_finals)
        selected.push_back(checkpoints.back());
      else
        selected = checkpoints;
      for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto &cp = cell_plans[r][c];
        if (!cp.error.empty())
          continue;
        std::vector<IntentLabel> golds;
        for (const auto &u : cp.items.items)
          golds.push_back(u.label);
        try {
          for (const auto &clf : selected) {
            const auto preds = clf->predict(cp.items.items);
            out.values[c].push_back(accuracy(preds, golds));
            out.confusions[c] += confusion(preds, golds);
          }
        } catch (const std::exception &e) {
          out.errors[c] = std::string("evaluation failed: ") + e.what();
        }
      }
    }
  };
  std::size_t n_workers = plan.max_parallel ? plan.max_parallel : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, outcomes.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w)
      pool.emplace_back(worker);
  }

  ResultMatrix m;
  m.train_names = plan_rows(plan);
  m.test_names = plan_columns(plan);
  m.mode = plan.mode;
  m.runs = plan.runs;
  m.plan_hash = plan_hash(plan);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string row_error;
    for (std::size_t run = 0; run < n_runs && row_error.empty(); ++run)
      row_error = outcomes[r * n_runs + run].train_error;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      CellResult cell;
      cell.train = rows[r].name;
      cell.test = columns[c].name;
      cell.portion = cell_plans[r][c].portion;
      cell.test_items = cell_plans[r][c].items.size();
      cell.error = !row_error.empty() ? row_error : cell_plans[r][c].error;
      for (std::size_t run = 0; run < n_runs && cell.error.empty(); ++run) {
        const auto &o = outcomes[r * n_runs + run];
        if (!o.errors[c].empty()) {
          cell.error = o.errors[c];
          break;
        }
        cell.values.insert(cell.values.end(), o.values[c].begin(), o.values[c].end());
        cell.confusion += o.confusions[c];
      }
      if (cell.error.empty()) {
        cell.score = aggregate(cell.values, plan.mode);
      } else {
        cell.values.clear();
        cell.confusion = ConfusionMatrix{};
      }
      m.cells.push_back(std::move(cell));
    }
  }
  return m;
}

std::filesystem::path make_run_dir(const std::filesystem::path &parent, const std::string &hash) {
  auto stamp = log::utc_timestamp();
  stamp.erase(std::remove(stamp.begin(), stamp.end(), ':'), stamp.end());
  stamp.erase(std::remove(stamp.begin(), stamp.end(), '-'), stamp.end());
  auto dir = parent / (hash + "-" + stamp);
  for (int suffix = 2; std::filesystem::exists(dir); ++suffix)
    dir = parent / (hash + "-" + stamp + "-" + std::to_string(suffix));
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace intentsynth
