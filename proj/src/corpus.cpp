#include "intentsynth/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "intentsynth/errors.hpp"
#include "intentsynth/rng.hpp"
#include "intentsynth/text.hpp"

namespace intentsynth {

using ordered_json = nlohmann::ordered_json;

std::string_view status_name(UtteranceStatus status) {
  switch (status) {
  case UtteranceStatus::raw:
    return "raw";
  case UtteranceStatus::accepted:
    return "accepted";
  case UtteranceStatus::rejected:
    return "rejected";
  case UtteranceStatus::relabeled:
    return "relabeled";
  }
  return "raw";
}

UtteranceStatus parse_status(std::string_view name) {
  for (auto status : {UtteranceStatus::raw, UtteranceStatus::accepted, UtteranceStatus::rejected,
                      UtteranceStatus::relabeled}) {
    if (status_name(status) == name)
      return status;
  }
  throw DataError("unknown status '" + std::string(name) + "'");
}

std::array<std::size_t, kNumLabels> Dataset::label_counts() const {
  std::array<std::size_t, kNumLabels> counts{};
  for (const auto &item : items)
    ++counts[label_index(item.label)];
  return counts;
}

std::string dedup_key(std::string_view text) {
  return text::casefold(text::collapse_whitespace(text));
}

namespace {

Utterance utterance_from_json(const nlohmann::json &record, std::size_t line_no) {
  auto fail = [&](const std::string &what) -> DataError {
    return DataError(what + " at line " + std::to_string(line_no));
  };
  if (!record.is_object())
    throw fail("record is not a JSON object");

  Utterance u;
  auto text_it = record.find("text");
  if (text_it == record.end() || !text_it->is_string())
    throw fail("missing or non-string 'text'");
  u.text = text_it->get<std::string>();
  if (text::collapse_whitespace(u.text).empty())
    throw fail("empty text");

  auto label_it = record.find("label");
  if (label_it == record.end() || !label_it->is_string())
    throw fail("missing or non-string 'label'");
  auto label = try_parse_label(label_it->get<std::string>());
  if (!label)
    throw fail("unknown label '" + label_it->get<std::string>() + "'");
  u.label = *label;

  if (auto it = record.find("source"); it != record.end() && it->is_string())
    u.source = it->get<std::string>();
  if (auto it = record.find("prompt_id"); it != record.end() && it->is_string())
    u.prompt_id = it->get<std::string>();
  if (auto it = record.find("seed"); it != record.end() && !it->is_null()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
      throw fail("seed must be a non-negative integer");
    u.seed = it->get<std::uint64_t>();
  }
  if (auto it = record.find("status"); it != record.end() && !it->is_null()) {
    if (!it->is_string())
      throw fail("non-string 'status'");
    try {
      u.status = parse_status(it->get<std::string>());
    } catch (const DataError &e) {
      throw fail(e.what());
    }
  }
  if (auto it = record.find("original_label"); it != record.end() && !it->is_null()) {
    auto original = it->is_string() ? try_parse_label(it->get<std::string>()) : std::nullopt;
    if (!original)
      throw fail("unknown label in 'original_label'");
    u.original_label = *original;
  }
  return u;
}

ordered_json utterance_to_json(const Utterance &u) {
  ordered_json record;
  record["text"] = u.text;
  record["label"] = label_name(u.label);
  record["source"] = u.source;
  record["prompt_id"] = u.prompt_id;
  record["seed"] = u.seed ? ordered_json(*u.seed) : ordered_json(nullptr);
  record["status"] = status_name(u.status);
  record["original_label"] =
      u.original_label ? ordered_json(label_name(*u.original_label)) : ordered_json(nullptr);
  return record;
}

} // namespace

Dataset parse_dataset(std::string_view contents, std::string name) {
  Dataset dataset{std::move(name), {}};
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto end = contents.find('\n', pos);
    if (end == std::string_view::npos)
      end = contents.size();
    auto line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos)
      continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &) {
      throw DataError("malformed JSON at line " + std::to_string(line_no));
    }
    dataset.items.push_back(utterance_from_json(record, line_no));
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_dataset(buffer.str(), path.stem().string());
  } catch (const DataError &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_dataset(const Dataset &dataset) {
  std::string out;
  for (const auto &item : dataset.items) {
    out += utterance_to_json(item).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset &dataset, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw DataError("cannot write dataset '" + path.string() + "'");
  out << serialize_dataset(dataset);
  out.flush();
  if (!out)
    throw DataError("I/O error while writing '" + path.string() + "'");
}

Dataset dedup(const Dataset &dataset) {
  Dataset out{dataset.name, {}};
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const auto &item : dataset.items) {
    if (seen.emplace(dedup_key(item.text), label_index(item.label)).second)
      out.items.push_back(item);
  }
  return out;
}

SplitBundle stratified_split(const Dataset &dataset, SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r = {ratios.train, ratios.val, ratios.test};
  for (double v : r) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw UsageError("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-6)
    throw UsageError("split ratios must sum to 1");

  const bool all_nonzero = r[0] > 0 && r[1] > 0 && r[2] > 0;
  std::array<std::vector<std::size_t>, kNumLabels> by_label;
  for (std::size_t i = 0; i < dataset.items.size(); ++i)
    by_label[label_index(dataset.items[i].label)].push_back(i);

  SplitBundle bundle;
  bundle.ratios = ratios;
  bundle.seed = seed;
  std::array<std::vector<std::size_t> *, 3> parts = {&bundle.train_indices, &bundle.val_indices,
                                                     &bundle.test_indices};

  for (std::size_t l = 0; l < kNumLabels; ++l) {
    auto &indices = by_label[l];
    const auto n = indices.size();
    if (all_nonzero && n > 0 && n < 3)
      throw DataError("label '" + std::string(label_name(kAllLabels[l])) + "' has only " +
                      std::to_string(n) + " items; at least 3 are needed for a three-way split");
    SplitMix64 rng(mix_seed(seed, l + 1));
    shuffle_in_place(std::span(indices), rng);

    std::array<std::size_t, 3> counts{};
    std::size_t assigned = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      counts[p] = static_cast<std::size_t>(std::floor(r[p] * static_cast<double>(n) + 1e-9));
      assigned += counts[p];
    }
    // Remainder goes to train, then val, then test (parts with a zero ratio are skipped).
    for (std::size_t p = 0; assigned < n; p = (p + 1) % 3) {
      if (r[p] > 0) {
        ++counts[p];
        ++assigned;
      }
    }
    std::size_t cursor = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < counts[p]; ++k)
        parts[p]->push_back(indices[cursor++]);
    }
  }

  // Each part keeps input order.
  const std::array<Dataset *, 3> outputs = {&bundle.train, &bundle.val, &bundle.test};
  const std::array<const char *, 3> suffixes = {"/train", "/val", "/test"};
  for (std::size_t p = 0; p < 3; ++p) {
    std::sort(parts[p]->begin(), parts[p]->end());
    outputs[p]->name = dataset.name + suffixes[p];
    for (auto idx : *parts[p])
      outputs[p]->items.push_back(dataset.items[idx]);
  }
  return bundle;
}

Dataset merge(std::span<const Dataset> datasets, std::string name) {
  Dataset combined{std::move(name), {}};
  for (const auto &d : datasets)
    combined.items.insert(combined.items.end(), d.items.begin(), d.items.end());
  return dedup(combined);
}

std::array<std::size_t, kNumLabels> balanced_quotas(std::size_t total) {
  std::array<std::size_t, kNumLabels> quotas{};
  quotas.fill((total + kNumLabels - 1) / kNumLabels);
  return quotas;
}

} // namespace intentsynth
