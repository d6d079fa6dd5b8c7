#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intentsynth/labels.hpp"

namespace intentsynth {

enum class UtteranceStatus { raw, accepted, rejected, relabeled };

std::string_view status_name(UtteranceStatus status);
UtteranceStatus parse_status(std::string_view name);

struct Utterance {
  std::string text;
  IntentLabel label = IntentLabel::help;
  std::string source;
  std::string prompt_id;
  std::optional<std::uint64_t> seed; // absent for human-recorded data
  UtteranceStatus status = UtteranceStatus::raw;
  std::optional<IntentLabel> original_label; // set when relabeled

  bool operator==(const Utterance &) const = default;
};

struct Dataset {
  std::string name;
  std::vector<Utterance> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::array<std::size_t, kNumLabels> label_counts() const;

  bool operator==(const Dataset &) const = default;
};

struct SplitRatios {
  double train = 0.7;
  double val = 0.2;
  double test = 0.1;
};

// Index vectors refer to positions in the input dataset.
struct SplitBundle {
  Dataset train;
  Dataset val;
  Dataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::vector<std::size_t> test_indices;
  SplitRatios ratios;
  std::uint64_t seed = 0;
};

// Dedup key: trimmed, whitespace-collapsed, case-folded text.
std::string dedup_key(std::string_view text);

Dataset load_dataset(const std::filesystem::path &path);
Dataset parse_dataset(std::string_view contents, std::string name = {});

void save_dataset(const Dataset &dataset, const std::filesystem::path &path);
std::string serialize_dataset(const Dataset &dataset);

// First occurrence of each (dedup key, label) pair wins.
Dataset dedup(const Dataset &dataset);

SplitBundle stratified_split(const Dataset &dataset, SplitRatios ratios, std::uint64_t seed);

Dataset merge(std::span<const Dataset> datasets, std::string name);

// Balanced per-label targets: ceil(total / 6) each.
std::array<std::size_t, kNumLabels> balanced_quotas(std::size_t total);

} // namespace intentsynth
