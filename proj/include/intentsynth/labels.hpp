#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace intentsynth {

// Canonical order; every matrix and report indexes classes this way.
enum class IntentLabel : std::size_t {
  help = 0,
  light_on = 1,
  light_off = 2,
  roll_up = 3,
  roll_down = 4,
  no_command = 5,
};

inline constexpr std::size_t kNumLabels = 6;

inline constexpr std::array<IntentLabel, kNumLabels> kAllLabels = {
    IntentLabel::help,    IntentLabel::light_on,  IntentLabel::light_off,
    IntentLabel::roll_up, IntentLabel::roll_down, IntentLabel::no_command,
};

constexpr std::size_t label_index(IntentLabel label) { return static_cast<std::size_t>(label); }

std::string_view label_name(IntentLabel label);

std::optional<IntentLabel> try_parse_label(std::string_view name);

// Throws DataError for anything outside the six label names.
IntentLabel parse_label(std::string_view name);

} // namespace intentsynth
