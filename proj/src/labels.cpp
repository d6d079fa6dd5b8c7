#include "intentsynth/labels.hpp"

#include "intentsynth/errors.hpp"

namespace intentsynth {

namespace {
constexpr std::array<std::string_view, kNumLabels> kNames = {
    "help", "light_on", "light_off", "roll_up", "roll_down", "no_command",
};
}

std::string_view label_name(IntentLabel label) { return kNames.at(label_index(label)); }

std::optional<IntentLabel> try_parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (kNames[i] == name)
      return kAllLabels[i];
  }
  return std::nullopt;
}

IntentLabel parse_label(std::string_view name) {
  if (auto label = try_parse_label(name))
    return *label;
  throw DataError("unknown label '" + std::string(name) + "'");
}

} // namespace intentsynth
