#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace intentsynth {

inline constexpr std::string_view kDefaultSpeakerKeyword = "Ältere_Person:";
inline constexpr std::string_view kDefaultEndKeyword = "NÄCHSTES";

// Every speaker keyword occurrence opens one candidate segment; each candidate
// ends up in exactly one of the four buckets below.
struct ParseReport {
  std::vector<std::string> accepted;
  std::size_t dropped_incomplete = 0;
  std::size_t dropped_empty = 0;
  std::size_t dropped_duplicate_within_block = 0;
  // Candidates cut short by a second speaker keyword (also counted as incomplete).
  std::size_t reopened = 0;

  std::size_t candidates() const {
    return accepted.size() + dropped_incomplete + dropped_empty + dropped_duplicate_within_block;
  }
};

// Trim, collapse whitespace and strip one leading "<digits>." or "-" list marker.
std::string normalize_utterance(std::string_view text);

// Keywords are matched exactly and case-sensitively. Throws UsageError when a
// keyword is empty or both are equal.
ParseReport parse_block(std::string_view raw, std::string_view speaker_keyword = kDefaultSpeakerKeyword,
                        std::string_view end_keyword = kDefaultEndKeyword);

} // namespace intentsynth
