#include "intentsynth/parser.hpp"

#include <unordered_set>

#include "intentsynth/errors.hpp"
#include "intentsynth/text.hpp"

namespace intentsynth {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Length of a leading list marker ("12." or "-") followed by a space or the end.
std::size_t list_marker_length(std::string_view s) {
  std::size_t i = 0;
  if (!s.empty() && s[0] == '-') {
    i = 1;
  } else {
    while (i < s.size() && is_digit(s[i]))
      ++i;
    if (i == 0 || i >= s.size() || s[i] != '.')
      return 0;
    ++i;
  }
  if (i == s.size())
    return i;
  return s[i] == ' ' ? i + 1 : 0;
}

} // namespace

std::string normalize_utterance(std::string_view input) {
  auto collapsed = text::collapse_whitespace(input);
  const auto marker = list_marker_length(collapsed);
  if (marker == 0)
    return collapsed;
  return collapsed.substr(marker);
}

ParseReport parse_block(std::string_view raw, std::string_view speaker_keyword,
                        std::string_view end_keyword) {
  if (speaker_keyword.empty() || end_keyword.empty())
    throw UsageError("parse keywords must be non-empty");
  if (speaker_keyword == end_keyword)
    throw UsageError("speaker and end keywords must differ");

  ParseReport report;
  std::unordered_set<std::string> seen;
  constexpr auto npos = std::string_view::npos;

  std::size_t pos = raw.find(speaker_keyword);
  while (pos != npos) {
    const std::size_t start = pos + speaker_keyword.size();
    const std::size_t end = raw.find(end_keyword, start);
    const std::size_t next_open = raw.find(speaker_keyword, start);

    if (end == npos) {
      ++report.dropped_incomplete;
      if (next_open != npos)
        ++report.reopened;
      pos = next_open;
      continue;
    }
    if (next_open != npos && next_open < end) {
      // A fresh speaker keyword before any end keyword: the open candidate was truncated.
      ++report.dropped_incomplete;
      ++report.reopened;
      pos = next_open;
      continue;
    }

    auto candidate = normalize_utterance(raw.substr(start, end - start));
    if (candidate.empty()) {
      ++report.dropped_empty;
    } else if (!seen.insert(candidate).second) {
      ++report.dropped_duplicate_within_block;
    } else {
      report.accepted.push_back(std::move(candidate));
    }
    pos = raw.find(speaker_keyword, end + end_keyword.size());
  }
  return report;
}

} // namespace intentsynth
