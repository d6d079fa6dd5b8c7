#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "intentsynth/corpus.hpp"

namespace intentsynth {

enum class CurationAction { accept, reject, relabel };

std::string_view action_name(CurationAction action);
CurationAction parse_action(std::string_view name);

struct CurationDecision {
  std::size_t utterance_index = 0;
  CurationAction action = CurationAction::accept;
  std::optional<IntentLabel> new_label; // relabel only
  std::optional<std::string> reason;
  std::string reviewer;
  std::string timestamp;

  bool operator==(const CurationDecision &) const = default;
};

// Shortcut reasons offered after a reject key.
inline constexpr const char *kReasonGrammar = "grammar";
inline constexpr const char *kReasonNonsense = "nonsense";
inline constexpr const char *kReasonWrongCommand = "wrong-command";

// Item count plus a hash of all texts; stored on every log line.
struct DatasetFingerprint {
  std::size_t items = 0;
  std::string text_hash;

  static DatasetFingerprint of(const Dataset &dataset);
  bool operator==(const DatasetFingerprint &) const = default;
};

nlohmann::ordered_json decision_to_json(const CurationDecision &decision, const DatasetFingerprint &fp);
CurationDecision decision_from_json(const nlohmann::json &j, DatasetFingerprint *fp = nullptr);

// Reads a line-delimited decision log. A trailing partial line (an
// interrupted write) is ignored. Throws DataError when a line was written
// against a different dataset.
std::vector<CurationDecision> load_decision_log(const std::filesystem::path &path, const Dataset &dataset);

// Pure replay. The last decision for an index wins; rejected items are
// dropped, accepted ones marked, relabeled ones keep their old label in
// original_label. Undecided items pass through unchanged.
Dataset apply_log(const Dataset &dataset, const std::vector<CurationDecision> &log);

struct ReviewOptions {
  std::string reviewer = "reviewer";
  std::optional<std::filesystem::path> log_path; // appended per decision; resumed when present
  std::function<std::string()> clock;            // defaults to UTC wall time
};

struct ReviewResult {
  Dataset curated;
  std::vector<CurationDecision> log; // prior decisions followed by this session's
  std::size_t undecided = 0;
  bool quit = false;
};

// Key protocol, whitespace ignored between commands:
//   a        accept
//   r[g|n|w] reject, optional reason shortcut
//   l<1-6>   relabel to the n-th canonical label
//   s        skip (stays undecided)
//   q        quit
// End of input behaves like q.
ReviewResult review_session(const Dataset &dataset, std::istream &keys, std::ostream &display,
                            const ReviewOptions &options = {});

// Puts a terminal into non-canonical, no-echo mode for single-key input and
// restores it on destruction. Does nothing when fd is not a terminal.
class RawTerminal {
public:
  explicit RawTerminal(int fd = 0);
  ~RawTerminal();
  RawTerminal(const RawTerminal &) = delete;
  RawTerminal &operator=(const RawTerminal &) = delete;

  bool active() const { return active_; }

private:
  struct Saved;
  int fd_;
  bool active_ = false;
  std::unique_ptr<Saved> saved_;
};

} // namespace intentsynth
