#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "intentsynth/corpus.hpp"
#include "intentsynth/harness.hpp"
#include "intentsynth/http.hpp"
#include "intentsynth/metrics.hpp"

namespace intentsynth {

struct ManifestEntry {
  std::string id;
  std::filesystem::path audio_path; // empty for failures
  std::string speaker;
  std::string reference; // verbatim utterance text
  IntentLabel label = IntentLabel::help;
  std::optional<std::string> failure;

  bool valid() const { return !failure.has_value(); }
  bool operator==(const ManifestEntry &) const = default;
};

struct AudioManifest {
  std::vector<ManifestEntry> entries;

  std::size_t valid_count() const;
  bool operator==(const AudioManifest &) const = default;
};

// Line-delimited JSON, one entry per line.
void save_manifest(const AudioManifest &manifest, const std::filesystem::path &path);
AudioManifest load_manifest(const std::filesystem::path &path);

struct SpeechServiceOptions {
  std::size_t max_in_flight = 2;
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
  std::optional<std::filesystem::path> audit_log; // request/response pairs, JSONL
};

// POST {"text", "speaker_ref", "language": "de"} per utterance; the response
// body is stored as <audio_dir>/<id>.wav. Speakers rotate round-robin in
// dataset order. Failed items stay in the manifest with a failure marker.
AudioManifest synthesize_speech(const Dataset &dataset, const std::vector<std::string> &speakers,
                                const std::string &tts_url, const std::filesystem::path &audio_dir,
                                const SpeechServiceOptions &options = {});

struct TranscriptionResult {
  std::map<std::string, std::string> transcripts; // id -> text
  std::map<std::string, std::string> failures;    // id -> error
};

// Multipart upload (field "file", plus "language") -> {"text": ...}.
TranscriptionResult transcribe(const AudioManifest &manifest, const std::string &asr_url,
                               const SpeechServiceOptions &options = {});

void save_transcripts(const std::map<std::string, std::string> &transcripts, const std::filesystem::path &path);
std::map<std::string, std::string> load_transcripts(const std::filesystem::path &path);

struct SpeechEvalResult {
  double accuracy = 0.0;
  ErrorRate wer;
  ErrorRate cer;
  ConfusionMatrix confusion;
  std::size_t evaluated = 0;
};

// Classifies every valid entry's transcript and pools edit operations over
// the whole manifest. Throws DataError on an empty manifest or a missing
// transcript.
SpeechEvalResult speech_eval(const AudioManifest &manifest, const std::map<std::string, std::string> &transcripts,
                             const Classifier &classifier, const TextNorm &norm = TextNorm::standard());

} // namespace intentsynth
