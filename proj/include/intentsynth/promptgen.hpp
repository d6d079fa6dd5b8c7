#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "intentsynth/corpus.hpp"
#include "intentsynth/http.hpp"
#include "intentsynth/labels.hpp"
#include "intentsynth/parser.hpp"

namespace intentsynth {

struct PromptTemplate {
  IntentLabel label = IntentLabel::help;
  std::string variant_id;
  std::string body;
  std::string speaker_keyword{kDefaultSpeakerKeyword};
  std::string end_keyword{kDefaultEndKeyword};
  int batch_size_requested = 10;

  // Body with the requested batch size and the configured keywords substituted in.
  std::string render() const;
};

// Built-in German prompts, one or more variants per label, in canonical label order.
const std::vector<PromptTemplate> &catalog();
std::vector<PromptTemplate> variants_for(IntentLabel label);

// Request body shapes.
//   openai  - OpenAI chat-completions with the extra sampling controls at top level
//   options - sampling controls nested in an "options" object (Ollama style)
//   hosted  - only the controls hosted chat services accept
enum class WireAdapter { openai, options, hosted };

std::string_view adapter_name(WireAdapter adapter);
WireAdapter parse_adapter(std::string_view name);

struct GenerationParams {
  std::uint64_t seed = 0;
  double top_p = 1.0;
  int top_k = 10000;
  double repetition_penalty = 1.0;
  double typical_p = 0.995;
  double temperature = 0.7;
  std::string model;
  std::string endpoint_url;
  int max_tokens = 1024;
  WireAdapter adapter = WireAdapter::openai;
  std::string source;                           // generator id stored on utterances; defaults to model
  std::string api_key_env = "INTENTSYNTH_API_KEY"; // name of the variable, never the key itself
  int timeout_seconds = 120;

  void validate() const;
};

// Draws a campaign seed strictly inside (0, 2^35) and advances rng_state.
// A fresh campaign starts from rng_state = 0.
std::uint64_t draw_seed(std::uint64_t &rng_state);

inline constexpr std::uint64_t kSeedUpperBound = std::uint64_t{1} << 35;

struct RawCompletion {
  std::string prompt_id;
  std::uint64_t seed = 0;
  std::string text;
  std::string model;
  std::string timestamp; // ISO-8601 UTC
  std::string endpoint;
  nlohmann::ordered_json request;

  nlohmann::ordered_json to_json() const;
  static RawCompletion from_json(const nlohmann::json &j);
};

class AuditLog {
public:
  explicit AuditLog(const std::filesystem::path &path);
  void append(const RawCompletion &completion);

private:
  std::mutex mutex_;
  std::ofstream out_;
  std::filesystem::path path_;
};

std::vector<RawCompletion> load_audit_log(const std::filesystem::path &path);

class ChatClient {
public:
  explicit ChatClient(GenerationParams params, RetryPolicy retry = {});

  nlohmann::ordered_json build_request(const PromptTemplate &prompt) const;
  RawCompletion complete(const PromptTemplate &prompt) const;

  const GenerationParams &params() const { return params_; }

private:
  GenerationParams params_;
  RetryPolicy retry_;
};

RawCompletion chat_complete(const GenerationParams &params, const PromptTemplate &prompt);

using CompletionFn = std::function<RawCompletion(const PromptTemplate &)>;

struct GenerationOptions {
  int calls_per_variant = 50;
  AuditLog *audit = nullptr;
};

struct GenerationResult {
  Dataset corpus;
  bool budget_exhausted = false;
  std::string warning;
  std::size_t calls = 0;
};

// Feeds completions through parse_block + dedup until `quota` distinct
// utterances exist. Also used to replay an audit log.
class CorpusAccumulator {
public:
  CorpusAccumulator(IntentLabel label, std::size_t quota, std::string source);

  // Returns the number of new utterances taken from this completion.
  std::size_t add(const RawCompletion &completion, const PromptTemplate &prompt);
  bool full() const { return corpus_.items.size() >= quota_; }
  const Dataset &corpus() const { return corpus_; }
  Dataset take() { return std::move(corpus_); }

private:
  IntentLabel label_;
  std::size_t quota_;
  std::string source_;
  Dataset corpus_;
  std::unordered_set<std::string> keys_;
};

GenerationResult generate_label_corpus(IntentLabel label, std::size_t quota, const CompletionFn &complete,
                                       const std::string &source, const GenerationOptions &options = {});

GenerationResult generate_label_corpus(IntentLabel label, std::size_t quota, const ChatClient &client,
                                       const GenerationOptions &options = {});

// Rebuilds a label corpus from recorded completions, in recording order.
Dataset replay_completions(IntentLabel label, std::size_t quota,
                           const std::vector<RawCompletion> &completions, const std::string &source);

struct CampaignResult {
  Dataset corpus;
  std::vector<GenerationResult> per_label;
  bool budget_exhausted() const;
};

// Labels run concurrently; calls within one label stay sequential.
CampaignResult generate_campaign(const std::array<std::size_t, kNumLabels> &quotas,
                                 const ChatClient &client, const GenerationOptions &options = {},
                                 std::string name = "generated");

} // namespace intentsynth
