#include "intentsynth/promptgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <future>
#include <sstream>

#include "intentsynth/errors.hpp"
#include "intentsynth/log.hpp"
#include "intentsynth/rng.hpp"

namespace intentsynth {

using ordered_json = nlohmann::ordered_json;

namespace {

void replace_all(std::string &s, std::string_view from, std::string_view to) {
  if (from.empty() || from == to)
    return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}


} // namespace

std::string PromptTemplate::render() const {
  std::string out = body;
  if (batch_size_requested != 10)
    replace_all(out, "Generieren Sie 10 ", "Generieren Sie " + std::to_string(batch_size_requested) + " ");
  replace_all(out, kDefaultSpeakerKeyword, speaker_keyword);
  replace_all(out, kDefaultEndKeyword, end_keyword);
  return out;
}

std::string_view adapter_name(WireAdapter adapter) {
  switch (adapter) {
  case WireAdapter::openai:
    return "openai";
  case WireAdapter::options:
    return "options";
  case WireAdapter::hosted:
    return "hosted";
  }
  return "openai";
}

WireAdapter parse_adapter(std::string_view name) {
  for (auto a : {WireAdapter::openai, WireAdapter::options, WireAdapter::hosted}) {
    if (adapter_name(a) == name)
      return a;
  }
  throw ConfigError("unknown wire adapter '" + std::string(name) + "' (expected openai, options or hosted)");
}

void GenerationParams::validate() const {
  auto fraction = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!fraction(top_p))
    throw ConfigError("top_p must lie in [0, 1]");
  if (!fraction(typical_p))
    throw ConfigError("typical_p must lie in [0, 1]");
  if (top_k <= 0)
    throw ConfigError("top_k must be positive");
  if (!(repetition_penalty > 0.0) || !std::isfinite(repetition_penalty))
    throw ConfigError("repetition_penalty must be positive");
  if (!(temperature >= 0.0) || !std::isfinite(temperature))
    throw ConfigError("temperature must be non-negative");
  if (max_tokens <= 0)
    throw ConfigError("max_tokens must be positive");
  if (timeout_seconds <= 0)
    throw ConfigError("timeout must be positive");
  if (model.empty())
    throw ConfigError("model is required");
  if (endpoint_url.empty())
    throw ConfigError("endpoint_url is required");
  Endpoint::parse(endpoint_url);
}

std::uint64_t draw_seed(std::uint64_t &rng_state) {
  SplitMix64 rng(rng_state);
  std::uint64_t value = 0;
  while (value == 0)
    value = rng.next() >> 29; // top 35 bits
  rng_state = rng.state();
  return value;
}

ordered_json RawCompletion::to_json() const {
  ordered_json j;
  j["prompt_id"] = prompt_id;
  j["seed"] = seed;
  j["text"] = text;
  j["model"] = model;
  j["timestamp"] = timestamp;
  j["endpoint"] = endpoint;
  j["request"] = request;
  return j;
}

RawCompletion RawCompletion::from_json(const nlohmann::json &j) {
  RawCompletion c;
  try {
    c.prompt_id = j.at("prompt_id").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.text = j.at("text").get<std::string>();
    c.model = j.value("model", "");
    c.timestamp = j.value("timestamp", "");
    c.endpoint = j.value("endpoint", "");
    if (auto it = j.find("request"); it != j.end())
      c.request = ordered_json::parse(it->dump());
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("malformed completion record: ") + e.what());
  }
  return c;
}

AuditLog::AuditLog(const std::filesystem::path &path)
    : out_(path, std::ios::binary | std::ios::app), path_(path) {
  if (!out_)
    throw DataError("cannot open audit log '" + path.string() + "'");
}

void AuditLog::append(const RawCompletion &completion) {
  std::lock_guard lock(mutex_);
  out_ << completion.to_json().dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  out_.flush();
  if (!out_)
    throw DataError("I/O error while writing '" + path_.string() + "'");
}

std::vector<RawCompletion> load_audit_log(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open audit log '" + path.string() + "'");
  std::vector<RawCompletion> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      out.push_back(RawCompletion::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error &) {
      throw DataError(path.string() + ": malformed JSON at line " + std::to_string(line_no));
    }
  }
  return out;
}

ChatClient::ChatClient(GenerationParams params, RetryPolicy retry)
    : params_(std::move(params)), retry_(retry) {
  params_.validate();
  if (params_.source.empty())
    params_.source = params_.model;
}

ordered_json ChatClient::build_request(const PromptTemplate &prompt) const {
  ordered_json request;
  request["model"] = params_.model;
  request["messages"] = ordered_json::array({{{"role", "user"}, {"content", prompt.render()}}});
  switch (params_.adapter) {
  case WireAdapter::openai:
    request["temperature"] = params_.temperature;
    request["top_p"] = params_.top_p;
    request["top_k"] = params_.top_k;
    request["typical_p"] = params_.typical_p;
    request["repetition_penalty"] = params_.repetition_penalty;
    request["seed"] = params_.seed;
    request["max_tokens"] = params_.max_tokens;
    break;
  case WireAdapter::options: {
    request["stream"] = false;
    ordered_json options;
    options["temperature"] = params_.temperature;
    options["top_p"] = params_.top_p;
    options["top_k"] = params_.top_k;
    options["typical_p"] = params_.typical_p;
    options["repeat_penalty"] = params_.repetition_penalty;
    options["seed"] = params_.seed;
    options["num_predict"] = params_.max_tokens;
    request["options"] = std::move(options);
    break;
  }
  case WireAdapter::hosted:
    request["temperature"] = params_.temperature;
    request["top_p"] = params_.top_p;
    request["seed"] = params_.seed;
    request["max_tokens"] = params_.max_tokens;
    break;
  }
  return request;
}

namespace {

std::string extract_content(const nlohmann::json &response) {
  if (auto choices = response.find("choices"); choices != response.end() && choices->is_array() &&
                                                !choices->empty()) {
    const auto &first = (*choices)[0];
    if (auto msg = first.find("message"); msg != first.end() && msg->contains("content") &&
                                          (*msg)["content"].is_string())
      return (*msg)["content"].get<std::string>();
    if (auto txt = first.find("text"); txt != first.end() && txt->is_string())
      return txt->get<std::string>();
  }
  if (auto msg = response.find("message"); msg != response.end() && msg->is_object() &&
                                           msg->contains("content") && (*msg)["content"].is_string())
    return (*msg)["content"].get<std::string>();
  if (auto txt = response.find("response"); txt != response.end() && txt->is_string())
    return txt->get<std::string>();
  throw NetworkError("response carries no completion text", false);
}

} // namespace

RawCompletion ChatClient::complete(const PromptTemplate &prompt) const {
  const auto endpoint = Endpoint::parse(params_.endpoint_url);
  if (params_.adapter == WireAdapter::hosted)
    log::info("hosted adapter: top_k, typical_p and repetition_penalty are not sent");

  RawCompletion completion;
  completion.prompt_id = prompt.variant_id;
  completion.seed = params_.seed;
  completion.model = params_.model;
  completion.endpoint = endpoint.url();
  completion.request = build_request(prompt);

  Headers headers;
  if (!params_.api_key_env.empty()) {
    if (const char *key = std::getenv(params_.api_key_env.c_str()); key && *key)
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  const HttpClient http(endpoint, std::chrono::seconds(params_.timeout_seconds));
  const auto body = completion.request.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  completion.text = with_retries(retry_, endpoint.url(), [&] {
    const auto response = http.post(body, "application/json", headers);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(response.body);
    } catch (const nlohmann::json::parse_error &) {
      throw NetworkError("response is not JSON", false);
    }
    return extract_content(parsed);
  });
  completion.timestamp = log::utc_timestamp();
  return completion;
}

RawCompletion chat_complete(const GenerationParams &params, const PromptTemplate &prompt) {
  return ChatClient(params).complete(prompt);
}

CorpusAccumulator::CorpusAccumulator(IntentLabel label, std::size_t quota, std::string source)
    : label_(label), quota_(quota), source_(std::move(source)) {
  corpus_.name = std::string(label_name(label));
}

std::size_t CorpusAccumulator::add(const RawCompletion &completion, const PromptTemplate &prompt) {
  const auto report = parse_block(completion.text, prompt.speaker_keyword, prompt.end_keyword);
  if (report.reopened > 0)
    log::debug(prompt.variant_id + ": " + std::to_string(report.reopened) +
               " candidate(s) reopened by a repeated speaker keyword");
  std::size_t added = 0;
  for (const auto &text : report.accepted) {
    if (full())
      break;
    if (!keys_.insert(dedup_key(text)).second)
      continue;
    Utterance u;
    u.text = text;
    u.label = label_;
    u.source = source_;
    u.prompt_id = completion.prompt_id;
    u.seed = completion.seed;
    u.status = UtteranceStatus::raw;
    corpus_.items.push_back(std::move(u));
    ++added;
  }
  return added;
}

GenerationResult generate_label_corpus(IntentLabel label, std::size_t quota, const CompletionFn &complete,
                                       const std::string &source, const GenerationOptions &options) {
  if (quota == 0)
    throw UsageError("quota must be positive");
  const auto variants = variants_for(label);
  if (variants.empty())
    throw UsageError("no prompt variant for label " + std::string(label_name(label)));

  GenerationResult result;
  CorpusAccumulator acc(label, quota, source);
  const auto budget = static_cast<std::size_t>(options.calls_per_variant) * variants.size();
  while (!acc.full() && result.calls < budget) {
    const auto &prompt = variants[result.calls % variants.size()];
    auto completion = complete(prompt);
    ++result.calls;
    if (options.audit)
      options.audit->append(completion);
    acc.add(completion, prompt);
  }
  result.corpus = acc.take();
  if (result.corpus.items.size() < quota) {
    result.budget_exhausted = true;
    result.warning = "budget exhausted for label " + std::string(label_name(label)) + ": " +
                     std::to_string(result.corpus.items.size()) + " of " + std::to_string(quota) +
                     " utterances after " + std::to_string(result.calls) + " calls";
    log::warn(result.warning);
  }
  return result;
}

GenerationResult generate_label_corpus(IntentLabel label, std::size_t quota, const ChatClient &client,
                                       const GenerationOptions &options) {
  return generate_label_corpus(
      label, quota, [&](const PromptTemplate &p) { return client.complete(p); }, client.params().source,
      options);
}

Dataset replay_completions(IntentLabel label, std::size_t quota,
                           const std::vector<RawCompletion> &completions, const std::string &source) {
  CorpusAccumulator acc(label, quota, source);
  const auto variants = variants_for(label);
  for (const auto &completion : completions) {
    if (acc.full())
      break;
    auto it = std::find_if(variants.begin(), variants.end(),
                           [&](const PromptTemplate &t) { return t.variant_id == completion.prompt_id; });
    if (it == variants.end())
      continue;
    acc.add(completion, *it);
  }
  return acc.take();
}

bool CampaignResult::budget_exhausted() const {
  return std::any_of(per_label.begin(), per_label.end(),
                     [](const GenerationResult &r) { return r.budget_exhausted; });
}

CampaignResult generate_campaign(const std::array<std::size_t, kNumLabels> &quotas,
                                 const ChatClient &client, const GenerationOptions &options,
                                 std::string name) {
  std::vector<std::future<GenerationResult>> pending;
  std::vector<IntentLabel> labels;
  for (auto label : kAllLabels) {
    const auto quota = quotas[label_index(label)];
    if (quota == 0)
      continue;
    labels.push_back(label);
    pending.push_back(std::async(std::launch::async, [&, label, quota] {
      return generate_label_corpus(label, quota, client, options);
    }));
  }
  CampaignResult result;
  result.corpus.name = std::move(name);
  for (auto &f : pending) {
    auto r = f.get();
    result.corpus.items.insert(result.corpus.items.end(), r.corpus.items.begin(), r.corpus.items.end());
    result.per_label.push_back(std::move(r));
  }
  return result;
}

} // namespace intentsynth
