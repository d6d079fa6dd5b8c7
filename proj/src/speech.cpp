#include "intentsynth/speech.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "intentsynth/errors.hpp"
#include "intentsynth/log.hpp"

namespace intentsynth {

std::size_t AudioManifest::valid_count() const {
  std::size_t n = 0;
  for (const auto &e : entries)
    n += e.valid() ? 1 : 0;
  return n;
}

void save_manifest(const AudioManifest &manifest, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw DataError("cannot write manifest '" + path.string() + "'");
  for (const auto &e : manifest.entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["audio_path"] = e.audio_path.string();
    j["speaker"] = e.speaker;
    j["reference"] = e.reference;
    j["label"] = label_name(e.label);
    j["failure"] = e.failure ? nlohmann::ordered_json(*e.failure) : nullptr;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  if (!out)
    throw DataError("I/O error while writing '" + path.string() + "'");
}

AudioManifest load_manifest(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open manifest '" + path.string() + "'");
  AudioManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.audio_path = j.value("audio_path", "");
      e.speaker = j.value("speaker", "");
      e.reference = j.at("reference").get<std::string>();
      e.label = parse_label(j.at("label").get<std::string>());
      if (j.contains("failure") && !j["failure"].is_null())
        e.failure = j["failure"].get<std::string>();
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception &) {
      throw DataError(path.string() + ": malformed manifest entry at line " + std::to_string(line_no));
    } catch (const DataError &e) {
      throw DataError(path.string() + ": " + e.what() + " at line " + std::to_string(line_no));
    }
  }
  return m;
}

namespace {

std::string safe_stem(const std::string &name) {
  std::string out;
  for (char c : name)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out.empty() ? "utt" : out;
}

class AuditWriter {
public:
  explicit AuditWriter(const std::optional<std::filesystem::path> &path) {
    if (path) {
      out_.open(*path, std::ios::binary | std::ios::app);
      if (!out_)
        throw DataError("cannot open audit log '" + path->string() + "'");
    }
  }
  void write(const nlohmann::ordered_json &j) {
    if (!out_.is_open())
      return;
    std::lock_guard lock(mutex_);
    out_ << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    out_.flush();
  }

private:
  std::mutex mutex_;
  std::ofstream out_;
};

template <typename Fn> void run_bounded(std::size_t n, std::size_t in_flight, Fn &&fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;)
      fn(i);
  };
  const auto workers = std::min(std::max<std::size_t>(in_flight, 1), n);
  if (workers <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back(worker);
}

} // namespace

AudioManifest synthesize_speech(const Dataset &dataset, const std::vector<std::string> &speakers,
                                const std::string &tts_url, const std::filesystem::path &audio_dir,
                                const SpeechServiceOptions &options) {
  if (speakers.empty())
    throw ConfigError("speech synthesis needs at least one speaker reference");
  const HttpClient http(Endpoint::parse(tts_url), options.timeout);
  std::filesystem::create_directories(audio_dir);
  AuditWriter audit(options.audit_log);

  AudioManifest manifest;
  manifest.entries.resize(dataset.items.size());
  const auto stem = safe_stem(dataset.name);
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    auto &e = manifest.entries[i];
    char idx[16];
    std::snprintf(idx, sizeof(idx), "%06zu", i);
    e.id = stem + "-" + idx;
    e.speaker = speakers[i % speakers.size()];
    e.reference = dataset.items[i].text;
    e.label = dataset.items[i].label;
  }

  run_bounded(manifest.entries.size(), options.max_in_flight, [&](std::size_t i) {
    auto &e = manifest.entries[i];
    nlohmann::ordered_json request;
    request["text"] = e.reference;
    request["speaker_ref"] = e.speaker;
    request["language"] = "de";
    nlohmann::ordered_json record;
    record["id"] = e.id;
    record["endpoint"] = http.endpoint().url();
    record["request"] = request;
    record["timestamp"] = log::utc_timestamp();
    try {
      const auto body = request.dump();
      const auto response = with_retries(options.retry, http.endpoint().url(),
                                         [&] { return http.post(body, "application/json"); });
      if (response.body.empty())
        throw DataError("empty audio response");
      const auto path = audio_dir / (e.id + ".wav");
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(response.body.data(), static_cast<std::streamsize>(response.body.size()));
      if (!out)
        throw DataError("cannot write '" + path.string() + "'");
      e.audio_path = path;
      record["response"] = {{"status", response.status}, {"bytes", response.body.size()}};
    } catch (const std::exception &ex) {
      e.failure = ex.what();
      record["error"] = ex.what();
      log::warn("synthesis failed for " + e.id + ": " + ex.what());
    }
    audit.write(record);
  });
  return manifest;
}

TranscriptionResult transcribe(const AudioManifest &manifest, const std::string &asr_url,
                               const SpeechServiceOptions &options) {
  const HttpClient http(Endpoint::parse(asr_url), options.timeout);
  AuditWriter audit(options.audit_log);

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].valid())
      todo.push_back(i);
  }
  std::vector<std::optional<std::string>> texts(todo.size()), errors(todo.size());

  run_bounded(todo.size(), options.max_in_flight, [&](std::size_t k) {
    const auto &e = manifest.entries[todo[k]];
    nlohmann::ordered_json record;
    record["id"] = e.id;
    record["endpoint"] = http.endpoint().url();
    record["timestamp"] = log::utc_timestamp();
    try {
      std::ifstream in(e.audio_path, std::ios::binary);
      if (!in)
        throw DataError("audio file '" + e.audio_path.string() + "' is missing");
      const std::string audio((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      record["request"] = {{"file", e.audio_path.filename().string()}, {"bytes", audio.size()}, {"language", "de"}};
      const std::vector<MultipartField> fields = {
          {"file", audio, e.audio_path.filename().string(), "audio/wav"},
          {"language", "de", "", ""},
      };
      const auto response =
          with_retries(options.retry, http.endpoint().url(), [&] { return http.post_multipart(fields); });
      record["response"] = {{"status", response.status}, {"body", response.body}};
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(response.body);
      } catch (const nlohmann::json::parse_error &) {
        throw DataError("transcription response is not JSON");
      }
      if (!parsed.contains("text") || !parsed["text"].is_string())
        throw DataError("transcription response has no 'text'");
      texts[k] = parsed["text"].get<std::string>();
    } catch (const std::exception &ex) {
      errors[k] = ex.what();
      record["error"] = ex.what();
      log::warn("transcription failed for " + e.id + ": " + ex.what());
    }
    audit.write(record);
  });

  TranscriptionResult result;
  for (std::size_t k = 0; k < todo.size(); ++k) {
    const auto &id = manifest.entries[todo[k]].id;
    if (texts[k])
      result.transcripts[id] = *texts[k];
    else
      result.failures[id] = errors[k].value_or("unknown error");
  }
  return result;
}

void save_transcripts(const std::map<std::string, std::string> &transcripts, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw DataError("cannot write transcripts '" + path.string() + "'");
  for (const auto &[id, text] : transcripts) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["text"] = text;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

std::map<std::string, std::string> load_transcripts(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open transcripts '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out[j.at("id").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception &) {
      throw DataError(path.string() + ": malformed transcript at line " + std::to_string(line_no));
    }
  }
  return out;
}

SpeechEvalResult speech_eval(const AudioManifest &manifest, const std::map<std::string, std::string> &transcripts,
                             const Classifier &classifier, const TextNorm &norm) {
  std::vector<Utterance> items;
  std::vector<IntentLabel> golds;
  CorpusErrorRate wer("word", norm.name), cer("char", norm.name);
  for (const auto &e : manifest.entries) {
    if (!e.valid())
      continue;
    const auto it = transcripts.find(e.id);
    if (it == transcripts.end())
      throw DataError("no transcript for manifest entry '" + e.id + "'");
    wer.add(word_error_rate(e.reference, it->second, norm));
    cer.add(char_error_rate(e.reference, it->second, norm));
    Utterance u;
    u.text = it->second;
    u.label = e.label;
    items.push_back(std::move(u));
    golds.push_back(e.label);
  }
  if (items.empty())
    throw DataError("speech evaluation needs at least one valid manifest entry");

  const auto preds = classifier.predict(items);
  SpeechEvalResult r;
  r.accuracy = accuracy(preds, golds);
  r.confusion = confusion(preds, golds);
  r.wer = wer.result();
  r.cer = cer.result();
  r.evaluated = items.size();
  return r;
}

} // namespace intentsynth
