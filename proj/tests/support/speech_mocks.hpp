#pragma once

#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "intentsynth/speech.hpp"
#include "mock_server.hpp"

namespace intentsynth::testing {

inline const std::string kFakeWav = std::string("RIFF\x24\0\0\0WAVEfmt ", 16) + "fixed-bytes";

// TTS that answers every request with the same bytes.
inline MockServer fixed_bytes_tts() {
  return MockServer([](const httplib::Request &, httplib::Response &res) {
    res.set_content(kFakeWav, "audio/wav");
  });
}

// References by manifest id; the ASR mock recovers the id from the uploaded
// filename ("<id>.wav").
using References = std::shared_ptr<std::map<std::string, std::string>>;

inline References references_of(const AudioManifest &manifest) {
  auto refs = std::make_shared<std::map<std::string, std::string>>();
  for (const auto &e : manifest.entries)
    (*refs)[e.id] = e.reference;
  return refs;
}

// Returns the reference, passed through `transform`.
template <typename Transform> MockServer lookup_asr(References refs, Transform transform) {
  return MockServer([refs, transform](const httplib::Request &req, httplib::Response &res) {
    if (!req.has_file("file")) {
      res.status = 400;
      return;
    }
    auto id = req.get_file_value("file").filename;
    if (id.size() > 4 && id.ends_with(".wav"))
      id.resize(id.size() - 4);
    const auto it = refs->find(id);
    if (it == refs->end()) {
      res.status = 404;
      return;
    }
    res.set_content(nlohmann::json{{"text", transform(it->second)}}.dump(), "application/json");
  });
}

inline MockServer echo_asr(References refs) {
  return lookup_asr(std::move(refs), [](const std::string &s) { return s; });
}

// Drops the first whitespace-separated word.
inline std::string drop_first_word(const std::string &s) {
  std::istringstream in(s);
  std::string w, out;
  bool first = true;
  while (in >> w) {
    if (first) {
      first = false;
      continue;
    }
    out += (out.empty() ? "" : " ") + w;
  }
  return out;
}

inline MockServer word_drop_asr(References refs) { return lookup_asr(std::move(refs), drop_first_word); }

} // namespace intentsynth::testing
