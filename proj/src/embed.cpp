#include "intentsynth/embed.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "intentsynth/errors.hpp"
#include "intentsynth/text.hpp"

namespace intentsynth {

EmbeddingVector EmbeddingProvider::embed(const std::string &text) const {
  return embed_batch(std::span<const std::string>(&text, 1)).front();
}

namespace {

bool is_punct(char32_t c) {
  if (c < 0x80)
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  switch (c) {
  case 0xA1:
  case 0xAB:
  case 0xB7:
  case 0xBB:
  case 0xBF:
    return true;
  default:
    return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E);
  }
}

void check_texts(std::span<const std::string> texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty())
      throw UsageError("embed_batch: text " + std::to_string(i) + " is empty");
  }
}

} // namespace

std::vector<std::string> bow_tokens(std::string_view input) {
  auto cps = text::decode_utf8(input);
  std::u32string kept;
  kept.reserve(cps.size());
  for (char32_t c : cps) {
    if (!is_punct(c))
      kept.push_back(text::fold_char(c));
  }
  return text::split_whitespace(text::encode_utf8(kept));
}

std::size_t bow_bucket(std::string_view token, std::size_t dim) {
  return static_cast<std::size_t>(text::fnv1a64(token) % dim);
}

EmbeddingVector hash_bow(std::string_view input, std::size_t dim) {
  if (dim < 8)
    throw UsageError("hash_bow: dim must be at least 8");
  EmbeddingVector v;
  v.values.assign(dim, 0.0);
  v.provider_id = "hashed_bow-fnv1a64-d" + std::to_string(dim);
  for (const auto &token : bow_tokens(input))
    v.values[bow_bucket(token, dim)] += 1.0;
  double norm = 0.0;
  for (double x : v.values)
    norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double &x : v.values)
      x /= norm;
  }
  return v;
}

HashedBowProvider::HashedBowProvider(std::size_t dim)
    : dim_(dim), id_("hashed_bow-fnv1a64-d" + std::to_string(dim)) {
  if (dim < 8)
    throw UsageError("hashed_bow: dim must be at least 8");
}

std::vector<EmbeddingVector> HashedBowProvider::embed_batch(std::span<const std::string> texts) const {
  check_texts(texts);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto &t : texts)
    out.push_back(hash_bow(t, dim_));
  return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string url, std::size_t dim, std::string provider_id,
                                                 RemoteEmbeddingOptions options)
    : endpoint_(Endpoint::parse(url)), dim_(dim), id_(std::move(provider_id)), options_(options) {
  if (dim_ == 0)
    throw ConfigError("remote embedding dim must be positive");
  if (options_.max_in_flight == 0)
    options_.max_in_flight = 1;
  if (options_.chunk_size == 0)
    options_.chunk_size = 1;
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_chunk(std::span<const std::string> texts) const {
  nlohmann::json request;
  request["texts"] = nlohmann::json::array();
  for (const auto &t : texts)
    request["texts"].push_back(t);
  const HttpClient http(endpoint_, options_.timeout);
  const auto body = request.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
  const auto response =
      with_retries(options_.retry, endpoint_.url(), [&] { return http.post(body, "application/json"); });

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(response.body);
  } catch (const nlohmann::json::parse_error &) {
    throw DataError(endpoint_.url() + ": embedding response is not JSON");
  }
  const auto it = parsed.find("vectors");
  if (it == parsed.end() || !it->is_array())
    throw DataError(endpoint_.url() + ": embedding response has no 'vectors' array");
  if (it->size() != texts.size())
    throw DataError(endpoint_.url() + ": expected " + std::to_string(texts.size()) + " vectors, got " +
                    std::to_string(it->size()));
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto &row : *it) {
    if (!row.is_array() || row.size() != dim_)
      throw DataError(endpoint_.url() + ": dimension mismatch (provider dim " + std::to_string(dim_) +
                      ", response dim " + std::to_string(row.is_array() ? row.size() : 0) + ")");
    EmbeddingVector v;
    v.provider_id = id_;
    v.values.reserve(dim_);
    for (const auto &x : row) {
      if (!x.is_number() || !std::isfinite(x.get<double>()))
        throw DataError(endpoint_.url() + ": non-finite embedding value");
      v.values.push_back(x.get<double>());
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  check_texts(texts);
  const std::size_t chunk = options_.chunk_size;
  const std::size_t n_chunks = (texts.size() + chunk - 1) / chunk;
  std::vector<std::vector<EmbeddingVector>> results(n_chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const auto c = next.fetch_add(1);
      if (c >= n_chunks)
        return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure)
          return;
      }
      try {
        const auto begin = c * chunk;
        results[c] = embed_chunk(texts.subspan(begin, std::min(chunk, texts.size() - begin)));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
      }
    }
  };

  const auto n_workers = std::min(options_.max_in_flight, n_chunks);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w)
      pool.emplace_back(worker);
  }
  if (failure)
    std::rethrow_exception(failure);

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto &r : results)
    for (auto &v : r)
      out.push_back(std::move(v));
  return out;
}

} // namespace intentsynth
