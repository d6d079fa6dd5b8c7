#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intentsynth/http.hpp"

namespace intentsynth {

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector &) const = default;
};

enum class ProviderKind { remote, hashed_bow };

// A frozen sentence encoder. Identical text must always map to an identical vector.
class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;

  virtual const std::string &provider_id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual ProviderKind kind() const = 0;

  // One vector per text, in order. Throws UsageError on an empty text.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const = 0;

  EmbeddingVector embed(const std::string &text) const;
};

// Lowercase, drop punctuation, split on whitespace.
std::vector<std::string> bow_tokens(std::string_view text);

std::size_t bow_bucket(std::string_view token, std::size_t dim);

// Token counts hashed into `dim` buckets (FNV-1a 64, bucket = hash mod dim),
// then L2-normalized; no tokens gives the zero vector. Requires dim >= 8.
EmbeddingVector hash_bow(std::string_view text, std::size_t dim);

class HashedBowProvider final : public EmbeddingProvider {
public:
  explicit HashedBowProvider(std::size_t dim);

  const std::string &provider_id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  ProviderKind kind() const override { return ProviderKind::hashed_bow; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

private:
  std::size_t dim_;
  std::string id_;
};

struct RemoteEmbeddingOptions {
  std::size_t max_in_flight = 4;
  std::size_t chunk_size = 64;
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
};

// POST {"texts": [...]} -> {"vectors": [[...], ...]}. The encoder runs out of process.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
  RemoteEmbeddingProvider(std::string url, std::size_t dim, std::string provider_id,
                          RemoteEmbeddingOptions options = {});

  const std::string &provider_id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  ProviderKind kind() const override { return ProviderKind::remote; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

private:
  std::vector<EmbeddingVector> embed_chunk(std::span<const std::string> texts) const;

  Endpoint endpoint_;
  std::size_t dim_;
  std::string id_;
  RemoteEmbeddingOptions options_;
};

} // namespace intentsynth
