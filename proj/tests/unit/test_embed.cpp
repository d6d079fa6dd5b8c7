#include <doctest.h>

#include <cmath>

#include "intentsynth/embed.hpp"
#include "intentsynth/errors.hpp"
#include "intentsynth/harness.hpp"
#include "intentsynth/text.hpp"
#include "mock_server.hpp"

using namespace intentsynth;
using intentsynth::testing::MockServer;

namespace {

double norm2(const EmbeddingVector &v) {
  double s = 0;
  for (double x : v.values)
    s += x * x;
  return std::sqrt(s);
}

// Vector i carries the sentinel index in its first component.
MockServer sentinel_server(std::size_t dim) {
  return MockServer([dim](const httplib::Request &req, httplib::Response &res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json vectors = nlohmann::json::array();
    for (const auto &t : body["texts"]) {
      std::vector<double> v(dim, 0.0);
      v[0] = std::stod(t.get<std::string>().substr(1));
      vectors.push_back(v);
    }
    res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
  });
}

} // namespace

TEST_CASE("hash_bow") {
  SUBCASE("deterministic") {
    HashedBowProvider p(64);
    const std::vector<std::string> texts = {"Hilfe"};
    CHECK(p.embed_batch(texts) == p.embed_batch(texts));
    CHECK(p.provider_id() == "hashed_bow-fnv1a64-d64");
  }

  SUBCASE("empty text gives the zero vector") {
    const auto v = hash_bow("", 64);
    CHECK(v.dim() == 64);
    CHECK(norm2(v) == 0.0);
  }

  SUBCASE("unit length, counts per bucket") {
    const auto v = hash_bow("licht licht an", 64);
    CHECK(norm2(v) == doctest::Approx(1.0));
    const auto licht = bow_bucket("licht", 64);
    const auto an = bow_bucket("an", 64);
    REQUIRE(licht != an);
    CHECK(v.values[licht] == doctest::Approx(2.0 / std::sqrt(5.0)));
    CHECK(v.values[an] == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(bow_bucket("licht", 64) == text::fnv1a64("licht") % 64);
  }

  SUBCASE("case and punctuation do not matter") {
    CHECK(hash_bow("Licht an!", 128) == hash_bow("licht AN", 128));
    CHECK(bow_tokens("Mach, das Licht an.") == std::vector<std::string>{"mach", "das", "licht", "an"});
  }

  SUBCASE("dimension floor") {
    CHECK_THROWS_AS((void)hash_bow("x", 4), UsageError);
  }

  SUBCASE("providers reject empty texts") {
    HashedBowProvider p(16);
    const std::vector<std::string> texts = {"a", ""};
    CHECK_THROWS_AS((void)p.embed_batch(texts), UsageError);
  }
}

TEST_CASE("remote embedding provider") {
  SUBCASE("order is preserved across chunks and workers") {
    auto server = sentinel_server(16);
    RemoteEmbeddingOptions opts;
    opts.chunk_size = 7;
    opts.max_in_flight = 3;
    RemoteEmbeddingProvider p(server.url("/embed"), 16, "mock-lm", opts);
    std::vector<std::string> texts;
    for (int i = 0; i < 50; ++i)
      texts.push_back("s" + std::to_string(i));
    const auto vs = p.embed_batch(texts);
    REQUIRE(vs.size() == 50);
    for (int i = 0; i < 50; ++i) {
      CHECK(vs[i].values[0] == i);
      CHECK(vs[i].provider_id == "mock-lm");
    }
    CHECK(server.count() == 8);
  }

  SUBCASE("a dimension mismatch is an error") {
    auto server = sentinel_server(8);
    RemoteEmbeddingProvider p(server.url(), 16, "mock-lm");
    const std::vector<std::string> texts = {"s1"};
    CHECK_THROWS_WITH_AS((void)p.embed_batch(texts), doctest::Contains("dimension mismatch"), DataError);
  }

  SUBCASE("the caching wrapper asks once per distinct text") {
    auto server = sentinel_server(8);
    auto inner = std::make_shared<RemoteEmbeddingProvider>(server.url(), 8, "mock-lm");
    CachingEmbeddingProvider cached(inner);
    const std::vector<std::string> texts = {"s1", "s2", "s1"};
    const auto first = cached.embed_batch(texts);
    const auto second = cached.embed_batch(texts);
    CHECK(first == second);
    CHECK(first[0] == first[2]);
    CHECK(server.count() == 1);
    CHECK(cached.provider_id() == "mock-lm");
  }
}
