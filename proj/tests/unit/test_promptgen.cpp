#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "intentsynth/errors.hpp"
#include "intentsynth/promptgen.hpp"
#include "mock_server.hpp"

using namespace intentsynth;
using intentsynth::testing::MockServer;

namespace {

GenerationParams params_for(const std::string &url, WireAdapter adapter = WireAdapter::openai) {
  GenerationParams p;
  p.endpoint_url = url;
  p.model = "mock-llm";
  p.adapter = adapter;
  p.seed = 12345;
  p.api_key_env = "INTENTSYNTH_TEST_KEY";
  return p;
}

std::string block(const std::vector<std::string> &utts) {
  std::string out = "Hier sind die Sätze:\n";
  for (const auto &u : utts)
    out += "Ältere_Person: " + u + " NÄCHSTES\n";
  return out;
}

const RetryPolicy kFast{3, std::chrono::milliseconds(1)};

} // namespace

TEST_CASE("catalog covers every label with stable variant ids") {
  std::set<std::string> ids;
  for (const auto &t : catalog()) {
    CHECK(ids.insert(t.variant_id).second);
    CHECK(t.variant_id.rfind(std::string(label_name(t.label)) + "/", 0) == 0);
    CHECK(t.render().find("Ältere_Person:") != std::string::npos);
    CHECK(t.render().find("NÄCHSTES") != std::string::npos);
  }
  for (auto l : kAllLabels)
    CHECK_FALSE(variants_for(l).empty());
  CHECK(ids.count("help/full"));
  CHECK(ids.count("help/short"));
  CHECK(ids.count("no_command/help_fp"));
  CHECK(ids.count("no_command/roll_fp"));
  CHECK(ids.count("no_command/light_fp"));
  CHECK(variants_for(IntentLabel::no_command).size() == 3);
}

TEST_CASE("render substitutes keywords and batch size") {
  auto t = variants_for(IntentLabel::light_on).front();
  t.speaker_keyword = "Sprecher:";
  t.end_keyword = "ENDE";
  t.batch_size_requested = 20;
  const auto text = t.render();
  CHECK(text.find("Sprecher:") != std::string::npos);
  CHECK(text.find("ENDE") != std::string::npos);
  CHECK(text.find("Ältere_Person:") == std::string::npos);
  CHECK(text.find("Generieren Sie 20 ") != std::string::npos);
}

TEST_CASE("draw_seed") {
  std::uint64_t a = 0, b = 0;
  const auto s1 = draw_seed(a);
  CHECK(s1 == draw_seed(b));
  CHECK(a == b);
  CHECK(a != 0);
  std::uint64_t state = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = draw_seed(state);
    CHECK(s > 0);
    CHECK(s < kSeedUpperBound);
  }
}

TEST_CASE("request bodies per wire adapter") {
  const auto prompt = variants_for(IntentLabel::help).front();

  SUBCASE("openai carries every control at top level") {
    const auto j = ChatClient(params_for("http://localhost:1/v1/chat/completions")).build_request(prompt);
    CHECK(j["model"] == "mock-llm");
    CHECK(j["messages"][0]["role"] == "user");
    CHECK(j["messages"][0]["content"] == prompt.render());
    CHECK(j["top_p"] == 1.0);
    CHECK(j["top_k"] == 10000);
    CHECK(j["repetition_penalty"] == 1.0);
    CHECK(j["typical_p"] == 0.995);
    CHECK(j["temperature"] == 0.7);
    CHECK(j["seed"] == 12345);
  }

  SUBCASE("options nests the controls") {
    const auto j = ChatClient(params_for("http://localhost:1/api/chat", WireAdapter::options)).build_request(prompt);
    CHECK(j["stream"] == false);
    CHECK(j["options"]["repeat_penalty"] == 1.0);
    CHECK(j["options"]["top_k"] == 10000);
    CHECK(j["options"]["typical_p"] == 0.995);
    CHECK_FALSE(j.contains("top_k"));
  }

  SUBCASE("hosted drops unsupported controls") {
    const auto j = ChatClient(params_for("http://localhost:1/", WireAdapter::hosted)).build_request(prompt);
    CHECK(j.contains("top_p"));
    CHECK(j.contains("seed"));
    CHECK_FALSE(j.contains("top_k"));
    CHECK_FALSE(j.contains("typical_p"));
    CHECK_FALSE(j.contains("repetition_penalty"));
  }
}

TEST_CASE("parameter validation") {
  auto p = params_for("http://localhost:1/");
  CHECK_NOTHROW(p.validate());
  p.top_p = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = params_for("http://localhost:1/");
  p.model.clear();
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = params_for("ftp://example");
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(parse_adapter("grpc"), ConfigError);
}

TEST_CASE("chat completion against a mock endpoint") {
  const std::string canned = block({"Hilfe, ich bin gestürzt", "Ich kann nicht aufstehen"});
  MockServer server([&](const httplib::Request &, httplib::Response &res) {
    res.set_content(testing::chat_response(canned), "application/json");
  });
  const auto prompt = variants_for(IntentLabel::help).front();

  SUBCASE("echo fixture") {
    const auto c = ChatClient(params_for(server.url("/v1/chat/completions"))).complete(prompt);
    CHECK(c.text == canned);
    CHECK(c.prompt_id == "help/full");
    CHECK(c.seed == 12345);
    CHECK(c.model == "mock-llm");
    CHECK_FALSE(c.timestamp.empty());
    REQUIRE(server.count() == 1);
    CHECK(server.requests()[0].path == "/v1/chat/completions");
  }

  SUBCASE("the key travels in a header and never into the audit log") {
    setenv("INTENTSYNTH_TEST_KEY", "sk-test-secret-value", 1);
    testing::TempDir tmp;
    {
      AuditLog audit(tmp / "audit.jsonl");
      audit.append(ChatClient(params_for(server.url())).complete(prompt));
    }
    unsetenv("INTENTSYNTH_TEST_KEY");
    REQUIRE(server.count() == 1);
    CHECK(server.requests()[0].get_header_value("Authorization") == "Bearer sk-test-secret-value");
    CHECK(server.bodies()[0].find("sk-test-secret-value") == std::string::npos);
    std::ifstream in(tmp / "audit.jsonl");
    const std::string audit_text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(audit_text.find("sk-test-secret-value") == std::string::npos);
    CHECK(audit_text.find("help/full") != std::string::npos);
  }

  SUBCASE("ollama-style response bodies are understood") {
    MockServer ollama([&](const httplib::Request &, httplib::Response &res) {
      res.set_content(nlohmann::json{{"message", {{"role", "assistant"}, {"content", canned}}}}.dump(),
                      "application/json");
    });
    const auto c = ChatClient(params_for(ollama.url("/api/chat"), WireAdapter::options)).complete(prompt);
    CHECK(c.text == canned);
  }
}

TEST_CASE("server errors are retried three times") {
  MockServer server([](const httplib::Request &, httplib::Response &res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  const auto prompt = variants_for(IntentLabel::help).front();
  try {
    (void)ChatClient(params_for(server.url("/v1/chat")), kFast).complete(prompt);
    FAIL("expected a NetworkError");
  } catch (const NetworkError &e) {
    CHECK(std::string(e.what()).find(server.url("/v1/chat")) != std::string::npos);
    CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
  }
  CHECK(server.count() == 3);
}

TEST_CASE("client errors are not retried") {
  MockServer server([](const httplib::Request &, httplib::Response &res) {
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  CHECK_THROWS_AS((void)ChatClient(params_for(server.url()), kFast).complete(variants_for(IntentLabel::help)[0]),
                  NetworkError);
  CHECK(server.count() == 1);
}

TEST_CASE("rate limiting is retried") {
  std::atomic<int> calls{0};
  MockServer server([&](const httplib::Request &, httplib::Response &res) {
    if (calls++ == 0) {
      res.status = 429;
      return;
    }
    res.set_content(testing::chat_response(block({"Hilfe"})), "application/json");
  });
  const auto c = ChatClient(params_for(server.url()), kFast).complete(variants_for(IntentLabel::help)[0]);
  CHECK(c.text.find("Hilfe") != std::string::npos);
  CHECK(server.count() == 2);
}

TEST_CASE("generation loop") {
  SUBCASE("ideal mock fills the quota in one call") {
    int n = 0;
    auto complete = [&](const PromptTemplate &p) {
      std::vector<std::string> utts;
      for (int i = 0; i < 10; ++i)
        utts.push_back("Satz " + std::to_string(n * 10 + i));
      ++n;
      RawCompletion c;
      c.prompt_id = p.variant_id;
      c.seed = 7;
      c.text = block(utts);
      return c;
    };
    const auto r = generate_label_corpus(IntentLabel::light_on, 10, complete, "mock");
    CHECK(r.corpus.size() == 10);
    CHECK(r.calls == 1);
    CHECK_FALSE(r.budget_exhausted);
    for (const auto &u : r.corpus.items) {
      CHECK(u.label == IntentLabel::light_on);
      CHECK(u.seed == 7u);
      CHECK(u.source == "mock");
      CHECK(u.prompt_id == "light_on/std");
    }
  }

  SUBCASE("constant output exhausts the budget") {
    auto complete = [](const PromptTemplate &p) {
      RawCompletion c;
      c.prompt_id = p.variant_id;
      c.text = block(std::vector<std::string>(10, "Licht an"));
      return c;
    };
    GenerationOptions opts;
    opts.calls_per_variant = 4;
    const auto r = generate_label_corpus(IntentLabel::light_on, 10, complete, "mock", opts);
    CHECK(r.budget_exhausted);
    CHECK(r.corpus.size() == 1);
    CHECK(r.calls == 4);
    CHECK(r.warning.find("light_on") != std::string::npos);
  }

  SUBCASE("variants rotate round-robin") {
    std::vector<std::string> seen;
    auto complete = [&](const PromptTemplate &p) {
      seen.push_back(p.variant_id);
      RawCompletion c;
      c.prompt_id = p.variant_id;
      c.text = block({"Etwas " + std::to_string(seen.size())});
      return c;
    };
    (void)generate_label_corpus(IntentLabel::no_command, 4, complete, "mock");
    CHECK(seen == std::vector<std::string>{"no_command/help_fp", "no_command/roll_fp", "no_command/light_fp",
                                           "no_command/help_fp"});
  }

  SUBCASE("overshoot is truncated to the quota") {
    auto complete = [](const PromptTemplate &p) {
      RawCompletion c;
      c.prompt_id = p.variant_id;
      c.text = block({"a", "b", "c", "d", "e"});
      return c;
    };
    CHECK(generate_label_corpus(IntentLabel::help, 3, complete, "mock").corpus.size() == 3);
  }
}

TEST_CASE("audit log replay reproduces the corpus") {
  testing::TempDir tmp;
  int n = 0;
  auto complete = [&](const PromptTemplate &p) {
    RawCompletion c;
    c.prompt_id = p.variant_id;
    c.seed = 99;
    c.text = block({"Rollo hoch " + std::to_string(n), "Rollo hoch " + std::to_string(n + 1), "Rollo hoch 0"});
    n += 2;
    return c;
  };
  Dataset original;
  {
    AuditLog audit(tmp / "audit.jsonl");
    GenerationOptions opts;
    opts.audit = &audit;
    original = generate_label_corpus(IntentLabel::roll_up, 7, complete, "mock", opts).corpus;
  }
  const auto completions = load_audit_log(tmp / "audit.jsonl");
  CHECK(completions.size() == 4);
  CHECK(replay_completions(IntentLabel::roll_up, 7, completions, "mock") == original);
}

TEST_CASE("campaign over a mock endpoint") {
  std::atomic<int> counter{0};
  MockServer server([&](const httplib::Request &, httplib::Response &res) {
    std::vector<std::string> utts;
    for (int i = 0; i < 10; ++i)
      utts.push_back("Satz Nummer " + std::to_string(counter++));
    res.set_content(testing::chat_response(block(utts)), "application/json");
  });
  const ChatClient client(params_for(server.url()), kFast);
  const auto r = generate_campaign(balanced_quotas(60), client, {}, "campaign");
  CHECK_FALSE(r.budget_exhausted());
  CHECK(r.corpus.name == "campaign");
  CHECK(r.corpus.size() == 60);
  for (auto n : r.corpus.label_counts())
    CHECK(n == 10);
  for (const auto &body : server.bodies())
    CHECK(nlohmann::json::parse(body)["seed"] == 12345);
}
