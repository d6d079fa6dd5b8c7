#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "intentsynth/config.hpp"
#include "intentsynth/errors.hpp"

using namespace intentsynth;

TEST_CASE("toml subset") {
  const auto t = parse_toml(R"(
# comment
top = 1
[generation]
endpoint = "http://x/v1"   # trailing comment
temperature = 0.5
[split]
ratios = [0.8, 0.1, 0.1]
[harness]
diagonal_uses_test_split = false
[a.b]
name = "tab\there \"quoted\""
)");
  CHECK(std::get<std::int64_t>(t.at("top").value) == 1);
  CHECK(std::get<std::string>(t.at("generation.endpoint").value) == "http://x/v1");
  CHECK(std::get<double>(t.at("generation.temperature").value) == 0.5);
  CHECK(t.at("generation.temperature").line == 6);
  CHECK(toml_to_text(t.at("split.ratios")) == "0.8,0.1,0.1");
  CHECK(std::get<bool>(t.at("harness.diagonal_uses_test_split").value) == false);
  CHECK(std::get<std::string>(t.at("a.b.name").value) == "tab\there \"quoted\"");

  CHECK_THROWS_WITH_AS((void)parse_toml("x = \n", "f.toml"), doctest::Contains("f.toml:1"), ConfigError);
  CHECK_THROWS_AS((void)parse_toml("[open\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_toml("x = \"unterminated\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_toml("x = 1 2\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_toml("x = 1\nx = 2\n"), ConfigError);
  CHECK_THROWS_AS((void)load_toml("/nonexistent/cfg.toml"), ConfigError);
}

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.get_real("generation.temperature") == 0.7);
  CHECK(c.get_real("generation.top_p") == 1.0);
  CHECK(c.get_int("generation.top_k") == 10000);
  CHECK(c.get_real("generation.typical_p") == 0.995);
  CHECK(c.get_real("generation.repetition_penalty") == 1.0);
  CHECK(c.get_string("generation.api_key_env") == "INTENTSYNTH_API_KEY");
  CHECK(c.get_int("quotas.total") == 2500);
  CHECK(c.get_real_list("split.ratios") == std::vector<double>{0.7, 0.2, 0.1});
  CHECK(c.get_int("train.epochs") == 5);
  CHECK(c.get_int("harness.runs") == 5);
  CHECK(c.entry("train.epochs").source == ValueSource::default_value);
}

TEST_CASE("precedence: flag over env over file over default") {
  testing::TempDir tmp;
  std::ofstream(tmp / "c.toml") << "[train]\nepochs = 7\nseed = 3\nlearning_rate = 0.001\n";
  const std::map<std::string, std::string> env = {{"INTENTSYNTH_TRAIN_EPOCHS", "9"},
                                                  {"INTENTSYNTH_TRAIN_SEED", "4"}};
  auto getenv = [&](const std::string &k) -> std::optional<std::string> {
    const auto it = env.find(k);
    return it == env.end() ? std::nullopt : std::optional(it->second);
  };

  RunConfig c;
  c.apply_file(tmp / "c.toml");
  c.apply_env(getenv);
  c.set_flag("train.epochs", "11", "--epochs");
  CHECK(c.get_int("train.epochs") == 11);
  CHECK(c.entry("train.epochs").source == ValueSource::flag);
  CHECK(c.get_int("train.seed") == 4);
  CHECK(c.entry("train.seed").origin == "INTENTSYNTH_TRAIN_SEED");
  CHECK(c.get_real("train.learning_rate") == 0.001);
  CHECK(c.entry("train.learning_rate").origin.ends_with("c.toml:4"));

  // order of application does not matter
  RunConfig d;
  d.set_flag("train.epochs", "11", "--epochs");
  d.apply_env(getenv);
  d.apply_file(tmp / "c.toml");
  CHECK(d.get_int("train.epochs") == 11);
  CHECK(d.get_int("train.seed") == 4);
}

TEST_CASE("validation") {
  RunConfig c;
  CHECK_THROWS_WITH_AS(c.set_flag("train.epoch", "3", "--set"), doctest::Contains("unknown config key"), ConfigError);
  CHECK_THROWS_AS(c.set_flag("train.epochs", "many", "--epochs"), ConfigError);
  CHECK_THROWS_AS(c.set_flag("harness.diagonal_uses_test_split", "yes", "--set"), ConfigError);
  CHECK_THROWS_AS(c.set_flag("split.ratios", "0.7,x", "--set"), ConfigError);
  CHECK_THROWS_AS(c.apply_file(parse_toml("[bogus]\nkey = 1\n"), "f.toml"), ConfigError);
  CHECK_THROWS_AS((void)c.entry("nope"), ConfigError);
}

TEST_CASE("env variable names") {
  CHECK(env_var_for("generation.endpoint") == "INTENTSYNTH_GENERATION_ENDPOINT");
  CHECK(env_var_for("train.learning_rate") == "INTENTSYNTH_TRAIN_LEARNING_RATE");
}

TEST_CASE("show") {
  RunConfig c;
  c.set_flag("train.epochs", "2", "--epochs");
  const auto s = c.show();
  CHECK(s.find("train.epochs = \"2\"  # flag (--epochs)\n") != std::string::npos);
  CHECK(s.find("train.seed = \"0\"  # default\n") != std::string::npos);
  CHECK(s.find("embed.dim") < s.find("train.epochs"));
}

TEST_CASE("split_list") {
  CHECK(split_list("a,b , c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_list("").empty());
  CHECK(split_list(" x ") == std::vector<std::string>{"x"});
}
