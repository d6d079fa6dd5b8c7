#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "intentsynth/corpus.hpp"

using namespace intentsynth;

namespace {

struct Run {
  int status = -1;
  std::string output; // stdout and stderr interleaved
};

Run run_cli(const std::string &args, const std::string &env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" INTENTSYNTH_CLI "\" " + args + " 2>&1";
  Run r;
  FILE *pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0)
    r.output.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string q(const std::filesystem::path &p) { return "\"" + p.string() + "\""; }

} // namespace

TEST_CASE("wer on identical files") {
  testing::TempDir tmp;
  std::ofstream(tmp / "ref.txt") << "Mach das Licht an\nHilfe\n";
  std::ofstream(tmp / "hyp.txt") << "mach das licht an\nhilfe\n";
  const auto r = run_cli("wer --ref " + q(tmp / "ref.txt") + " --hyp " + q(tmp / "hyp.txt"));
  CHECK(r.status == 0);
  CHECK(r.output.find("WER 0.00% CER 0.00%") != std::string::npos);

  std::ofstream(tmp / "short.txt") << "hilfe\n";
  CHECK(run_cli("wer --ref " + q(tmp / "ref.txt") + " --hyp " + q(tmp / "short.txt")).status == 5);
}

TEST_CASE("split is reproducible") {
  testing::TempDir tmp;
  const auto vocab = testing::class_vocabularies(8, 256, 1);
  save_dataset(testing::keyword_corpus(vocab, 20, 4, 1), tmp / "set.jsonl");
  const auto cmd = "split " + q(tmp / "set.jsonl") + " --ratios 0.7,0.2,0.1 --seed 7 --out-dir ";
  REQUIRE(run_cli(cmd + q(tmp / "a")).status == 0);
  REQUIRE(run_cli(cmd + q(tmp / "b")).status == 0);
  for (const auto *part : {"train", "val", "test"}) {
    const auto name = std::string("set.") + part + ".jsonl";
    CHECK_FALSE(slurp(tmp / "a" / name).empty());
    CHECK(slurp(tmp / "a" / name) == slurp(tmp / "b" / name));
  }
  CHECK(load_dataset(tmp / "a" / "set.train.jsonl").items.size() == 6 * 14);
}

TEST_CASE("cross-eval from a plan file") {
  testing::TempDir tmp;
  const auto corpora = testing::overlap_corpora({2, 6, 14, 3, 10, 30, 1024}, 3);
  for (const auto &c : corpora)
    save_dataset(c, tmp / (c.name + ".jsonl"));
  std::ofstream(tmp / "plan.toml") << "[plan]\n"
                                      "train = [\"llmA.jsonl\", \"llmB.jsonl\"]\n"
                                      "test = [\"llmA.jsonl\", \"llmB.jsonl\"]\n"
                                      "[embed]\ndim = 1024\n"
                                      "[harness]\nruns = 2\n";
  const auto r = run_cli("cross-eval --plan " + q(tmp / "plan.toml") + " --out-dir " + q(tmp / "runs"));
  REQUIRE(r.status == 0);
  std::istringstream in(r.output);
  std::string line;
  std::getline(in, line);
  CHECK(line == "train\\test,llmA,llmB,Combined");
  const std::regex cell(R"(^\d+\.\d{2}±\d+\.\d{2}$)");
  int rows = 0;
  while (std::getline(in, line) && line.find(',') != std::string::npos) {
    ++rows;
    std::stringstream fields(line);
    std::string f;
    std::getline(fields, f, ',');
    while (std::getline(fields, f, ','))
      CHECK_MESSAGE(std::regex_match(f, cell), f);
  }
  CHECK(rows == 3);
  std::size_t dirs = 0;
  for (const auto &e : std::filesystem::directory_iterator(tmp / "runs")) {
    ++dirs;
    CHECK(std::filesystem::exists(e.path() / "matrix.json"));
    CHECK(std::filesystem::exists(e.path() / "matrix.md"));
  }
  CHECK(dirs == 1);
}

TEST_CASE("exit codes") {
  testing::TempDir tmp;
  SUBCASE("usage") {
    const auto r = run_cli("split");
    CHECK(r.status == 2);
    CHECK(r.output.find("error: usage") != std::string::npos);
    CHECK(run_cli("no-such-command").status == 2);
  }
  SUBCASE("config") {
    std::ofstream(tmp / "bad.toml") << "[train]\nepochz = 3\n";
    const auto r = run_cli("-c " + q(tmp / "bad.toml") + " config show");
    CHECK(r.status == 3);
    CHECK(r.output.find("error: config") != std::string::npos);
    CHECK(run_cli("--set train.epochs=lots config show").status == 3);
  }
  SUBCASE("data") {
    std::ofstream(tmp / "broken.jsonl") << "{not json\n";
    CHECK(run_cli("split " + q(tmp / "broken.jsonl")).status == 5);
  }
  SUBCASE("network") {
    save_dataset(testing::keyword_corpus(testing::class_vocabularies(4, 64, 1), 1, 2, 1), tmp / "d.jsonl");
    const auto r = run_cli("synth " + q(tmp / "d.jsonl") + " --tts-endpoint http://127.0.0.1:1/tts --speakers s1" +
                           " --audio-dir " + q(tmp / "audio") + " --manifest " + q(tmp / "m.jsonl"));
    // every item failed: network error, but the manifest records the failures
    CHECK(r.status == 4);
    CHECK(r.output.find("error: network") != std::string::npos);
    CHECK(std::filesystem::exists(tmp / "m.jsonl"));
  }
}

TEST_CASE("config show reports sources") {
  const auto r = run_cli("--set train.epochs=3 config show", "INTENTSYNTH_TRAIN_SEED=8");
  REQUIRE(r.status == 0);
  CHECK(r.output.find("train.epochs = \"3\"  # flag") != std::string::npos);
  CHECK(r.output.find("train.seed = \"8\"  # env (INTENTSYNTH_TRAIN_SEED)") != std::string::npos);
  CHECK(r.output.find("train.dropout = \"0.1\"  # default") != std::string::npos);
}

TEST_CASE("dry run never prints the key") {
  const std::string secret = "sk-test-000111222333";
  const auto r = run_cli("generate --dry-run --model m --total 12", "INTENTSYNTH_API_KEY=" + secret);
  REQUIRE(r.status == 0);
  CHECK(r.output.find(secret) == std::string::npos);
  CHECK(r.output.find("api key: from $INTENTSYNTH_API_KEY (set)") != std::string::npos);
  CHECK(r.output.find("\"temperature\": 0.7") != std::string::npos);
  CHECK(run_cli("generate --dry-run --api-key x").status == 2);
}
