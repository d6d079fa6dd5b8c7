#include <cstdlib>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "intentsynth/classify.hpp"
#include "intentsynth/config.hpp"
#include "intentsynth/corpus.hpp"
#include "intentsynth/curate.hpp"
#include "intentsynth/embed.hpp"
#include "intentsynth/errors.hpp"
#include "intentsynth/harness.hpp"
#include "intentsynth/log.hpp"
#include "intentsynth/metrics.hpp"
#include "intentsynth/parser.hpp"
#include "intentsynth/promptgen.hpp"
#include "intentsynth/report.hpp"
#include "intentsynth/speech.hpp"

namespace fs = std::filesystem;
using namespace intentsynth;

namespace {

// A command-line flag that overrides one config key.
struct Binding {
  std::string key;
  std::string flag;
  std::string value;
  CLI::Option *option = nullptr;
};

struct App {
  std::string config_file;
  std::vector<std::string> sets;
  int verbose = 0;
  bool quiet = false;
  std::deque<Binding> bindings;
  RunConfig cfg;

  void bind(CLI::App *sub, const std::string &flag, const std::string &key, const std::string &help) {
    auto &b = bindings.emplace_back(Binding{key, flag, {}, nullptr});
    b.option = sub->add_option(flag, b.value, help + " [" + key + "]");
  }

  void load() {
    if (!config_file.empty())
      cfg.apply_file(fs::path(config_file));
    cfg.apply_process_env();
    for (const auto &s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw UsageError("--set expects key=value, got '" + s + "'");
      cfg.set_flag(s.substr(0, eq), s.substr(eq + 1), "--set " + s.substr(0, eq));
    }
    for (const auto &b : bindings) {
      if (b.option && b.option->count() > 0)
        cfg.set_flag(b.key, b.value, b.flag);
    }
    if (quiet)
      log::set_level(log::Level::error);
    else if (verbose >= 2)
      log::set_level(log::Level::debug);
    else if (verbose == 1)
      log::set_level(log::Level::info);
  }
};

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> read_lines(const fs::path &path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

GenerationParams generation_params(const RunConfig &c, bool dry_run) {
  GenerationParams p;
  p.endpoint_url = c.get_string("generation.endpoint");
  if (dry_run && p.endpoint_url.empty())
    p.endpoint_url = "http://localhost/";
  p.model = c.get_string("generation.model");
  p.adapter = parse_adapter(c.get_string("generation.adapter"));
  p.source = c.get_string("generation.source");
  p.top_p = c.get_real("generation.top_p");
  p.top_k = static_cast<int>(c.get_int("generation.top_k"));
  p.repetition_penalty = c.get_real("generation.repetition_penalty");
  p.typical_p = c.get_real("generation.typical_p");
  p.temperature = c.get_real("generation.temperature");
  p.max_tokens = static_cast<int>(c.get_int("generation.max_tokens"));
  p.timeout_seconds = static_cast<int>(c.get_int("generation.timeout_seconds"));
  p.api_key_env = c.get_string("generation.api_key_env");
  auto state = static_cast<std::uint64_t>(c.get_int("generation.seed_state"));
  p.seed = draw_seed(state);
  p.validate();
  return p;
}

std::array<std::size_t, kNumLabels> quotas(const RunConfig &c, const std::string &only_label) {
  const auto total = c.get_int("quotas.total");
  if (total <= 0)
    throw ConfigError("quotas.total must be positive");
  auto q = balanced_quotas(static_cast<std::size_t>(total));
  for (auto l : kAllLabels) {
    const auto override_ = c.get_int("quotas." + std::string(label_name(l)));
    if (override_ < 0)
      throw ConfigError("per-label quotas must be non-negative");
    if (override_ > 0)
      q[label_index(l)] = static_cast<std::size_t>(override_);
  }
  if (!only_label.empty()) {
    const auto keep = parse_label(only_label);
    for (auto l : kAllLabels) {
      if (l != keep)
        q[label_index(l)] = 0;
    }
  }
  return q;
}

std::shared_ptr<const EmbeddingProvider> make_provider(const RunConfig &c) {
  const auto kind = c.get_string("embed.provider");
  const auto dim = c.get_int("embed.dim");
  if (dim <= 0)
    throw ConfigError("embed.dim must be positive");
  if (kind == "hashed_bow")
    return std::make_shared<HashedBowProvider>(static_cast<std::size_t>(dim));
  if (kind == "remote") {
    const auto url = c.get_string("embed.endpoint");
    if (url.empty())
      throw ConfigError("embed.endpoint is required for the remote provider");
    auto id = c.get_string("embed.provider_id");
    if (id.empty())
      id = "remote:" + url;
    RemoteEmbeddingOptions opts;
    opts.max_in_flight = static_cast<std::size_t>(std::max<std::int64_t>(1, c.get_int("embed.max_in_flight")));
    return std::make_shared<CachingEmbeddingProvider>(
        std::make_shared<RemoteEmbeddingProvider>(url, static_cast<std::size_t>(dim), id, opts));
  }
  throw ConfigError("unknown embed.provider '" + kind + "' (expected hashed_bow or remote)");
}

HeadConfig head_config(const RunConfig &c) {
  HeadConfig h;
  h.learning_rate = c.get_real("train.learning_rate");
  h.dropout = c.get_real("train.dropout");
  h.epochs = static_cast<int>(c.get_int("train.epochs"));
  h.batch_size = static_cast<int>(c.get_int("train.batch_size"));
  h.seed = static_cast<std::uint64_t>(c.get_int("train.seed"));
  h.hidden_dim = static_cast<int>(c.get_int("train.hidden_dim"));
  h.validate();
  return h;
}

SplitRatios split_ratios(const RunConfig &c) {
  const auto r = c.get_real_list("split.ratios");
  if (r.size() != 3)
    throw ConfigError("split.ratios needs three values");
  return SplitRatios{r[0], r[1], r[2]};
}

SpeechServiceOptions speech_options(const RunConfig &c, const std::string &audit) {
  SpeechServiceOptions o;
  o.max_in_flight = static_cast<std::size_t>(std::max<std::int64_t>(1, c.get_int("speech.max_in_flight")));
  if (!audit.empty())
    o.audit_log = fs::path(audit);
  return o;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
  return buf;
}

// Joins sidecar vectors to manifest labels by id.
void features_from_sidecar(const fs::path &sidecar, const fs::path &manifest_path,
                           std::vector<EmbeddingVector> &features, std::vector<IntentLabel> &labels) {
  const auto records = load_feature_sidecar(sidecar);
  std::map<std::string, const EmbeddingVector *> by_id;
  for (const auto &r : records)
    by_id[r.id] = &r.vector;
  const auto manifest = load_manifest(manifest_path);
  for (const auto &e : manifest.entries) {
    if (!e.valid())
      continue;
    const auto it = by_id.find(e.id);
    if (it == by_id.end())
      throw DataError("no feature vector for manifest entry '" + e.id + "'");
    features.push_back(*it->second);
    labels.push_back(e.label);
  }
}

const Checkpoint &pick_checkpoint(const CheckpointSet &set, int epoch) {
  if (epoch <= 0)
    return set.final();
  for (const auto &cp : set.checkpoints) {
    if (cp.epoch == epoch)
      return cp;
  }
  throw UsageError("checkpoint has no epoch " + std::to_string(epoch));
}

void print_confusion(const ConfusionMatrix &cm) { std::cout << confusion_to_csv(cm); }

// ---- subcommands ----

struct GenerateArgs {
  std::string out, label, audit, name;
  bool dry_run = false;
};

int run_generate(App &app, const GenerateArgs &a) {
  const auto params = generation_params(app.cfg, a.dry_run);
  const auto q = quotas(app.cfg, a.label);
  ChatClient client(params);
  if (a.dry_run) {
    std::cout << "# endpoint: " << params.endpoint_url << "\n# adapter: " << adapter_name(params.adapter)
              << "\n# api key: from $" << params.api_key_env
              << (std::getenv(params.api_key_env.c_str()) ? " (set)" : " (unset)") << "\n";
    for (auto l : kAllLabels) {
      if (q[label_index(l)] == 0)
        continue;
      for (const auto &t : variants_for(l)) {
        std::cout << "\n## " << t.variant_id << " (quota " << q[label_index(l)] << ")\n"
                  << t.render() << "\n--- request body\n"
                  << client.build_request(t).dump(2, ' ', false, nlohmann::json::error_handler_t::replace)
                  << "\n";
      }
    }
    return 0;
  }
  if (a.out.empty())
    throw UsageError("generate needs --out (or --dry-run)");
  std::unique_ptr<AuditLog> audit;
  const auto audit_path = !a.audit.empty() ? a.audit : app.cfg.get_string("generation.audit_log");
  if (!audit_path.empty())
    audit = std::make_unique<AuditLog>(audit_path);
  GenerationOptions opts;
  opts.calls_per_variant = static_cast<int>(app.cfg.get_int("generation.calls_per_variant"));
  opts.audit = audit.get();
  const auto name = a.name.empty() ? fs::path(a.out).stem().string() : a.name;
  auto result = generate_campaign(q, client, opts, name);
  save_dataset(result.corpus, a.out);
  std::cout << "wrote " << result.corpus.size() << " utterances to " << a.out << " (seed " << params.seed << ")\n";
  if (result.budget_exhausted()) {
    std::string msg;
    for (const auto &r : result.per_label) {
      if (r.budget_exhausted)
        msg += (msg.empty() ? "" : "; ") + r.warning;
    }
    throw BudgetExhausted(msg);
  }
  return 0;
}

struct ParseArgs {
  std::string input, audit, label, out, prompt_id, source;
  std::size_t quota = 0;
};

int run_parse(App &app, const ParseArgs &a) {
  const auto label = parse_label(a.label);
  const auto speaker = app.cfg.get_string("parser.speaker_keyword");
  const auto end = app.cfg.get_string("parser.end_keyword");
  Dataset d;
  d.name = fs::path(a.out).stem().string();
  if (!a.audit.empty()) {
    const auto completions = load_audit_log(a.audit);
    const auto quota = a.quota ? a.quota : std::numeric_limits<std::size_t>::max();
    d = replay_completions(label, quota, completions, a.source.empty() ? "replay" : a.source);
    d.name = fs::path(a.out).stem().string();
  } else {
    if (a.input.empty())
      throw UsageError("parse needs an input file or --audit");
    const auto report = parse_block(read_file(a.input), speaker, end);
    std::unordered_set<std::string> seen;
    for (const auto &text : report.accepted) {
      if (!seen.insert(dedup_key(text)).second)
        continue;
      Utterance u;
      u.text = text;
      u.label = label;
      u.source = a.source.empty() ? "manual" : a.source;
      u.prompt_id = a.prompt_id;
      d.items.push_back(std::move(u));
    }
    std::cout << "candidates " << report.candidates() << ", accepted " << report.accepted.size()
              << ", incomplete " << report.dropped_incomplete << " (reopened " << report.reopened << ")"
              << ", empty " << report.dropped_empty << ", duplicate " << report.dropped_duplicate_within_block
              << "\n";
  }
  save_dataset(d, a.out);
  std::cout << "wrote " << d.size() << " utterances to " << a.out << "\n";
  return 0;
}

struct CurateArgs {
  std::string input, out, log_path, reviewer = "reviewer";
  bool auto_accept = false;
  bool replay = false;
};

Dataset curate_dataset(const Dataset &d, const CurateArgs &a) {
  if (a.auto_accept) {
    std::vector<CurationDecision> log;
    for (std::size_t i = 0; i < d.items.size(); ++i)
      log.push_back(CurationDecision{i, CurationAction::accept, {}, {}, "auto-accept", {}});
    return apply_log(d, log);
  }
  if (a.replay) {
    if (a.log_path.empty())
      throw UsageError("--replay needs --log");
    return apply_log(d, load_decision_log(a.log_path, d));
  }
  ReviewOptions opts;
  opts.reviewer = a.reviewer;
  if (!a.log_path.empty())
    opts.log_path = fs::path(a.log_path);
  RawTerminal raw(0);
  auto result = review_session(d, std::cin, std::cerr, opts);
  std::cerr << result.log.size() << " decisions, " << result.undecided << " undecided\n";
  return std::move(result.curated);
}

int run_curate(App &, const CurateArgs &a) {
  const auto d = load_dataset(a.input);
  const auto curated = curate_dataset(d, a);
  save_dataset(curated, a.out);
  std::cout << "wrote " << curated.size() << " of " << d.size() << " utterances to " << a.out << "\n";
  return 0;
}

struct SplitArgs {
  std::string input, out_dir;
};

int run_split(App &app, const SplitArgs &a) {
  const auto d = load_dataset(a.input);
  const auto seed = static_cast<std::uint64_t>(app.cfg.get_int("split.seed"));
  const auto bundle = stratified_split(d, split_ratios(app.cfg), seed);
  const fs::path dir = a.out_dir.empty() ? fs::path(a.input).parent_path() : fs::path(a.out_dir);
  if (!dir.empty())
    fs::create_directories(dir);
  const auto stem = fs::path(a.input).stem().string();
  const std::pair<const char *, const Dataset *> parts[] = {
      {"train", &bundle.train}, {"val", &bundle.val}, {"test", &bundle.test}};
  for (const auto &[part, data] : parts) {
    const auto path = dir / (stem + "." + part + ".jsonl");
    save_dataset(*data, path);
    std::cout << part << " " << data->size() << " -> " << path.string() << "\n";
  }
  return 0;
}

struct TrainArgs {
  std::string train, val, out, kind = "cn1", features, manifest, val_features, val_manifest, warm_start;
};

void print_epochs(const CheckpointSet &set) {
  for (const auto &cp : set.checkpoints) {
    std::cout << "epoch " << cp.epoch << " loss " << cp.train_loss;
    if (cp.val_accuracy)
      std::cout << " val_accuracy " << percent(*cp.val_accuracy);
    std::cout << "\n";
  }
}

int run_train(App &app, const TrainArgs &a) {
  const auto config = head_config(app.cfg);
  const auto kind = parse_head_kind(a.kind);
  if (a.out.empty())
    throw UsageError("train needs --out");
  std::optional<ClassifierHead> warm;
  if (!a.warm_start.empty())
    warm = load_checkpoints(a.warm_start).final().head;
  CheckpointSet set;
  if (kind == HeadKind::cn1) {
    if (a.train.empty())
      throw UsageError("cn1 training needs --train");
    const auto provider = make_provider(app.cfg);
    const auto train = load_dataset(a.train);
    const auto val = a.val.empty() ? Dataset{} : load_dataset(a.val);
    set = train_head(train, val, *provider, config, warm ? &*warm : nullptr);
  } else {
    if (a.features.empty() || a.manifest.empty())
      throw UsageError("cn2 training needs --features and --manifest");
    std::vector<EmbeddingVector> x, vx;
    std::vector<IntentLabel> y, vy;
    features_from_sidecar(a.features, a.manifest, x, y);
    if (!a.val_features.empty())
      features_from_sidecar(a.val_features, a.val_manifest.empty() ? a.manifest : a.val_manifest, vx, vy);
    set = train_on_features(HeadKind::cn2, x, y, config, vx, vy, warm ? &*warm : nullptr);
  }
  save_checkpoints(set, a.out);
  print_epochs(set);
  std::cout << "wrote " << set.checkpoints.size() << " checkpoints to " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, test, manifest, transcripts, features, confusion_out;
  int epoch = 0;
};

int run_eval(App &app, const EvalArgs &a) {
  const auto set = load_checkpoints(a.checkpoint);
  const auto &cp = pick_checkpoint(set, a.epoch);
  ConfusionMatrix cm;
  if (cp.head.kind() == HeadKind::cn2) {
    if (a.features.empty() || a.manifest.empty())
      throw UsageError("cn2 evaluation needs --features and --manifest");
    std::vector<EmbeddingVector> x;
    std::vector<IntentLabel> y;
    features_from_sidecar(a.features, a.manifest, x, y);
    std::vector<IntentLabel> preds;
    for (const auto &v : x)
      preds.push_back(cp.head.predict(v).label);
    std::cout << "accuracy " << percent(accuracy(preds, y)) << " (n=" << y.size() << ")\n";
    cm = confusion(preds, y);
  } else {
    const auto provider = make_provider(app.cfg);
    if (provider->provider_id() != cp.head.provider_id())
      throw ConfigError("checkpoint was trained on provider '" + cp.head.provider_id() +
                        "' but the configured provider is '" + provider->provider_id() + "'");
    const HeadClassifier clf(cp.head, provider);
    if (!a.manifest.empty()) {
      if (a.transcripts.empty())
        throw UsageError("speech evaluation needs --transcripts with --manifest");
      const auto r = speech_eval(load_manifest(a.manifest), load_transcripts(a.transcripts), clf,
                                 TextNorm::by_name(app.cfg.get_string("metrics.norm")));
      std::cout << "accuracy " << percent(r.accuracy) << " (n=" << r.evaluated << ")\n"
                << "WER " << percent(r.wer.rate) << " CER " << percent(r.cer.rate) << " [" << r.wer.norm << "]\n";
      cm = r.confusion;
    } else {
      if (a.test.empty())
        throw UsageError("eval needs --test or --manifest");
      const auto test = load_dataset(a.test);
      if (test.empty())
        throw DataError("test set '" + a.test + "' is empty");
      std::vector<IntentLabel> golds;
      for (const auto &u : test.items)
        golds.push_back(u.label);
      const auto preds = clf.predict(test.items);
      std::cout << "accuracy " << percent(accuracy(preds, golds)) << " (n=" << golds.size() << ")\n";
      cm = confusion(preds, golds);
    }
  }
  if (!a.confusion_out.empty()) {
    std::ofstream out(a.confusion_out, std::ios::binary | std::ios::trunc);
    out << confusion_to_csv(cm);
  } else {
    print_confusion(cm);
  }
  return 0;
}

struct CrossEvalArgs {
  std::string plan, out_dir, formats = "csv,json,markdown";
};

std::vector<NamedDataset> load_named(const std::vector<std::string> &paths, const fs::path &base) {
  std::vector<NamedDataset> out;
  for (const auto &p : paths) {
    const fs::path path = fs::path(p).is_absolute() ? fs::path(p) : base / p;
    auto d = load_dataset(path);
    out.push_back(NamedDataset{d.name, std::move(d)});
  }
  return out;
}

int run_cross_eval(App &app, const CrossEvalArgs &a) {
  const auto table = load_toml(a.plan);
  TomlTable plan_keys, config_keys;
  for (const auto &[k, v] : table)
    (k.rfind("plan.", 0) == 0 ? plan_keys : config_keys)[k] = v;
  app.cfg.apply_file(config_keys, a.plan);

  auto list = [&](const std::string &key) {
    std::vector<std::string> out;
    const auto it = plan_keys.find(key);
    if (it == plan_keys.end())
      return out;
    if (!std::holds_alternative<TomlArray>(it->second.value))
      throw ConfigError(a.plan + ": '" + key + "' must be an array of paths");
    for (const auto &v : std::get<TomlArray>(it->second.value)) {
      if (!std::holds_alternative<std::string>(v.value))
        throw ConfigError(a.plan + ": '" + key + "' must contain strings");
      out.push_back(std::get<std::string>(v.value));
    }
    return out;
  };
  for (const auto &[k, v] : plan_keys) {
    if (k != "plan.train" && k != "plan.test" && k != "plan.combined")
      throw ConfigError(a.plan + ":" + std::to_string(v.line) + ": unknown plan key '" + k + "'");
  }

  const auto base = fs::path(a.plan).parent_path();
  ExperimentPlan plan;
  plan.train_sets = load_named(list("plan.train"), base);
  plan.test_sets = load_named(list("plan.test"), base);
  if (const auto it = plan_keys.find("plan.combined"); it != plan_keys.end()) {
    if (!std::holds_alternative<bool>(it->second.value))
      throw ConfigError(a.plan + ": plan.combined must be true or false");
    plan.add_combined = std::get<bool>(it->second.value);
  }
  plan.runs = static_cast<int>(app.cfg.get_int("harness.runs"));
  plan.seed = static_cast<std::uint64_t>(app.cfg.get_int("split.seed"));
  plan.ratios = split_ratios(app.cfg);
  plan.mode = parse_mode(app.cfg.get_string("harness.aggregation"));
  plan.diagonal_uses_test_split = app.cfg.get_bool("harness.diagonal_uses_test_split");
  plan.max_parallel = static_cast<std::size_t>(std::max<std::int64_t>(0, app.cfg.get_int("harness.max_parallel_cells")));
  plan.trainer = std::make_shared<HeadTrainer>(make_provider(app.cfg), head_config(app.cfg));
  plan.validate();

  std::set<ReportFormat> formats;
  for (const auto &f : split_list(a.formats))
    formats.insert(parse_report_format(f));

  const auto matrix = cross_eval(plan);
  const fs::path parent = a.out_dir.empty() ? fs::path(app.cfg.get_string("harness.out_dir")) : fs::path(a.out_dir);
  const auto dir = make_run_dir(parent, matrix.plan_hash);
  emit_report(matrix, formats, dir);
  std::cout << matrix_to_csv(matrix);
  std::cerr << "report written to " << dir.string() << "\n";
  for (const auto &c : matrix.cells) {
    if (!c.error.empty())
      log::error("cell " + c.train + " / " + c.test + ": " + c.error);
  }
  return 0;
}

struct SynthArgs {
  std::string input, audio_dir, manifest, audit;
};

int run_synth(App &app, const SynthArgs &a) {
  const auto url = app.cfg.get_string("speech.tts_endpoint");
  if (url.empty())
    throw ConfigError("speech.tts_endpoint is required");
  const auto speakers = app.cfg.get_string_list("speech.speakers");
  if (speakers.empty())
    throw ConfigError("speech.speakers needs at least one speaker reference");
  if (a.manifest.empty())
    throw UsageError("synth needs --manifest");
  const auto d = load_dataset(a.input);
  const fs::path audio_dir = a.audio_dir.empty() ? fs::path(app.cfg.get_string("speech.audio_dir")) : fs::path(a.audio_dir);
  const auto m = synthesize_speech(d, speakers, url, audio_dir, speech_options(app.cfg, a.audit));
  save_manifest(m, a.manifest);
  std::cout << m.valid_count() << " of " << m.entries.size() << " utterances synthesized; manifest "
            << a.manifest << "\n";
  if (!m.entries.empty() && m.valid_count() == 0)
    throw NetworkError("every synthesis request failed", false);
  return 0;
}

struct TranscribeArgs {
  std::string manifest, out, audit;
};

int run_transcribe(App &app, const TranscribeArgs &a) {
  const auto url = app.cfg.get_string("speech.asr_endpoint");
  if (url.empty())
    throw ConfigError("speech.asr_endpoint is required");
  if (a.out.empty())
    throw UsageError("transcribe needs --out");
  const auto m = load_manifest(a.manifest);
  const auto r = transcribe(m, url, speech_options(app.cfg, a.audit));
  save_transcripts(r.transcripts, a.out);
  std::cout << r.transcripts.size() << " transcripts, " << r.failures.size() << " failures -> " << a.out << "\n";
  for (const auto &[id, err] : r.failures)
    log::warn(id + ": " + err);
  if (r.transcripts.empty() && !r.failures.empty())
    throw NetworkError(r.failures.begin()->second, false);
  return 0;
}

struct WerArgs {
  std::string ref, hyp;
};

int run_wer(App &app, const WerArgs &a) {
  const auto norm = TextNorm::by_name(app.cfg.get_string("metrics.norm"));
  const auto refs = read_lines(a.ref);
  const auto hyps = read_lines(a.hyp);
  if (refs.size() != hyps.size())
    throw DataError("reference has " + std::to_string(refs.size()) + " lines, hypothesis " +
                    std::to_string(hyps.size()));
  CorpusErrorRate wer("word", norm.name), cer("char", norm.name);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (norm.apply(refs[i]).empty() && norm.apply(hyps[i]).empty())
      continue;
    try {
      wer.add(word_error_rate(refs[i], hyps[i], norm));
      cer.add(char_error_rate(refs[i], hyps[i], norm));
    } catch (const DataError &e) {
      throw DataError(a.ref + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    ++pairs;
  }
  if (pairs == 0)
    throw DataError("no reference text");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "WER %.2f%% CER %.2f%%", wer.result().rate * 100.0, cer.result().rate * 100.0);
  std::cout << buf << "\n";
  return 0;
}

struct ReportArgs {
  std::string matrix, out_dir, formats = "csv,json,markdown";
};

int run_report(App &, const ReportArgs &a) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(a.matrix));
  } catch (const nlohmann::json::parse_error &) {
    throw DataError(a.matrix + " is not valid JSON");
  }
  const auto m = matrix_from_json(j);
  std::set<ReportFormat> formats;
  for (const auto &f : split_list(a.formats))
    formats.insert(parse_report_format(f));
  const fs::path dir = a.out_dir.empty() ? fs::path(a.matrix).parent_path() : fs::path(a.out_dir);
  for (const auto &p : emit_report(m, formats, dir))
    std::cout << p.string() << "\n";
  return 0;
}

struct PipelineArgs {
  std::string out_dir, name = "generated", reviewer = "reviewer";
  bool auto_accept = false;
};

int run_pipeline(App &app, const PipelineArgs &a) {
  // Everything that can be checked offline is checked before the first request.
  const auto params = generation_params(app.cfg, false);
  const auto q = quotas(app.cfg, "");
  const auto config = head_config(app.cfg);
  const auto ratios = split_ratios(app.cfg);
  const auto provider = make_provider(app.cfg);
  if (a.out_dir.empty())
    throw UsageError("pipeline needs --out-dir");
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);

  ChatClient client(params);
  AuditLog audit(dir / "completions.jsonl");
  GenerationOptions opts;
  opts.calls_per_variant = static_cast<int>(app.cfg.get_int("generation.calls_per_variant"));
  opts.audit = &audit;
  auto campaign = generate_campaign(q, client, opts, a.name);
  save_dataset(campaign.corpus, dir / (a.name + ".raw.jsonl"));
  std::cerr << "generated " << campaign.corpus.size() << " utterances (seed " << params.seed << ")\n";
  if (campaign.budget_exhausted()) {
    std::string msg;
    for (const auto &r : campaign.per_label) {
      if (r.budget_exhausted)
        msg += (msg.empty() ? "" : "; ") + r.warning;
    }
    throw BudgetExhausted(msg);
  }

  CurateArgs ca;
  ca.auto_accept = a.auto_accept;
  ca.reviewer = a.reviewer;
  ca.log_path = (dir / "decisions.jsonl").string();
  auto curated = curate_dataset(campaign.corpus, ca);
  curated.name = a.name;
  save_dataset(curated, dir / (a.name + ".curated.jsonl"));

  const auto bundle = stratified_split(curated, ratios, static_cast<std::uint64_t>(app.cfg.get_int("split.seed")));
  save_dataset(bundle.train, dir / (a.name + ".train.jsonl"));
  save_dataset(bundle.val, dir / (a.name + ".val.jsonl"));
  save_dataset(bundle.test, dir / (a.name + ".test.jsonl"));

  const auto set = train_head(bundle.train, bundle.val, *provider, config);
  save_checkpoints(set, dir / "checkpoint.json");
  print_epochs(set);

  if (bundle.test.empty())
    throw DataError("test split is empty; nothing to evaluate");
  const HeadClassifier clf(set.final().head, provider);
  std::vector<IntentLabel> golds;
  for (const auto &u : bundle.test.items)
    golds.push_back(u.label);
  const auto preds = clf.predict(bundle.test.items);
  std::cout << "test accuracy " << percent(accuracy(preds, golds)) << " (n=" << golds.size() << ")\n";
  print_confusion(confusion(preds, golds));
  return 0;
}

std::string one_line(std::string s) {
  for (auto &c : s) {
    if (c == '\n' || c == '\r')
      c = ' ';
  }
  return s;
}

} // namespace

int main(int argc, char **argv) {
  App app;
  CLI::App cli{"Synthetic intent-recognition datasets: generate, curate, train, evaluate."};
  cli.require_subcommand(1);
  cli.set_help_all_flag("--help-all", "Help for every subcommand");
  cli.add_option("-c,--config", app.config_file, "TOML config file")->check(CLI::ExistingFile);
  cli.add_option("--set", app.sets, "Override a config key: key=value (repeatable)");
  cli.add_flag("-v,--verbose", app.verbose, "More logging (-vv for debug)");
  cli.add_flag("-q,--quiet", app.quiet, "Errors only");

  GenerateArgs gen;
  auto *g = cli.add_subcommand("generate", "Generate a labeled corpus from a chat-completions endpoint");
  g->add_option("-o,--out", gen.out, "Output dataset (JSONL)");
  g->add_option("--label", gen.label, "Only this label");
  g->add_option("--audit", gen.audit, "Append raw completions to this JSONL file");
  g->add_option("--name", gen.name, "Dataset name (defaults to the output file stem)");
  g->add_flag("--dry-run", gen.dry_run, "Print rendered prompts and request bodies, send nothing");
  app.bind(g, "--endpoint", "generation.endpoint", "Chat-completions URL");
  app.bind(g, "--model", "generation.model", "Model name");
  app.bind(g, "--adapter", "generation.adapter", "openai, options or hosted");
  app.bind(g, "--source", "generation.source", "Generator id stored on utterances");
  app.bind(g, "--total", "quotas.total", "Total utterances, balanced over labels");
  app.bind(g, "--calls-per-variant", "generation.calls_per_variant", "Call budget per prompt variant");
  app.bind(g, "--seed-state", "generation.seed_state", "Seed stream start");

  ParseArgs par;
  auto *p = cli.add_subcommand("parse", "Extract utterances from a raw completion or replay an audit log");
  p->add_option("input", par.input, "Raw completion text file");
  p->add_option("--audit", par.audit, "Replay this completion audit log instead");
  p->add_option("--label", par.label, "Label for the extracted utterances")->required();
  p->add_option("-o,--out", par.out, "Output dataset (JSONL)")->required();
  p->add_option("--prompt-id", par.prompt_id, "Prompt variant id to record");
  p->add_option("--source", par.source, "Generator id to record");
  p->add_option("--quota", par.quota, "Stop after this many utterances (audit replay)");
  app.bind(p, "--speaker-keyword", "parser.speaker_keyword", "Utterance start keyword");
  app.bind(p, "--end-keyword", "parser.end_keyword", "Utterance end keyword");

  CurateArgs cur;
  auto *cu = cli.add_subcommand("curate", "Review utterances: a accept, r reject, l<1-6> relabel, s skip, q quit");
  cu->add_option("input", cur.input, "Dataset to review")->required();
  cu->add_option("-o,--out", cur.out, "Curated dataset")->required();
  cu->add_option("--log", cur.log_path, "Decision log (appended; resumed when present)");
  cu->add_option("--reviewer", cur.reviewer, "Reviewer name recorded in the log");
  cu->add_flag("--auto-accept", cur.auto_accept, "Accept everything without review");
  cu->add_flag("--replay", cur.replay, "Apply an existing log without review");

  SplitArgs spl;
  auto *s = cli.add_subcommand("split", "Stratified train/val/test split");
  s->add_option("input", spl.input, "Dataset")->required();
  s->add_option("--out-dir", spl.out_dir, "Directory for <stem>.{train,val,test}.jsonl");
  app.bind(s, "--ratios", "split.ratios", "train,val,test fractions");
  app.bind(s, "--seed", "split.seed", "Shuffle seed");

  TrainArgs tr;
  auto *t = cli.add_subcommand("train", "Train a classification head");
  t->add_option("--train", tr.train, "Training dataset (cn1)");
  t->add_option("--val", tr.val, "Validation dataset (cn1)");
  t->add_option("-o,--out", tr.out, "Checkpoint file");
  t->add_option("--kind", tr.kind, "cn1 or cn2")->check(CLI::IsMember({"cn1", "cn2"}));
  t->add_option("--features", tr.features, "Feature sidecar (cn2)");
  t->add_option("--manifest", tr.manifest, "Audio manifest providing labels (cn2)");
  t->add_option("--val-features", tr.val_features, "Validation feature sidecar (cn2)");
  t->add_option("--val-manifest", tr.val_manifest, "Validation manifest (cn2)");
  t->add_option("--warm-start", tr.warm_start, "Continue from this checkpoint's final head");
  app.bind(t, "--lr", "train.learning_rate", "Learning rate");
  app.bind(t, "--dropout", "train.dropout", "Input dropout");
  app.bind(t, "--epochs", "train.epochs", "Epochs");
  app.bind(t, "--batch-size", "train.batch_size", "Mini-batch size");
  app.bind(t, "--seed", "train.seed", "Run seed");
  app.bind(t, "--hidden-dim", "train.hidden_dim", "cn2 hidden width");
  app.bind(t, "--provider", "embed.provider", "hashed_bow or remote");
  app.bind(t, "--dim", "embed.dim", "Embedding dimension");
  app.bind(t, "--embed-endpoint", "embed.endpoint", "Remote embedding URL");

  EvalArgs ev;
  auto *e = cli.add_subcommand("eval", "Evaluate a checkpoint on a dataset or on transcribed speech");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--test", ev.test, "Test dataset");
  e->add_option("--manifest", ev.manifest, "Audio manifest (speech evaluation or cn2 labels)");
  e->add_option("--transcripts", ev.transcripts, "Transcripts for the manifest");
  e->add_option("--features", ev.features, "Feature sidecar (cn2)");
  e->add_option("--epoch", ev.epoch, "Checkpoint epoch (default: final)");
  e->add_option("--confusion", ev.confusion_out, "Write the confusion matrix CSV here instead of stdout");
  app.bind(e, "--provider", "embed.provider", "hashed_bow or remote");
  app.bind(e, "--dim", "embed.dim", "Embedding dimension");
  app.bind(e, "--embed-endpoint", "embed.endpoint", "Remote embedding URL");
  app.bind(e, "--norm", "metrics.norm", "WER/CER normalization");

  CrossEvalArgs ce;
  auto *x = cli.add_subcommand("cross-eval", "Train on each set, test on every set");
  x->add_option("--plan", ce.plan, "Plan file (TOML)")->required()->check(CLI::ExistingFile);
  x->add_option("--out-dir", ce.out_dir, "Parent of the run directory");
  x->add_option("--format", ce.formats, "csv,json,markdown");
  app.bind(x, "--runs", "harness.runs", "Runs per cell");
  app.bind(x, "--aggregation", "harness.aggregation", "per_run_finals or per_epoch_checkpoints");

  SynthArgs sy;
  auto *sn = cli.add_subcommand("synth", "Synthesize speech for a dataset");
  sn->add_option("input", sy.input, "Dataset")->required();
  sn->add_option("--audio-dir", sy.audio_dir, "Where audio files go");
  sn->add_option("--manifest", sy.manifest, "Output manifest (JSONL)");
  sn->add_option("--audit", sy.audit, "Request/response audit log");
  app.bind(sn, "--tts-endpoint", "speech.tts_endpoint", "Text-to-speech URL");
  app.bind(sn, "--speakers", "speech.speakers", "Speaker reference ids, comma separated");
  app.bind(sn, "--max-in-flight", "speech.max_in_flight", "Concurrent requests");

  TranscribeArgs tx;
  auto *tc = cli.add_subcommand("transcribe", "Transcribe a manifest with an ASR service");
  tc->add_option("--manifest", tx.manifest, "Audio manifest")->required();
  tc->add_option("-o,--out", tx.out, "Transcripts (JSONL)");
  tc->add_option("--audit", tx.audit, "Request/response audit log");
  app.bind(tc, "--asr-endpoint", "speech.asr_endpoint", "Speech recognition URL");
  app.bind(tc, "--max-in-flight", "speech.max_in_flight", "Concurrent requests");

  WerArgs wr;
  auto *w = cli.add_subcommand("wer", "Corpus WER and CER of line-aligned text files");
  w->add_option("--ref", wr.ref, "Reference, one utterance per line")->required();
  w->add_option("--hyp", wr.hyp, "Hypothesis, one utterance per line")->required();
  app.bind(w, "--norm", "metrics.norm", "casefold-strip-punct-v1 or whitespace-only-v1");

  ReportArgs rp;
  auto *r = cli.add_subcommand("report", "Render a saved result matrix");
  r->add_option("--matrix", rp.matrix, "matrix.json")->required();
  r->add_option("--out-dir", rp.out_dir, "Output directory");
  r->add_option("--format", rp.formats, "csv,json,markdown");

  PipelineArgs pl;
  auto *pp = cli.add_subcommand("pipeline", "generate, curate, split, train and evaluate in one go");
  pp->add_option("--out-dir", pl.out_dir, "Output directory")->required();
  pp->add_option("--name", pl.name, "Dataset name");
  pp->add_option("--reviewer", pl.reviewer, "Reviewer name");
  pp->add_flag("--auto-accept", pl.auto_accept, "Skip interactive curation");
  app.bind(pp, "--endpoint", "generation.endpoint", "Chat-completions URL");
  app.bind(pp, "--model", "generation.model", "Model name");
  app.bind(pp, "--total", "quotas.total", "Total utterances");

  auto *cfg = cli.add_subcommand("config", "Inspect the effective configuration");
  cfg->require_subcommand(1);
  auto *show = cfg->add_subcommand("show", "Print every key with its value and source");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp &ex) {
    return cli.exit(ex);
  } catch (const CLI::CallForAllHelp &ex) {
    return cli.exit(ex);
  } catch (const CLI::ParseError &ex) {
    std::cerr << "error: usage: " << one_line(ex.what()) << "\n";
    return static_cast<int>(ErrorCategory::usage);
  }

  try {
    app.load();
    if (g->parsed())
      return run_generate(app, gen);
    if (p->parsed())
      return run_parse(app, par);
    if (cu->parsed())
      return run_curate(app, cur);
    if (s->parsed())
      return run_split(app, spl);
    if (t->parsed())
      return run_train(app, tr);
    if (e->parsed())
      return run_eval(app, ev);
    if (x->parsed())
      return run_cross_eval(app, ce);
    if (sn->parsed())
      return run_synth(app, sy);
    if (tc->parsed())
      return run_transcribe(app, tx);
    if (w->parsed())
      return run_wer(app, wr);
    if (r->parsed())
      return run_report(app, rp);
    if (pp->parsed())
      return run_pipeline(app, pl);
    if (show->parsed()) {
      std::cout << app.cfg.show();
      return 0;
    }
  } catch (const Error &ex) {
    std::cerr << "error: " << category_name(ex.category()) << ": " << one_line(ex.what()) << "\n";
    return static_cast<int>(ex.category());
  } catch (const std::filesystem::filesystem_error &ex) {
    std::cerr << "error: " << category_name(ErrorCategory::data_format) << ": " << one_line(ex.what()) << "\n";
    return static_cast<int>(ErrorCategory::data_format);
  } catch (const std::exception &ex) {
    std::cerr << "error: internal: " << one_line(ex.what()) << "\n";
    return 1;
  }
  return 0;
}
