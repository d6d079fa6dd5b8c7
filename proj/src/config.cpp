#include "intentsynth/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "intentsynth/errors.hpp"
#include "intentsynth/text.hpp"

namespace intentsynth {

namespace {

struct Cursor {
  std::string_view s;
  std::size_t pos = 0;
  int line = 1;
  const std::string &origin;

  bool done() const { return pos >= s.size(); }
  char peek() const { return done() ? '\0' : s[pos]; }
  [[noreturn]] void fail(const std::string &what) const {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
  }
  void skip_blank() {
    while (!done() && (s[pos] == ' ' || s[pos] == '\t'))
      ++pos;
  }
  // Blanks, comments and newlines (inside arrays).
  void skip_all() {
    for (;;) {
      skip_blank();
      if (peek() == '#') {
        while (!done() && s[pos] != '\n')
          ++pos;
      }
      if (peek() == '\r') {
        ++pos;
        continue;
      }
      if (peek() == '\n') {
        ++pos;
        ++line;
        continue;
      }
      return;
    }
  }
};

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string parse_key(Cursor &c) {
  std::string key;
  for (;;) {
    c.skip_blank();
    const auto start = c.pos;
    while (!c.done() && bare_key_char(c.peek()))
      ++c.pos;
    if (c.pos == start)
      c.fail("expected a key");
    key.append(c.s.substr(start, c.pos - start));
    c.skip_blank();
    if (c.peek() != '.')
      return key;
    ++c.pos;
    key.push_back('.');
  }
}

std::string parse_string(Cursor &c) {
  ++c.pos; // opening quote
  std::string out;
  while (!c.done()) {
    const char ch = c.s[c.pos++];
    if (ch == '"')
      return out;
    if (ch == '\n')
      c.fail("newline inside string");
    if (ch != '\\') {
      out.push_back(ch);
      continue;
    }
    if (c.done())
      break;
    const char esc = c.s[c.pos++];
    switch (esc) {
    case 'n':
      out.push_back('\n');
      break;
    case 't':
      out.push_back('\t');
      break;
    case 'r':
      out.push_back('\r');
      break;
    case '"':
      out.push_back('"');
      break;
    case '\\':
      out.push_back('\\');
      break;
    case 'u':
    case 'U': {
      const std::size_t n = esc == 'u' ? 4 : 8;
      if (c.pos + n > c.s.size())
        c.fail("truncated unicode escape");
      std::uint32_t cp = 0;
      const auto hex = c.s.substr(c.pos, n);
      const auto [p, ec] = std::from_chars(hex.data(), hex.data() + n, cp, 16);
      if (ec != std::errc() || p != hex.data() + n)
        c.fail("bad unicode escape");
      c.pos += n;
      out += text::encode_utf8(std::u32string(1, static_cast<char32_t>(cp)));
      break;
    }
    default:
      c.fail(std::string("unknown escape \\") + esc);
    }
  }
  c.fail("unterminated string");
}

TomlValue parse_value(Cursor &c) {
  c.skip_blank();
  TomlValue v;
  v.line = c.line;
  const char ch = c.peek();
  if (ch == '"') {
    v.value = parse_string(c);
    return v;
  }
  if (ch == '[') {
    ++c.pos;
    TomlArray items;
    for (;;) {
      c.skip_all();
      if (c.peek() == ']') {
        ++c.pos;
        break;
      }
      items.push_back(parse_value(c));
      c.skip_all();
      if (c.peek() == ',') {
        ++c.pos;
        continue;
      }
      if (c.peek() == ']') {
        ++c.pos;
        break;
      }
      c.fail("expected ',' or ']' in array");
    }
    v.value = std::move(items);
    return v;
  }
  const auto start = c.pos;
  while (!c.done() && c.peek() != ',' && c.peek() != ']' && c.peek() != '#' && c.peek() != '\n' &&
         c.peek() != '\r' && c.peek() != ' ' && c.peek() != '\t')
    ++c.pos;
  std::string token(c.s.substr(start, c.pos - start));
  if (token.empty())
    c.fail("expected a value");
  if (token == "true" || token == "false") {
    v.value = token == "true";
    return v;
  }
  std::string digits;
  for (char d : token) {
    if (d != '_')
      digits.push_back(d);
  }
  const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" ||
                        digits == "+inf" || digits == "-inf" || digits == "nan";
  if (!is_float) {
    std::int64_t n = 0;
    const char *b = digits.data() + (digits[0] == '+' ? 1 : 0);
    const auto [p, ec] = std::from_chars(b, digits.data() + digits.size(), n);
    if (ec == std::errc() && p == digits.data() + digits.size()) {
      v.value = n;
      return v;
    }
  } else {
    char *end = nullptr;
    const double d = std::strtod(digits.c_str(), &end);
    if (end == digits.c_str() + digits.size()) {
      v.value = d;
      return v;
    }
  }
  c.fail("cannot parse value '" + token + "'");
}

std::string format_real(double d) {
  std::ostringstream out;
  out.precision(17);
  out << d;
  std::string s = out.str();
  // Shortest form that round-trips.
  for (int p = 1; p <= 17; ++p) {
    std::ostringstream trial;
    trial.precision(p);
    trial << d;
    if (std::strtod(trial.str().c_str(), nullptr) == d)
      return trial.str();
  }
  return s;
}

} // namespace

TomlTable parse_toml(std::string_view source, const std::string &origin) {
  TomlTable table;
  Cursor c{source, 0, 1, origin};
  std::string section;
  for (;;) {
    c.skip_all();
    if (c.done())
      break;
    if (c.peek() == '[') {
      ++c.pos;
      if (c.peek() == '[')
        c.fail("arrays of tables are not supported");
      section = parse_key(c);
      if (c.peek() != ']')
        c.fail("expected ']' after section name");
      ++c.pos;
    } else {
      const int line = c.line;
      auto key = parse_key(c);
      if (c.peek() != '=')
        c.fail("expected '=' after key '" + key + "'");
      ++c.pos;
      auto value = parse_value(c);
      value.line = line;
      const auto full = section.empty() ? key : section + "." + key;
      if (table.count(full))
        c.fail("duplicate key '" + full + "'");
      table.emplace(full, std::move(value));
    }
    c.skip_blank();
    if (c.peek() == '#') {
      while (!c.done() && c.peek() != '\n')
        ++c.pos;
    }
    if (c.peek() == '\r')
      ++c.pos;
    if (!c.done() && c.peek() != '\n')
      c.fail("unexpected text after value");
  }
  return table;
}

TomlTable load_toml(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str(), path.string());
}

std::string toml_to_text(const TomlValue &value) {
  struct Visitor {
    std::string operator()(const std::string &s) const { return s; }
    std::string operator()(std::int64_t n) const { return std::to_string(n); }
    std::string operator()(double d) const { return format_real(d); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const TomlArray &a) const {
      std::string out;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i)
          out += ",";
        out += toml_to_text(a[i]);
      }
      return out;
    }
  };
  return std::visit(Visitor{}, value.value);
}

std::string_view source_name(ValueSource source) {
  switch (source) {
  case ValueSource::default_value:
    return "default";
  case ValueSource::file:
    return "file";
  case ValueSource::env:
    return "env";
  case ValueSource::flag:
    return "flag";
  }
  return "default";
}

const std::vector<ConfigKey> &config_schema() {
  using T = ValueType;
  static const std::vector<ConfigKey> schema = {
      {"generation.endpoint", T::string, "", "chat-completions URL"},
      {"generation.model", T::string, "", "model name sent in requests"},
      {"generation.adapter", T::string, "openai", "request shape: openai, options or hosted"},
      {"generation.source", T::string, "", "generator id stored on utterances (defaults to the model)"},
      {"generation.seed_state", T::integer, "0", "seed stream start; each call draws a seed in (0, 2^35)"},
      {"generation.top_p", T::real, "1", "nucleus sampling"},
      {"generation.top_k", T::integer, "10000", "top-k sampling"},
      {"generation.repetition_penalty", T::real, "1", "repetition penalty"},
      {"generation.typical_p", T::real, "0.995", "typical sampling"},
      {"generation.temperature", T::real, "0.7", "sampling temperature"},
      {"generation.max_tokens", T::integer, "1024", "completion token limit"},
      {"generation.timeout_seconds", T::integer, "120", "per-request timeout"},
      {"generation.api_key_env", T::string, "INTENTSYNTH_API_KEY", "environment variable holding the API key"},
      {"generation.calls_per_variant", T::integer, "50", "call budget per prompt variant"},
      {"generation.audit_log", T::string, "", "append raw completions here"},
      {"quotas.total", T::integer, "2500", "utterances per generator, split evenly over labels"},
      {"quotas.help", T::integer, "0", "per-label override (0 = balanced)"},
      {"quotas.light_on", T::integer, "0", "per-label override (0 = balanced)"},
      {"quotas.light_off", T::integer, "0", "per-label override (0 = balanced)"},
      {"quotas.roll_up", T::integer, "0", "per-label override (0 = balanced)"},
      {"quotas.roll_down", T::integer, "0", "per-label override (0 = balanced)"},
      {"quotas.no_command", T::integer, "0", "per-label override (0 = balanced)"},
      {"parser.speaker_keyword", T::string, "Ältere_Person:", "utterance start keyword"},
      {"parser.end_keyword", T::string, "NÄCHSTES", "utterance end keyword"},
      {"split.ratios", T::real_list, "0.7,0.2,0.1", "train, val, test fractions"},
      {"split.seed", T::integer, "0", "split shuffle seed"},
      {"embed.provider", T::string, "hashed_bow", "hashed_bow or remote"},
      {"embed.dim", T::integer, "256", "embedding dimension"},
      {"embed.endpoint", T::string, "", "remote embedding URL"},
      {"embed.provider_id", T::string, "", "id recorded for a remote provider"},
      {"embed.max_in_flight", T::integer, "4", "concurrent remote embedding requests"},
      {"train.learning_rate", T::real, "0.0003", "Adam step size"},
      {"train.dropout", T::real, "0.1", "input dropout"},
      {"train.epochs", T::integer, "5", "training epochs (one checkpoint each)"},
      {"train.batch_size", T::integer, "32", "mini-batch size"},
      {"train.seed", T::integer, "0", "initialization, shuffle and dropout seed"},
      {"train.hidden_dim", T::integer, "256", "cn2 hidden width"},
      {"harness.runs", T::integer, "5", "training runs per cell"},
      {"harness.aggregation", T::string, "per_run_finals", "per_run_finals or per_epoch_checkpoints"},
      {"harness.diagonal_uses_test_split", T::boolean, "true", "diagonal cells use the held-out split"},
      {"harness.max_parallel_cells", T::integer, "0", "0 = hardware concurrency"},
      {"harness.out_dir", T::string, "runs", "parent directory for run outputs"},
      {"speech.tts_endpoint", T::string, "", "text-to-speech URL"},
      {"speech.asr_endpoint", T::string, "", "speech recognition URL"},
      {"speech.speakers", T::string_list, "", "speaker reference ids, comma separated"},
      {"speech.max_in_flight", T::integer, "2", "concurrent TTS/ASR requests"},
      {"speech.audio_dir", T::string, "audio", "where synthesized audio is written"},
      {"metrics.norm", T::string, "casefold-strip-punct-v1", "WER/CER text normalization"},
  };
  return schema;
}

std::string env_var_for(std::string_view key) {
  std::string out = "INTENTSYNTH_";
  for (char ch : key)
    out.push_back(ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  return out;
}

std::vector<std::string> split_list(std::string_view textv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  if (textv.find_first_not_of(" \t") == std::string_view::npos)
    return out;
  for (;;) {
    const auto comma = textv.find(',', start);
    auto piece = textv.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const auto b = piece.find_first_not_of(" \t");
    const auto e = piece.find_last_not_of(" \t");
    out.emplace_back(b == std::string_view::npos ? std::string_view{} : piece.substr(b, e - b + 1));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return out;
}

namespace {

const ConfigKey *find_key(const std::string &key) {
  for (const auto &k : config_schema()) {
    if (k.key == key)
      return &k;
  }
  return nullptr;
}

bool parse_int(std::string_view s, std::int64_t &out) {
  if (!s.empty() && s[0] == '+')
    s.remove_prefix(1);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

bool parse_real(const std::string &s, double &out) {
  if (s.empty())
    return false;
  char *end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

void check_type(const ConfigKey &k, const std::string &value, const std::string &origin) {
  auto bad = [&](const char *what) {
    throw ConfigError(origin + ": '" + k.key + "' expects " + what + ", got '" + value + "'");
  };
  std::int64_t n = 0;
  double d = 0;
  switch (k.type) {
  case ValueType::string:
  case ValueType::string_list:
    break;
  case ValueType::integer:
    if (!parse_int(value, n))
      bad("an integer");
    break;
  case ValueType::real:
    if (!parse_real(value, d))
      bad("a number");
    break;
  case ValueType::boolean:
    if (value != "true" && value != "false")
      bad("true or false");
    break;
  case ValueType::real_list:
    for (const auto &piece : split_list(value)) {
      if (!parse_real(piece, d))
        bad("a comma-separated list of numbers");
    }
    break;
  }
}

} // namespace

RunConfig::RunConfig() {
  for (const auto &k : config_schema())
    entries_[k.key] = ConfigEntry{k.default_value, ValueSource::default_value, "built-in"};
}

void RunConfig::assign(const std::string &key, std::string value, ValueSource source, std::string origin) {
  const auto *k = find_key(key);
  if (!k)
    throw ConfigError(origin + ": unknown config key '" + key + "'");
  check_type(*k, value, origin);
  auto &e = entries_[key];
  if (static_cast<int>(source) < static_cast<int>(e.source))
    return;
  e = ConfigEntry{std::move(value), source, std::move(origin)};
}

void RunConfig::apply_file(const TomlTable &table, const std::string &origin) {
  for (const auto &[key, value] : table) {
    if (std::holds_alternative<TomlArray>(value.value)) {
      for (const auto &item : std::get<TomlArray>(value.value)) {
        if (std::holds_alternative<TomlArray>(item.value))
          throw ConfigError(origin + ":" + std::to_string(value.line) + ": nested arrays are not supported");
      }
    }
    assign(key, toml_to_text(value), ValueSource::file, origin + ":" + std::to_string(value.line));
  }
}

void RunConfig::apply_file(const std::filesystem::path &path) { apply_file(load_toml(path), path.string()); }

void RunConfig::apply_env(const std::function<std::optional<std::string>(const std::string &)> &getenv) {
  for (const auto &k : config_schema()) {
    const auto var = env_var_for(k.key);
    if (auto v = getenv(var))
      assign(k.key, *v, ValueSource::env, var);
  }
}

void RunConfig::apply_process_env() {
  apply_env([](const std::string &name) -> std::optional<std::string> {
    if (const char *v = std::getenv(name.c_str()))
      return std::string(v);
    return std::nullopt;
  });
}

void RunConfig::set_flag(const std::string &key, const std::string &value, const std::string &flag) {
  assign(key, value, ValueSource::flag, flag);
}

const ConfigEntry &RunConfig::entry(const std::string &key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end())
    throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::get_string(const std::string &key) const { return entry(key).value; }

std::int64_t RunConfig::get_int(const std::string &key) const {
  std::int64_t n = 0;
  if (!parse_int(entry(key).value, n))
    throw ConfigError("'" + key + "' is not an integer");
  return n;
}

double RunConfig::get_real(const std::string &key) const {
  double d = 0;
  if (!parse_real(entry(key).value, d))
    throw ConfigError("'" + key + "' is not a number");
  return d;
}

bool RunConfig::get_bool(const std::string &key) const {
  const auto &v = entry(key).value;
  if (v != "true" && v != "false")
    throw ConfigError("'" + key + "' is not a boolean");
  return v == "true";
}

std::vector<double> RunConfig::get_real_list(const std::string &key) const {
  std::vector<double> out;
  for (const auto &piece : split_list(entry(key).value)) {
    double d = 0;
    if (!parse_real(piece, d))
      throw ConfigError("'" + key + "' is not a list of numbers");
    out.push_back(d);
  }
  return out;
}

std::vector<std::string> RunConfig::get_string_list(const std::string &key) const {
  return split_list(entry(key).value);
}

std::string RunConfig::show() const {
  std::ostringstream out;
  for (const auto &[key, e] : entries_) {
    out << key << " = \"" << e.value << "\"  # " << source_name(e.source);
    if (e.source != ValueSource::default_value)
      out << " (" << e.origin << ")";
    out << "\n";
  }
  return out.str();
}

} // namespace intentsynth
