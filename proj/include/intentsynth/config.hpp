#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace intentsynth {

// Minimal TOML subset: [section] and [a.b] headers, key = value pairs, basic
// strings with the usual escapes, integers, floats, booleans and one-line
// arrays of those. Keys come back flattened as "section.key".
struct TomlValue;
using TomlArray = std::vector<TomlValue>;
struct TomlValue {
  std::variant<std::string, std::int64_t, double, bool, TomlArray> value;
  int line = 0;
};

using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml(std::string_view source, const std::string &origin = "<string>");
TomlTable load_toml(const std::filesystem::path &path);

// Renders a scalar or array back to the textual form RunConfig stores.
std::string toml_to_text(const TomlValue &value);

enum class ValueSource { default_value, file, env, flag };
std::string_view source_name(ValueSource source);

enum class ValueType { string, integer, real, boolean, real_list, string_list };

struct ConfigKey {
  std::string key; // "section.name"
  ValueType type;
  std::string default_value;
  std::string help;
};

// Known keys with their defaults.
const std::vector<ConfigKey> &config_schema();

// Environment variable consulted for a key: "generation.endpoint" -> INTENTSYNTH_GENERATION_ENDPOINT.
std::string env_var_for(std::string_view key);

struct ConfigEntry {
  std::string value;
  ValueSource source = ValueSource::default_value;
  std::string origin; // file:line, variable name or flag
};

// Effective configuration. Precedence: flag > env > file > default.
class RunConfig {
public:
  RunConfig();

  // Unknown keys and ill-typed values raise ConfigError.
  void apply_file(const TomlTable &table, const std::string &origin);
  void apply_file(const std::filesystem::path &path);
  void apply_env(const std::function<std::optional<std::string>(const std::string &)> &getenv);
  void apply_process_env();
  void set_flag(const std::string &key, const std::string &value, const std::string &flag);

  const ConfigEntry &entry(const std::string &key) const;
  std::string get_string(const std::string &key) const;
  std::int64_t get_int(const std::string &key) const;
  double get_real(const std::string &key) const;
  bool get_bool(const std::string &key) const;
  std::vector<double> get_real_list(const std::string &key) const;
  std::vector<std::string> get_string_list(const std::string &key) const;

  // One "key = value  # source (origin)" line per key, sorted by key.
  std::string show() const;

  const std::map<std::string, ConfigEntry> &entries() const { return entries_; }

private:
  void assign(const std::string &key, std::string value, ValueSource source, std::string origin);

  std::map<std::string, ConfigEntry> entries_;
};

// Splits "a,b , c" on commas and trims each piece.
std::vector<std::string> split_list(std::string_view text);

} // namespace intentsynth
