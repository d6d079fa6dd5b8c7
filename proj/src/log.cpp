#include "intentsynth/log.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <iostream>
#include <mutex>

namespace intentsynth::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

const char *tag(Level level) {
  switch (level) {
  case Level::debug:
    return "debug";
  case Level::info:
    return "info";
  case Level::warn:
    return "warn";
  case Level::error:
    return "error";
  case Level::off:
    break;
  }
  return "";
}
} // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level level, std::string_view message) {
  if (level < g_level.load() || level == Level::off)
    return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[" << tag(level) << "] " << message << '\n';
}

std::string utc_timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace intentsynth::log
