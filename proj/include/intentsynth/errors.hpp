#pragma once

#include <stdexcept>
#include <string>

namespace intentsynth {

// Each category maps onto one CLI exit code.
enum class ErrorCategory { usage = 2, config = 3, network = 4, data_format = 5, budget_exhausted = 6 };

const char *category_name(ErrorCategory category);

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string &message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

class UsageError : public Error {
public:
  explicit UsageError(const std::string &message) : Error(ErrorCategory::usage, message) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string &message) : Error(ErrorCategory::config, message) {}
};

class NetworkError : public Error {
public:
  NetworkError(const std::string &message, bool retryable)
      : Error(ErrorCategory::network, message), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

private:
  bool retryable_;
};

class DataError : public Error {
public:
  explicit DataError(const std::string &message) : Error(ErrorCategory::data_format, message) {}
};

class BudgetExhausted : public Error {
public:
  explicit BudgetExhausted(const std::string &message)
      : Error(ErrorCategory::budget_exhausted, message) {}
};

} // namespace intentsynth
