#include "intentsynth/errors.hpp"

namespace intentsynth {

const char *category_name(ErrorCategory category) {
  switch (category) {
  case ErrorCategory::usage:
    return "usage";
  case ErrorCategory::config:
    return "config";
  case ErrorCategory::network:
    return "network";
  case ErrorCategory::data_format:
    return "data-format";
  case ErrorCategory::budget_exhausted:
    return "budget-exhausted";
  }
  return "unknown";
}

} // namespace intentsynth
