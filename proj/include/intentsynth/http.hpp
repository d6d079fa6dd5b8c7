#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "intentsynth/errors.hpp"

namespace intentsynth {

struct Endpoint {
  std::string origin; // scheme://host[:port]
  std::string path;   // always begins with '/'

  // Throws ConfigError for anything that is not an http(s) URL.
  static Endpoint parse(const std::string &url);
  std::string url() const { return origin + path; }
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff{250};
};

struct MultipartField {
  std::string name;
  std::string content;
  std::string filename;
  std::string content_type;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

// Thin blocking client. Every call is one attempt: transport failures and 5xx
// responses raise a retryable NetworkError, other non-2xx statuses a
// non-retryable one carrying the response body.
class HttpClient {
public:
  explicit HttpClient(Endpoint endpoint,
                      std::chrono::seconds timeout = std::chrono::seconds(120));

  HttpResponse post(const std::string &body, const std::string &content_type,
                    const Headers &headers = {}) const;
  HttpResponse post_multipart(const std::vector<MultipartField> &fields,
                              const Headers &headers = {}) const;

  const Endpoint &endpoint() const { return endpoint_; }

private:
  Endpoint endpoint_;
  std::chrono::seconds timeout_;
};

void sleep_for_backoff(std::chrono::milliseconds delay);

// Runs `call` until it succeeds, a non-retryable error occurs, or the attempts
// run out. The final error names the endpoint and the attempt count.
template <typename Fn>
auto with_retries(const RetryPolicy &policy, const std::string &endpoint_url, Fn &&call,
                  int *attempts_made = nullptr) -> decltype(call()) {
  for (int attempt = 1;; ++attempt) {
    if (attempts_made)
      *attempts_made = attempt;
    try {
      return call();
    } catch (const NetworkError &e) {
      if (!e.retryable() || attempt >= policy.attempts) {
        throw NetworkError(endpoint_url + ": " + e.what() + " (after " + std::to_string(attempt) +
                               (attempt == 1 ? " attempt)" : " attempts)"),
                           false);
      }
    }
    if (policy.backoff.count() > 0)
      sleep_for_backoff(policy.backoff * attempt);
  }
}

} // namespace intentsynth
