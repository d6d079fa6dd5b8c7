#include "intentsynth/http.hpp"

#include <thread>

#include <httplib.h>

namespace intentsynth {

Endpoint Endpoint::parse(const std::string &url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint URL '" + url + "' has no scheme");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw ConfigError("endpoint URL '" + url + "' must use http or https");
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint endpoint;
  endpoint.origin = url.substr(0, path_start);
  endpoint.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (endpoint.origin.size() <= scheme_end + 3)
    throw ConfigError("endpoint URL '" + url + "' has no host");
  return endpoint;
}

void sleep_for_backoff(std::chrono::milliseconds delay) { std::this_thread::sleep_for(delay); }

namespace {

httplib::Client make_client(const Endpoint &endpoint, std::chrono::seconds timeout) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(std::chrono::seconds(std::min<long>(timeout.count(), 10)));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

httplib::Headers to_headers(const Headers &headers) {
  httplib::Headers out;
  for (const auto &[k, v] : headers)
    out.emplace(k, v);
  return out;
}

HttpResponse check(const httplib::Result &result) {
  if (!result)
    throw NetworkError("transport error: " + httplib::to_string(result.error()), true);
  HttpResponse response{result->status, result->body, result->get_header_value("Content-Type")};
  if (response.status >= 200 && response.status < 300)
    return response;
  const bool retryable = response.status >= 500 || response.status == 429;
  throw NetworkError("HTTP " + std::to_string(response.status) + ": " + response.body, retryable);
}

} // namespace

HttpClient::HttpClient(Endpoint endpoint, std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

HttpResponse HttpClient::post(const std::string &body, const std::string &content_type,
                              const Headers &headers) const {
  auto client = make_client(endpoint_, timeout_);
  return check(client.Post(endpoint_.path, to_headers(headers), body, content_type));
}

HttpResponse HttpClient::post_multipart(const std::vector<MultipartField> &fields,
                                        const Headers &headers) const {
  auto client = make_client(endpoint_, timeout_);
  httplib::MultipartFormDataItems items;
  for (const auto &f : fields)
    items.push_back({f.name, f.content, f.filename, f.content_type});
  return check(client.Post(endpoint_.path, to_headers(headers), items));
}

} // namespace intentsynth
