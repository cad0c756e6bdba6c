#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "igtkit/detail/strings.hpp"
#include "igtkit/eval.hpp"
#include "igtkit/glosser.hpp"
#include "json.hpp"

namespace igt {

struct Timeout : Error {
  explicit Timeout(const std::string& what) : Error(what) {}
};

struct RemoteError : Error {
  int status;
  std::string body;
  RemoteError(int status_, std::string body_)
      : Error("remote endpoint returned status " + std::to_string(status_)),
        status(status_),
        body(std::move(body_)) {}
};

struct MalformedResponse : Error {
  explicit MalformedResponse(const std::string& what) : Error(what) {}
};

struct RemoteConfig {
  std::string endpoint;  // e.g. http://host:8080/generate
  int timeout_seconds = 30;
  int retries = 3;  // additional attempts after the first
  int max_new_tokens = 256;
  std::string auth_token;  // sent as "Authorization: Bearer <token>"
  std::size_t max_in_flight = 4;
  int backoff_ms = 250;  // doubles per retry
};

using ResponseExtractor = std::function<std::string(const std::string& body)>;

// Text-generation-inference response shapes: either a single object or an
// array of objects carrying "generated_text".
inline std::string tgi_extract(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(std::string("response is not JSON: ") + e.what());
  }
  const nlohmann::json* obj = &j;
  if (j.is_array()) {
    if (j.empty()) throw MalformedResponse("response array is empty");
    obj = &j.front();
  }
  if (!obj->is_object() || !obj->contains("generated_text") ||
      !(*obj)["generated_text"].is_string())
    throw MalformedResponse("response lacks a generated_text string");
  return (*obj)["generated_text"].get<std::string>();
}

namespace detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // starts with '/'
};

inline SplitUrl split_url(const std::string& url) {
  std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw Error("endpoint URL needs a scheme: " + url);
  std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline bool transient_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

inline bool timeout_error(httplib::Error e) {
  return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read ||
         e == httplib::Error::Write;
}

}  // namespace detail

inline std::string request_remote_gloss(const RemoteConfig& config, const std::string& prompt,
                                        const ResponseExtractor& extract = tgi_extract) {
  detail::SplitUrl url = detail::split_url(config.endpoint);
  httplib::Client client(url.base);
  client.set_connection_timeout(config.timeout_seconds, 0);
  client.set_read_timeout(config.timeout_seconds, 0);
  client.set_write_timeout(config.timeout_seconds, 0);
  if (!config.auth_token.empty()) client.set_bearer_token_auth(config.auth_token);

  nlohmann::ordered_json body;
  body["inputs"] = prompt;
  body["parameters"]["max_new_tokens"] = config.max_new_tokens;
  const std::string payload = body.dump();

  int attempts = config.retries + 1;
  bool timed_out = false;
  int last_status = 0;
  std::string last_body;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      auto wait = std::chrono::milliseconds(
          static_cast<long long>(config.backoff_ms) * (1ll << (attempt - 1)));
      std::this_thread::sleep_for(wait);
    }
    httplib::Result res = client.Post(url.path, payload, "application/json");
    if (!res) {
      timed_out = detail::timeout_error(res.error());
      last_status = 0;
      last_body = httplib::to_string(res.error());
      continue;  // transport failures are transient
    }
    if (res->status >= 200 && res->status < 300) {
      std::string text = extract(res->body);
      if (detail::starts_with(text, prompt)) text.erase(0, prompt.size());
      return std::string(detail::trim(text));
    }
    if (!detail::transient_status(res->status)) throw RemoteError(res->status, res->body);
    timed_out = false;
    last_status = res->status;
    last_body = res->body;
  }
  if (timed_out && last_status == 0)
    throw Timeout("no response from " + config.endpoint + " after " +
                  std::to_string(attempts) + " attempts");
  throw RemoteError(last_status, last_body);
}

// Sends a batch with at most max_in_flight concurrent requests; results
// come back in input order regardless of completion order. The first
// failure (by input position) is rethrown after all workers finish.
inline std::vector<Prediction> remote_predict(const RemoteConfig& config,
                                              const std::vector<PromptRecord>& records,
                                              const ResponseExtractor& extract = tgi_extract) {
  std::vector<Prediction> out(records.size());
  if (records.empty()) return out;

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(records.size());
  std::size_t workers = std::max<std::size_t>(1, std::min(config.max_in_flight, records.size()));

  auto run = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        out[i] = {records[i].example_id, request_remote_gloss(config, records[i].prompt, extract)};
      } catch (...) {
        failures[i] = std::current_exception();
        out[i] = {records[i].example_id, std::string{}};
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();

  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace igt
