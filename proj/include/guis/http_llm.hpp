#pragma once

// Chat-completions client. Link with guis::http, which defines
// CPPHTTPLIB_OPENSSL_SUPPORT so https endpoints work.

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "guis/clients.hpp"
#include "httplib.h"
#include "json.hpp"

namespace guis {

struct LlmConfig {
  std::string endpoint;  // full URL, e.g. https://api.example.com/v1/chat/completions
  std::string model;
  std::string api_key;
  int timeout_ms = 30000;
  int max_retries = 2;
  int backoff_ms = 250;  // doubled after every failed attempt

  // GUIS_LLM_ENDPOINT, GUIS_LLM_MODEL, GUIS_LLM_API_KEY, GUIS_LLM_TIMEOUT_MS.
  static LlmConfig from_env() {
    auto get = [](const char* name) -> std::string {
      const char* v = std::getenv(name);
      return v ? std::string(v) : std::string();
    };
    LlmConfig c;
    c.endpoint = get("GUIS_LLM_ENDPOINT");
    c.model = get("GUIS_LLM_MODEL");
    c.api_key = get("GUIS_LLM_API_KEY");
    if (const auto t = get("GUIS_LLM_TIMEOUT_MS"); !t.empty()) {
      try {
        c.timeout_ms = std::stoi(t);
      } catch (const std::exception&) {
        throw FormatError("GUIS_LLM_TIMEOUT_MS must be an integer");
      }
    }
    return c;
  }
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw FormatError("endpoint must be an absolute URL");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

}  // namespace detail

class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(LlmConfig cfg) : cfg_(std::move(cfg)) {}

  std::string complete(std::string_view prompt, const Image* = nullptr) override {
    if (cfg_.api_key.empty()) throw AuthError("no API key configured");
    if (cfg_.endpoint.empty()) throw TransportError("no endpoint configured");
    const auto url = detail::split_url(cfg_.endpoint);
    const nlohmann::json body{{"model", cfg_.model},
                              {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    const std::string payload = body.dump();

    httplib::Client client(url.origin);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_bearer_token_auth(cfg_.api_key);

    std::string last_error;
    int backoff = cfg_.backoff_ms;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
      const auto started = std::chrono::steady_clock::now();
      auto res = client.Post(url.path, payload, "application/json");
      ++requests_;
      if (!res) {
        const auto elapsed = std::chrono::steady_clock::now() - started;
        if (res.error() == httplib::Error::ConnectionTimeout || elapsed >= timeout * 9 / 10)
          throw TimeoutError("no response within " + std::to_string(cfg_.timeout_ms) + " ms");
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403) throw AuthError("HTTP " + std::to_string(res->status));
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) throw TransportError("HTTP " + std::to_string(res->status));
      return extract_reply(res->body);
    }
    throw TransportError(last_error + " after " + std::to_string(cfg_.max_retries + 1) + " attempts");
  }

  int requests_sent() const noexcept { return requests_; }

  static std::string extract_reply(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed completion response: ") + e.what());
    }
  }

 private:
  LlmConfig cfg_;
  int requests_ = 0;
};

}  // namespace guis
