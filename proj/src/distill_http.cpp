// Remote-service clients: the OpenAI-style chat client used for online
// distillation/auditing and the embedding-service client. Both retry with
// exponential backoff and surface failures as typed errors.

#include <chrono>
#include <cstdlib>
#include <thread>

#include "sentrec/distill.hpp"
#include "sentrec/embed.hpp"
#include "sentrec/errors.hpp"

#include "httplib.h"
#include "json.hpp"

namespace sentrec {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /v1/...
};

SplitUrl split_url(const std::string& endpoint) {
  const size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos)
    throw ConfigError("endpoint '" + endpoint + "' lacks a scheme (use http://host:port/path)");
  if (endpoint.rfind("https://", 0) == 0)
    throw ConfigError("https endpoints are not supported by this build; use http");
  const size_t slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

// POSTs `body` as JSON, retrying per the (attempts, backoff) policy. Returns
// the raw response body of the first 2xx answer.
std::string post_with_retries(const std::string& endpoint, const std::string& body,
                              int timeout_sec, int max_retries, int backoff_ms) {
  const SplitUrl url = split_url(endpoint);
  httplib::Headers headers;
  if (const char* key = std::getenv("SENTREC_API_KEY"); key != nullptr && key[0] != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  const int attempts = 1 + std::max(0, max_retries);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const auto delay = std::chrono::milliseconds(
          static_cast<long long>(backoff_ms) * (1LL << (attempt - 1)));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(url.base);
    client.set_connection_timeout(timeout_sec, 0);
    client.set_read_timeout(timeout_sec, 0);
    client.set_write_timeout(timeout_sec, 0);
    httplib::Result res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    return res->body;
  }
  throw ClientError("request to " + endpoint + " failed after " + std::to_string(attempts) +
                    " attempts: " + last_error);
}

}  // namespace

namespace distill {

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ConfigError("chat client: endpoint must be set");
  split_url(config_.endpoint);  // validates the shape up front
  if (config_.timeout_sec < 1) throw ConfigError("chat client: timeout must be >= 1s");
  if (config_.max_retries < 0) throw ConfigError("chat client: max_retries must be >= 0");
}

std::string HttpChatClient::complete(const std::string& system_text,
                                     const std::string& assistant_text,
                                     const std::string& user_text) {
  json messages = json::array();
  if (!system_text.empty()) messages.push_back({{"role", "system"}, {"content", system_text}});
  if (!assistant_text.empty())
    messages.push_back({{"role", "assistant"}, {"content", assistant_text}});
  messages.push_back({{"role", "user"}, {"content", user_text}});
  const json body{
      {"model", config_.model},
      {"messages", messages},
      {"temperature", config_.temperature},
  };

  const std::string response = post_with_retries(config_.endpoint, body.dump(),
                                                 config_.timeout_sec, config_.max_retries,
                                                 config_.backoff_ms);
  const json parsed = json::parse(response, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
      !parsed["choices"][0]["message"].contains("content") ||
      !parsed["choices"][0]["message"]["content"].is_string()) {
    throw ClientError("chat endpoint returned an unexpected body: " +
                      response.substr(0, 200));
  }
  return parsed["choices"][0]["message"]["content"].get<std::string>();
}

}  // namespace distill

namespace embed {

RemoteEmbedder::RemoteEmbedder(Config cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("remote embedder: endpoint must be set");
  split_url(cfg_.endpoint);
  if (cfg_.timeout_sec < 1) throw ConfigError("remote embedder: timeout must be >= 1s");
}

RemoteEmbedder::~RemoteEmbedder() = default;

std::string RemoteEmbedder::name() const { return "remote:" + cfg_.endpoint; }

std::vector<double> RemoteEmbedder::embed(std::string_view token) const {
  if (token.empty()) throw Error("remote embedder: empty token");
  const std::string key(token);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }

  const json body{{"input", json::array({key})}};
  const std::string response = post_with_retries(cfg_.endpoint, body.dump(), cfg_.timeout_sec,
                                                 cfg_.max_retries, cfg_.backoff_ms);
  const json parsed = json::parse(response, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("vectors") || !parsed["vectors"].is_array() ||
      parsed["vectors"].size() != 1 || !parsed["vectors"][0].is_array()) {
    throw ClientError("embedding endpoint returned an unexpected body: " +
                      response.substr(0, 200));
  }
  std::vector<double> vec;
  vec.reserve(parsed["vectors"][0].size());
  for (const json& v : parsed["vectors"][0]) {
    if (!v.is_number()) throw ClientError("embedding endpoint returned a non-numeric entry");
    vec.push_back(v.get<double>());
  }
  if (vec.empty()) throw ClientError("embedding endpoint returned an empty vector");

  std::lock_guard<std::mutex> lock(mu_);
  if (dim_ == -1) {
    dim_ = static_cast<int>(vec.size());
  } else if (dim_ != static_cast<int>(vec.size())) {
    throw ClientError("embedding endpoint changed dimension from " + std::to_string(dim_) +
                      " to " + std::to_string(vec.size()));
  }
  cache_.emplace(key, vec);
  return vec;
}

int RemoteEmbedder::dim() const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (dim_ != -1) return dim_;
  }
  embed("the");  // learn the dimension with a probe request
  std::lock_guard<std::mutex> lock(mu_);
  return dim_;
}

}  // namespace embed

}  // namespace sentrec
