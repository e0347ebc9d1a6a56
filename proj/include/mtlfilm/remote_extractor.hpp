#pragma once

// Chat-completion style HTTP extractor. Kept out of sentiment.hpp so that
// only translation units that talk to a remote endpoint pull in httplib.

#include <chrono>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mtlfilm/error.hpp"
#include "mtlfilm/sentiment.hpp"

namespace mtlfilm::sentiment {

inline constexpr const char* kApiKeyEnv = "SENTIMENT_API_KEY";

/// Serializes callers so that consecutive acquisitions are at least
/// `min_interval` apart.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RateLimiter(std::chrono::milliseconds min_interval) : min_interval_(min_interval) {}

  void acquire() {
    std::lock_guard lock(mu_);
    const auto now = Clock::now();
    if (has_last_ && now < last_ + min_interval_) {
      std::this_thread::sleep_for(last_ + min_interval_ - now);
    }
    last_ = Clock::now();
    has_last_ = true;
  }

 private:
  std::mutex mu_;
  std::chrono::milliseconds min_interval_;
  Clock::time_point last_{};
  bool has_last_ = false;
};

struct RemoteConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  std::chrono::seconds timeout{30};
  std::chrono::milliseconds min_request_interval{1000};
};

inline nlohmann::json make_chat_request(const std::string& model, const std::string& prompt) {
  return nlohmann::json{{"model", model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
}

/// Pulls choices[0].message.content out of a chat-completion reply.
inline std::string chat_reply_content(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, std::string("reply is not JSON: ") + e.what());
  }
  const auto* content = [&]() -> const nlohmann::json* {
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) return nullptr;
    const auto& first = j["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content")) return nullptr;
    return &first["message"]["content"];
  }();
  if (!content || !content->is_string()) {
    throw Error(ErrorCode::kMalformedResponse, "reply has no choices[0].message.content");
  }
  return content->get<std::string>();
}

class RemoteExtractor final : public Extractor {
 public:
  explicit RemoteExtractor(RemoteConfig config)
      : config_(std::move(config)), limiter_(config_.min_request_interval), client_(config_.base_url) {
    client_.set_connection_timeout(config_.timeout);
    client_.set_read_timeout(config_.timeout);
    if (const char* key = std::getenv(kApiKeyEnv); key && *key) {
      client_.set_bearer_token_auth(key);
    }
  }

  std::string respond(const ExtractionRequest& request) override {
    limiter_.acquire();
    std::lock_guard lock(client_mu_);
    const auto body = make_chat_request(config_.model, request.prompt).dump();
    auto res = client_.Post(config_.path, body, "application/json");
    if (!res) {
      throw Error(ErrorCode::kExtractorUnavailable,
                  "request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::kExtractorUnavailable, "HTTP status " + std::to_string(res->status));
    }
    return chat_reply_content(res->body);
  }

 private:
  RemoteConfig config_;
  RateLimiter limiter_;
  std::mutex client_mu_;
  httplib::Client client_;
};

}  // namespace mtlfilm::sentiment
