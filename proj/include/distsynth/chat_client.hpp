#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "distsynth/prompt.hpp"

namespace distsynth {

inline constexpr const char* kApiKeyEnv = "DISTSYNTH_API_KEY";
inline constexpr const char* kEndpointEnv = "DISTSYNTH_LLM_ENDPOINT";

struct ProposerConfig {
  std::string endpoint;  // http[s]://host[:port]/path
  std::string model = "gpt-4.1-nano";
  double temperature = 0.8;
  std::size_t max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  // First backoff delay; doubles after every failed attempt.
  std::chrono::milliseconds retry_base{1000};

  // Throws Error(InvalidConfig).
  void validate() const;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Content of the first choice. Transport failures and non-2xx statuses
  // raise LlmUnavailable; a body without choices[0].message.content raises
  // MalformedReply.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

// OpenAI-style chat completion request body.
nlohmann::json chat_request_body(const ProposerConfig& cfg, const std::vector<ChatMessage>& messages);
// Errors: MalformedReply.
std::string chat_reply_content(const std::string& body);

class HttpChatClient final : public ChatClient {
 public:
  // The bearer token is read from kApiKeyEnv when api_key is not given.
  explicit HttpChatClient(ProposerConfig cfg, std::optional<std::string> api_key = std::nullopt);
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  ProposerConfig cfg_;
  std::optional<std::string> api_key_;
  std::string origin_;
  std::string path_;
};

}  // namespace distsynth
