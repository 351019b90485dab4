#include "distsynth/chat_client.hpp"

#include <cstdlib>

#include <httplib.h>

#include "distsynth/error.hpp"

namespace distsynth {

void ProposerConfig::validate() const {
  if (endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "endpoint: no chat endpoint configured");
  if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
    throw Error(ErrorCode::InvalidConfig, "endpoint: must start with http:// or https://");
  if (model.empty()) throw Error(ErrorCode::InvalidConfig, "model: must not be empty");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature: must be >= 0");
  if (timeout.count() <= 0) throw Error(ErrorCode::InvalidConfig, "timeout: must be positive");
}

nlohmann::json chat_request_body(const ProposerConfig& cfg, const std::vector<ChatMessage>& messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", cfg.model}, {"messages", std::move(msgs)}, {"temperature", cfg.temperature}};
}

std::string chat_reply_content(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedReply, std::string("response body is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw Error(ErrorCode::MalformedReply, "response has no choices");
  const auto& first = j["choices"][0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
      !first["message"].contains("content") || !first["message"]["content"].is_string())
    throw Error(ErrorCode::MalformedReply, "first choice has no message content");
  return first["message"]["content"].get<std::string>();
}

HttpChatClient::HttpChatClient(ProposerConfig cfg, std::optional<std::string> api_key)
    : cfg_(std::move(cfg)), api_key_(std::move(api_key)) {
  cfg_.validate();
  if (!api_key_) {
    if (const char* env = std::getenv(kApiKeyEnv); env != nullptr && *env != '\0') api_key_ = env;
  }
  const auto scheme_end = cfg_.endpoint.find("://") + 3;
  const auto slash = cfg_.endpoint.find('/', scheme_end);
  origin_ = cfg_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  httplib::Client client(origin_);
  if (!client.is_valid()) throw Error(ErrorCode::LlmUnavailable, "unsupported endpoint " + origin_);
  client.set_connection_timeout(cfg_.timeout);
  client.set_read_timeout(cfg_.timeout);
  client.set_write_timeout(cfg_.timeout);
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
  auto res = client.Post(path_, headers, chat_request_body(cfg_, messages).dump(), "application/json");
  if (!res) throw Error(ErrorCode::LlmUnavailable, "request failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw Error(ErrorCode::LlmUnavailable, "endpoint returned HTTP " + std::to_string(res->status));
  return chat_reply_content(res->body);
}

}  // namespace distsynth
