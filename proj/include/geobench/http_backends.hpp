#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>

#include "geobench/judge.hpp"
#include "geobench/model.hpp"

namespace geobench {

// An OpenAI-compatible chat-completions endpoint, e.g. "https://api.openai.com/v1".
struct HttpEndpoint {
    std::string base_url;
    std::string api_key;
    std::string model;
    std::chrono::seconds timeout{120};
};

// Endpoint for `model` from OPENAI_BASE_URL / OPENAI_API_KEY.
HttpEndpoint endpoint_from_env(std::string model);

std::string base64_encode(std::span<const std::uint8_t> bytes);

// Transport or protocol failures raise BackendUnavailable.
class ChatModel final : public ModelClient {
public:
    explicit ChatModel(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string generate(const std::vector<Message>& context, const std::string& manifest) override;

private:
    HttpEndpoint endpoint_;
};

class ChatJudge final : public JudgeClient {
public:
    explicit ChatJudge(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string ask(const std::string& prompt, std::span<const std::uint8_t> png) override;

private:
    HttpEndpoint endpoint_;
};

} // namespace geobench
