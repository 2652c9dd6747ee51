#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "geobench/http_backends.hpp"

#include <cstdlib>
#include <regex>

#include <fmt/core.h>
#include <httplib.h>
#include <openssl/evp.h>

#include "geobench/errors.hpp"

namespace geobench {

HttpEndpoint endpoint_from_env(std::string model) {
    HttpEndpoint e;
    const char* base = std::getenv("OPENAI_BASE_URL");
    const char* key = std::getenv("OPENAI_API_KEY");
    e.base_url = base ? base : "https://api.openai.com/v1";
    e.api_key = key ? key : "";
    e.model = std::move(model);
    return e;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

namespace {

Json post_chat(const HttpEndpoint& endpoint, Json messages) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint.base_url, m, url)) {
        throw BackendUnavailable(fmt::format("bad endpoint url '{}'", endpoint.base_url));
    }
    std::string prefix = m[2].matched ? m[2].str() : "";
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(m[1].str());
    client.set_connection_timeout(endpoint.timeout);
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    if (!endpoint.api_key.empty()) client.set_bearer_token_auth(endpoint.api_key);

    const Json body{{"model", endpoint.model}, {"messages", std::move(messages)}};
    auto res = client.Post(prefix + "/chat/completions", body.dump(), "application/json");
    if (!res) {
        throw BackendUnavailable(
            fmt::format("{}: {}", endpoint.base_url, httplib::to_string(res.error())));
    }
    if (res->status != 200) {
        throw BackendUnavailable(
            fmt::format("{}: HTTP {}: {}", endpoint.base_url, res->status, res->body.substr(0, 300)));
    }
    try {
        auto reply = Json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content");
    } catch (const Json::exception& e) {
        throw BackendUnavailable(fmt::format("{}: unexpected response: {}", endpoint.base_url, e.what()));
    }
}

std::string content_text(const Json& content) {
    if (content.is_string()) return content.get<std::string>();
    if (content.is_null()) return {};
    throw BackendUnavailable("reply content is not text");
}

} // namespace

std::string ChatModel::generate(const std::vector<Message>& context, const std::string&) {
    // The manifest already sits in the system message.
    Json messages = Json::array();
    for (const auto& m : context) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    return content_text(post_chat(endpoint_, std::move(messages)));
}

std::string ChatJudge::ask(const std::string& prompt, std::span<const std::uint8_t> png) {
    Json content = Json::array();
    content.push_back({{"type", "text"}, {"text", prompt}});
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:image/png;base64," + base64_encode(png)}}}});
    Json messages = Json::array({Json{{"role", "user"}, {"content", std::move(content)}}});
    return content_text(post_chat(endpoint_, std::move(messages)));
}

} // namespace geobench
