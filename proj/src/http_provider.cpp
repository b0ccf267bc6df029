#include "evogec/http_provider.hpp"

#include <httplib.h>

#include <cstdlib>

namespace evogec {

using nlohmann::json;

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}

std::string HttpProvider::provider_id() const { return config_.model; }

CompletionResponse HttpProvider::complete(const CompletionRequest& request) {
    const char* api_key = std::getenv(config_.api_key_env.c_str());
    if (api_key == nullptr || *api_key == '\0') {
        throw ConfigError("environment variable " + config_.api_key_env +
                          " is not set; the live provider needs an API key");
    }

    json body = {{"model", config_.model},
                 {"max_tokens", request.max_output_tokens},
                 {"temperature", request.temperature},
                 {"messages", json::array({{{"role", "user"}, {"content", request.prompt_text}}})}};
    if (!request.stop_sequences.empty()) body["stop_sequences"] = request.stop_sequences;

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.connect_timeout_s, 0);
    client.set_read_timeout(config_.read_timeout_s, 0);
    const httplib::Headers headers = {{"x-api-key", api_key},
                                      {"anthropic-version", config_.version_header}};

    auto result = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!result) {
        throw ProviderError(ProviderErrorKind::network,
                            "request to " + config_.base_url + " failed: " +
                                httplib::to_string(result.error()));
    }
    if (result->status == 429) {
        throw ProviderError(ProviderErrorKind::rate_limit, "rate limited (HTTP 429)");
    }
    if (result->status >= 500) {
        throw ProviderError(ProviderErrorKind::network,
                            "server error (HTTP " + std::to_string(result->status) + ")");
    }
    if (result->status != 200) {
        throw ProviderError(ProviderErrorKind::bad_request,
                            "HTTP " + std::to_string(result->status) + ": " +
                                result->body.substr(0, 200));
    }

    json payload;
    try {
        payload = json::parse(result->body);
    } catch (const json::parse_error& err) {
        throw ProviderError(ProviderErrorKind::network,
                            std::string("unparseable provider response: ") + err.what());
    }

    CompletionResponse response;
    if (payload.contains("content")) {
        for (const json& block : payload.at("content")) {
            if (block.value("type", "") == "text") {
                response.text += block.value("text", "");
            }
        }
    }
    if (payload.contains("usage")) {
        response.input_tokens = payload["usage"].value("input_tokens", std::int64_t{0});
        response.output_tokens = payload["usage"].value("output_tokens", std::int64_t{0});
    }
    response.provider_id = provider_id();
    return response;
}

}  // namespace evogec
