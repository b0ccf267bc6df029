#pragma once

#include "evogec/llm.hpp"

#include <string>

namespace evogec {

// Messages-style HTTPS completion endpoint. The API key is read from the
// environment on every call and never lands in config files or run dirs.
struct HttpProviderConfig {
    std::string base_url = "https://api.anthropic.com";
    std::string path = "/v1/messages";
    std::string model = "claude-3-5-sonnet-20240620";
    std::string api_key_env = "ANTHROPIC_API_KEY";
    std::string version_header = "2023-06-01";
    int connect_timeout_s = 10;
    int read_timeout_s = 120;
    Price price{3.0, 15.0};
};

class HttpProvider : public Provider {
  public:
    explicit HttpProvider(HttpProviderConfig config);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string provider_id() const override;

    const HttpProviderConfig& config() const { return config_; }

  private:
    HttpProviderConfig config_;
};

}  // namespace evogec
