#pragma once

#include <stdexcept>
#include <string>

namespace evogec {

// Error categories map to CLI exit codes: config=2, data=3, provider=4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

enum class ProviderErrorKind {
    network,      // transport failure or 5xx
    rate_limit,   // 429
    refusal,      // empty or refused completion
    bad_request,  // malformed request or 4xx
    unscripted,   // mock provider had no rule for the request
};

const char* to_string(ProviderErrorKind kind);

struct ProviderError : std::runtime_error {
    ProviderError(ProviderErrorKind k, const std::string& what)
        : std::runtime_error(what), kind(k) {}

    ProviderErrorKind kind;

    // Only transport-level trouble is worth retrying; refusals stay refusals.
    bool retryable() const {
        return kind == ProviderErrorKind::network || kind == ProviderErrorKind::rate_limit;
    }
};

}  // namespace evogec
