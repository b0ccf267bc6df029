#pragma once

#include "evogec/errors.hpp"

#include <json.hpp>

#include <atomic>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evogec {

struct CompletionRequest {
    std::string prompt_text;
    int max_output_tokens = 256;
    double temperature = 0.0;
    std::vector<std::string> stop_sequences;
    std::string tag;  // ledger bucket, e.g. "gec" or "evolve"
};

struct CompletionResponse {
    std::string text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::string provider_id;
    bool from_cache = false;
};

class Provider {
  public:
    virtual ~Provider() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string provider_id() const = 0;
};

struct Price {
    double input_per_mtok = 0.0;
    double output_per_mtok = 0.0;
};

struct UsageKey {
    std::string provider_id;
    std::string tag;
    auto operator<=>(const UsageKey&) const = default;
};

struct Usage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t call_count = 0;   // completed provider calls
    std::int64_t cache_hits = 0;   // served from cache; no token charge
};

struct CostLine {
    std::string provider_id;
    std::string tag;
    Usage usage;
    double cost = 0.0;
};

// Token and call accounting per (provider, tag). Thread-safe; totals only grow.
class CostLedger {
  public:
    void set_price(const std::string& provider_id, Price price);
    std::optional<Price> price_for(const std::string& provider_id) const;

    void record_call(const std::string& provider_id, const std::string& tag,
                     std::int64_t input_tokens, std::int64_t output_tokens);
    void record_cache_hit(const std::string& provider_id, const std::string& tag);

    std::map<UsageKey, Usage> snapshot() const;

    // cost = input/1e6 * input_price + output/1e6 * output_price. Every provider
    // in the ledger needs a price entry; ConfigError otherwise.
    std::vector<CostLine> estimate_cost() const;
    double total_cost() const;

    nlohmann::json to_json() const;
    void restore(const nlohmann::json& state);
    void write_csv(const std::filesystem::path& path) const;

  private:
    mutable std::mutex mutex_;
    std::map<UsageKey, Usage> usage_;
    std::map<std::string, Price> prices_;
};

// On-disk store, one JSON file per completion, keyed by a stable hash of
// (provider, prompt, decoding parameters). A warm cache replays an experiment
// without touching the provider.
class ResponseCache {
  public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<CompletionResponse> lookup(const std::string& provider_id,
                                             const CompletionRequest& request) const;
    void store(const std::string& provider_id, const CompletionRequest& request,
               const CompletionResponse& response);

    static std::string cache_key(const std::string& provider_id,
                                 const CompletionRequest& request);

    const std::filesystem::path& dir() const { return dir_; }

  private:
    std::filesystem::path dir_;
};

struct RetryPolicy {
    int max_retries = 3;  // transient-error retries after the first attempt
    int initial_delay_ms = 500;
    double backoff_multiplier = 2.0;
    int max_delay_ms = 8000;
};

// Cache-first completion with bounded exponential-backoff retries. Cache hits
// return the original text and token counts and book as hits, not calls.
// Whitespace-only completions surface as refusal errors and are never cached.
CompletionResponse complete_cached(Provider& provider, ResponseCache* cache,
                                   const CompletionRequest& request, CostLedger& ledger,
                                   const RetryPolicy& retry = {});

struct ScriptRule {
    std::string contains;  // substring matcher on the prompt; empty matches all
    std::string response;
};

// Deterministic offline provider: the first matching rule wins; an unmatched
// request is a typed error. Token counts are whitespace token counts.
class ScriptedProvider : public Provider {
  public:
    explicit ScriptedProvider(std::vector<ScriptRule> rules, std::string id = "scripted");
    ScriptedProvider(std::initializer_list<ScriptRule> rules, std::string id = "scripted")
        : ScriptedProvider(std::vector<ScriptRule>(rules), std::move(id)) {}

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string provider_id() const override { return id_; }
    std::int64_t calls() const { return calls_.load(); }

  private:
    std::vector<ScriptRule> rules_;
    std::string id_;
    std::atomic<std::int64_t> calls_{0};
};

std::int64_t whitespace_token_count(std::string_view text);

}  // namespace evogec
