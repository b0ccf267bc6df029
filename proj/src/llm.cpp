#include "evogec/llm.hpp"

#include "evogec/util.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <thread>

namespace evogec {

using nlohmann::json;

void CostLedger::set_price(const std::string& provider_id, Price price) {
    std::lock_guard<std::mutex> lock(mutex_);
    prices_[provider_id] = price;
}

std::optional<Price> CostLedger::price_for(const std::string& provider_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = prices_.find(provider_id);
    if (it == prices_.end()) return std::nullopt;
    return it->second;
}

void CostLedger::record_call(const std::string& provider_id, const std::string& tag,
                             std::int64_t input_tokens, std::int64_t output_tokens) {
    std::lock_guard<std::mutex> lock(mutex_);
    Usage& usage = usage_[{provider_id, tag}];
    usage.input_tokens += input_tokens;
    usage.output_tokens += output_tokens;
    usage.call_count += 1;
}

void CostLedger::record_cache_hit(const std::string& provider_id, const std::string& tag) {
    std::lock_guard<std::mutex> lock(mutex_);
    usage_[{provider_id, tag}].cache_hits += 1;
}

std::map<UsageKey, Usage> CostLedger::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return usage_;
}

std::vector<CostLine> CostLedger::estimate_cost() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<CostLine> lines;
    lines.reserve(usage_.size());
    for (const auto& [key, usage] : usage_) {
        auto it = prices_.find(key.provider_id);
        if (it == prices_.end()) {
            throw ConfigError("no price entry for provider '" + key.provider_id + "'");
        }
        const Price& price = it->second;
        const double cost = static_cast<double>(usage.input_tokens) / 1e6 * price.input_per_mtok +
                            static_cast<double>(usage.output_tokens) / 1e6 * price.output_per_mtok;
        lines.push_back({key.provider_id, key.tag, usage, cost});
    }
    return lines;
}

double CostLedger::total_cost() const {
    double total = 0.0;
    for (const CostLine& line : estimate_cost()) total += line.cost;
    return total;
}

json CostLedger::to_json() const {
    std::lock_guard<std::mutex> lock(mutex_);
    json usage = json::array();
    for (const auto& [key, u] : usage_) {
        usage.push_back({{"provider_id", key.provider_id},
                         {"tag", key.tag},
                         {"input_tokens", u.input_tokens},
                         {"output_tokens", u.output_tokens},
                         {"call_count", u.call_count},
                         {"cache_hits", u.cache_hits}});
    }
    json prices = json::object();
    for (const auto& [provider_id, price] : prices_) {
        prices[provider_id] = {{"input_per_mtok", price.input_per_mtok},
                               {"output_per_mtok", price.output_per_mtok}};
    }
    return {{"usage", usage}, {"prices", prices}};
}

void CostLedger::restore(const json& state) {
    std::lock_guard<std::mutex> lock(mutex_);
    usage_.clear();
    for (const json& entry : state.at("usage")) {
        Usage usage;
        usage.input_tokens = entry.at("input_tokens").get<std::int64_t>();
        usage.output_tokens = entry.at("output_tokens").get<std::int64_t>();
        usage.call_count = entry.at("call_count").get<std::int64_t>();
        usage.cache_hits = entry.at("cache_hits").get<std::int64_t>();
        usage_[{entry.at("provider_id").get<std::string>(), entry.at("tag").get<std::string>()}] =
            usage;
    }
    if (state.contains("prices")) {
        for (const auto& [provider_id, price] : state.at("prices").items()) {
            prices_[provider_id] = {price.at("input_per_mtok").get<double>(),
                                    price.at("output_per_mtok").get<double>()};
        }
    }
}

void CostLedger::write_csv(const std::filesystem::path& path) const {
    std::string out = "provider_id,tag,calls,cache_hits,input_tokens,output_tokens,cost_usd\n";
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& [key, usage] : usage_) {
        out += key.provider_id + "," + key.tag + "," + std::to_string(usage.call_count) + "," +
               std::to_string(usage.cache_hits) + "," + std::to_string(usage.input_tokens) + "," +
               std::to_string(usage.output_tokens) + ",";
        auto it = prices_.find(key.provider_id);
        if (it != prices_.end()) {
            const double cost =
                static_cast<double>(usage.input_tokens) / 1e6 * it->second.input_per_mtok +
                static_cast<double>(usage.output_tokens) / 1e6 * it->second.output_per_mtok;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6f", cost);
            out += buf;
        }
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string ResponseCache::cache_key(const std::string& provider_id,
                                     const CompletionRequest& request) {
    std::string canon;
    canon += provider_id;
    canon += '\x1f';
    canon += request.prompt_text;
    canon += '\x1f';
    canon += std::to_string(request.max_output_tokens);
    canon += '\x1f';
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", request.temperature);
    canon += buf;
    canon += '\x1f';
    for (const std::string& stop : request.stop_sequences) {
        canon += stop;
        canon += '\x1e';
    }
    // Two fnv streams for a 128-bit key; the stored prompt text is verified on
    // lookup anyway.
    return hex64(fnv1a64(canon)) + hex64(fnv1a64(canon, 0x9e3779b97f4a7c15ULL));
}

std::optional<CompletionResponse> ResponseCache::lookup(const std::string& provider_id,
                                                        const CompletionRequest& request) const {
    const std::filesystem::path file = dir_ / (cache_key(provider_id, request) + ".json");
    std::error_code ec;
    if (!std::filesystem::exists(file, ec)) return std::nullopt;
    json entry;
    try {
        entry = json::parse(read_text_file(file));
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable entries behave like misses
    }
    if (entry.value("provider_id", "") != provider_id ||
        entry.value("prompt_text", "") != request.prompt_text) {
        return std::nullopt;
    }
    CompletionResponse response;
    response.text = entry.at("text").get<std::string>();
    response.input_tokens = entry.at("input_tokens").get<std::int64_t>();
    response.output_tokens = entry.at("output_tokens").get<std::int64_t>();
    response.provider_id = provider_id;
    response.from_cache = true;
    return response;
}

void ResponseCache::store(const std::string& provider_id, const CompletionRequest& request,
                          const CompletionResponse& response) {
    json entry = {{"provider_id", provider_id},
                  {"prompt_text", request.prompt_text},
                  {"max_output_tokens", request.max_output_tokens},
                  {"temperature", request.temperature},
                  {"stop_sequences", request.stop_sequences},
                  {"text", response.text},
                  {"input_tokens", response.input_tokens},
                  {"output_tokens", response.output_tokens}};
    const std::filesystem::path file = dir_ / (cache_key(provider_id, request) + ".json");
    write_text_file_atomic(file, entry.dump(2) + "\n");
}

CompletionResponse complete_cached(Provider& provider, ResponseCache* cache,
                                   const CompletionRequest& request, CostLedger& ledger,
                                   const RetryPolicy& retry) {
    if (request.prompt_text.empty()) {
        throw ConfigError("completion request has an empty prompt");
    }
    const std::string pid = provider.provider_id();
    if (cache) {
        if (auto hit = cache->lookup(pid, request)) {
            ledger.record_cache_hit(pid, request.tag);
            return *hit;
        }
    }

    int delay_ms = retry.initial_delay_ms;
    for (int attempt = 0;; ++attempt) {
        try {
            CompletionResponse response = provider.complete(request);
            if (trim_ws(response.text).empty()) {
                throw ProviderError(ProviderErrorKind::refusal,
                                    "provider '" + pid + "' returned an empty completion");
            }
            response.provider_id = pid;
            response.from_cache = false;
            ledger.record_call(pid, request.tag, response.input_tokens, response.output_tokens);
            if (cache) cache->store(pid, request, response);
            return response;
        } catch (const ProviderError& err) {
            if (!err.retryable() || attempt >= retry.max_retries) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = std::min(static_cast<int>(delay_ms * retry.backoff_multiplier),
                                retry.max_delay_ms);
        }
    }
}

ScriptedProvider::ScriptedProvider(std::vector<ScriptRule> rules, std::string id)
    : rules_(std::move(rules)), id_(std::move(id)) {}

CompletionResponse ScriptedProvider::complete(const CompletionRequest& request) {
    calls_.fetch_add(1);
    for (const ScriptRule& rule : rules_) {
        if (rule.contains.empty() ||
            request.prompt_text.find(rule.contains) != std::string::npos) {
            CompletionResponse response;
            response.text = rule.response;
            response.input_tokens = whitespace_token_count(request.prompt_text);
            response.output_tokens = whitespace_token_count(rule.response);
            response.provider_id = id_;
            return response;
        }
    }
    throw ProviderError(ProviderErrorKind::unscripted,
                        "no script rule matches request starting with '" +
                            request.prompt_text.substr(0, 60) + "'");
}

std::int64_t whitespace_token_count(std::string_view text) {
    return static_cast<std::int64_t>(split_whitespace(text).size());
}

}  // namespace evogec
