#pragma once

#include "evogec/corpus.hpp"
#include "evogec/llm.hpp"
#include "evogec/metrics.hpp"

#include <functional>
#include <memory>
#include <unordered_map>

namespace evogec {

// Routing marker embedded in rendered queries so corpus-backed providers can
// identify the target utterance. Format: [utt:<id>]
std::string utterance_marker(std::string_view id);
std::optional<std::string> find_utterance_marker(std::string_view text);

// Answers a rendered query by looking up the marked utterance and applying a
// selector. Owns its copy of the corpus. Deterministic; test/offline use.
class UtteranceProvider : public Provider {
  public:
    using Selector = std::function<std::string(const Utterance&)>;

    UtteranceProvider(Corpus corpus, Selector selector, std::string id);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string provider_id() const override { return id_; }
    std::int64_t calls() const { return calls_.load(); }

  private:
    Corpus corpus_;
    std::unordered_map<std::string, std::size_t> by_id_;
    Selector selector_;
    std::string id_;
    std::atomic<std::int64_t> calls_{0};
};

// Returns the hypothesis closest to the reference; the re-ranking ceiling.
std::unique_ptr<UtteranceProvider> make_oracle_provider(Corpus corpus, NormPolicy policy = {});

// Echoes hypotheses[index]; index 0 reproduces the uncorrected top hypothesis.
std::unique_ptr<UtteranceProvider> make_echo_provider(Corpus corpus, std::size_t index = 0);

// Echoes the reference itself; the pipeline's upper bound.
std::unique_ptr<UtteranceProvider> make_reference_provider(Corpus corpus);

// Offline stand-in for whole optimization runs: requests carrying an
// utterance marker route through the wrapped provider; anything else (the
// evolution operator's meta prompts) gets a deterministic synthetic child
// prompt derived from the request hash.
class OfflineProvider : public Provider {
  public:
    explicit OfflineProvider(std::unique_ptr<UtteranceProvider> inner);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string provider_id() const override { return inner_->provider_id(); }

  private:
    std::unique_ptr<UtteranceProvider> inner_;
};

}  // namespace evogec
