#include "evogec/providers.hpp"

#include "evogec/util.hpp"

#include <utility>

namespace evogec {

std::string utterance_marker(std::string_view id) {
    return "[utt:" + std::string(id) + "]";
}

std::optional<std::string> find_utterance_marker(std::string_view text) {
    const std::string_view open = "[utt:";
    const std::size_t begin = text.find(open);
    if (begin == std::string_view::npos) return std::nullopt;
    const std::size_t end = text.find(']', begin + open.size());
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(begin + open.size(), end - begin - open.size()));
}

UtteranceProvider::UtteranceProvider(Corpus corpus, Selector selector, std::string id)
    : corpus_(std::move(corpus)), selector_(std::move(selector)), id_(std::move(id)) {
    for (std::size_t i = 0; i < corpus_.utterances.size(); ++i) {
        by_id_.emplace(corpus_.utterances[i].id, i);
    }
}

CompletionResponse UtteranceProvider::complete(const CompletionRequest& request) {
    calls_.fetch_add(1);
    const auto id = find_utterance_marker(request.prompt_text);
    if (!id) {
        throw ProviderError(ProviderErrorKind::bad_request,
                            "request carries no utterance marker; provider '" + id_ +
                                "' cannot route it");
    }
    const auto it = by_id_.find(*id);
    if (it == by_id_.end()) {
        throw ProviderError(ProviderErrorKind::bad_request,
                            "unknown utterance id '" + *id + "'");
    }
    CompletionResponse response;
    response.text = selector_(corpus_.utterances[it->second]);
    response.input_tokens = whitespace_token_count(request.prompt_text);
    response.output_tokens = whitespace_token_count(response.text);
    response.provider_id = id_;
    return response;
}

std::unique_ptr<UtteranceProvider> make_oracle_provider(Corpus corpus, NormPolicy policy) {
    return std::make_unique<UtteranceProvider>(
        std::move(corpus),
        [policy](const Utterance& utt) { return utt.hypotheses.at(oracle_choice(utt, policy)); },
        "oracle");
}

std::unique_ptr<UtteranceProvider> make_echo_provider(Corpus corpus, std::size_t index) {
    return std::make_unique<UtteranceProvider>(
        std::move(corpus),
        [index](const Utterance& utt) {
            if (index >= utt.hypotheses.size()) {
                throw ProviderError(ProviderErrorKind::bad_request,
                                    "utterance '" + utt.id + "' has no hypothesis " +
                                        std::to_string(index));
            }
            return utt.hypotheses[index];
        },
        "echo-" + std::to_string(index));
}

std::unique_ptr<UtteranceProvider> make_reference_provider(Corpus corpus) {
    return std::make_unique<UtteranceProvider>(
        std::move(corpus),
        [](const Utterance& utt) {
            if (!utt.reference) {
                throw ProviderError(ProviderErrorKind::bad_request,
                                    "utterance '" + utt.id + "' has no reference");
            }
            return *utt.reference;
        },
        "reference");
}

OfflineProvider::OfflineProvider(std::unique_ptr<UtteranceProvider> inner)
    : inner_(std::move(inner)) {}

CompletionResponse OfflineProvider::complete(const CompletionRequest& request) {
    if (find_utterance_marker(request.prompt_text)) return inner_->complete(request);
    CompletionResponse response;
    response.text = "<prompt>Review the numbered hypotheses and report the single most "
                    "accurate transcription (variant " +
                    hex64(fnv1a64(request.prompt_text)).substr(0, 8) + ").</prompt>";
    response.input_tokens = whitespace_token_count(request.prompt_text);
    response.output_tokens = whitespace_token_count(response.text);
    response.provider_id = provider_id();
    return response;
}

}  // namespace evogec
