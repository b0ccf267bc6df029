#pragma once

// Shared scaffolding for the test binaries: temp dirs, synthetic corpora,
// provider decorators and scripted scorers.

#include "evogec/corpus.hpp"
#include "evogec/evolve.hpp"
#include "evogec/llm.hpp"
#include "evogec/providers.hpp"
#include "evogec/util.hpp"

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using namespace evogec;

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& prefix = "evogec-test-") {
        static std::atomic<std::uint64_t> counter{0};
        path = std::filesystem::temp_directory_path() /
               (prefix + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline const std::vector<std::string>& test_vocab() {
    static const std::vector<std::string> vocab = {
        "alpha", "bravo", "charlie", "delta",  "echo",  "foxtrot",
        "golf",  "hotel", "india",   "juliet", "kilo",  "lima"};
    return vocab;
}

// Labeled corpus with 5 hypotheses per utterance: hypothesis k carries up to
// k+1 random perturbations, and occasionally one hypothesis is the reference.
inline Corpus make_synthetic_corpus(std::uint64_t seed, std::size_t n, bool labeled = true) {
    const auto& vocab = test_vocab();
    std::mt19937_64 rng(seed);
    Corpus corpus;
    corpus.name = "synthetic";
    corpus.split = Split::other;
    for (std::size_t i = 0; i < n; ++i) {
        Utterance utt;
        utt.id = "utt-" + std::to_string(i);
        const std::size_t len = 3 + bounded_rand(rng, 8);
        std::vector<std::string> ref;
        for (std::size_t w = 0; w < len; ++w) {
            ref.push_back(vocab[bounded_rand(rng, vocab.size())]);
        }
        if (labeled) utt.reference = join(ref, " ");
        const std::size_t exact_at = bounded_rand(rng, 8);  // >= 5 means no exact hypothesis
        for (std::size_t k = 0; k < 5; ++k) {
            std::vector<std::string> hyp = ref;
            if (k != exact_at) {
                const std::size_t edits = bounded_rand(rng, k + 2);
                for (std::size_t e = 0; e < edits; ++e) {
                    const std::uint64_t op = bounded_rand(rng, 3);
                    if (op == 0 || hyp.empty()) {
                        hyp.insert(hyp.begin() + bounded_rand(rng, hyp.size() + 1),
                                   vocab[bounded_rand(rng, vocab.size())]);
                    } else if (op == 1) {
                        hyp[bounded_rand(rng, hyp.size())] =
                            vocab[bounded_rand(rng, vocab.size())];
                    } else if (hyp.size() > 1) {
                        hyp.erase(hyp.begin() + bounded_rand(rng, hyp.size()));
                    }
                }
            }
            utt.hypotheses.push_back(join(hyp, " "));
        }
        corpus.utterances.push_back(std::move(utt));
    }
    return corpus;
}

class CountingProvider : public Provider {
  public:
    explicit CountingProvider(Provider& inner) : inner_(inner) {}
    CompletionResponse complete(const CompletionRequest& request) override {
        calls_.fetch_add(1);
        return inner_.complete(request);
    }
    std::string provider_id() const override { return inner_.provider_id(); }
    std::int64_t calls() const { return calls_.load(); }

  private:
    Provider& inner_;
    std::atomic<std::int64_t> calls_{0};
};

// Fails calls fail_from..fail_from+fail_count-1 (1-based) with the given kind.
class FlakyProvider : public Provider {
  public:
    FlakyProvider(Provider& inner, ProviderErrorKind kind, std::int64_t fail_from,
                  std::int64_t fail_count)
        : inner_(inner), kind_(kind), fail_from_(fail_from), fail_count_(fail_count) {}

    CompletionResponse complete(const CompletionRequest& request) override {
        const std::int64_t call = calls_.fetch_add(1) + 1;
        if (call >= fail_from_ && call < fail_from_ + fail_count_) {
            throw ProviderError(kind_, "injected failure on call " + std::to_string(call));
        }
        return inner_.complete(request);
    }
    std::string provider_id() const override { return inner_.provider_id(); }
    std::int64_t calls() const { return calls_.load(); }

  private:
    Provider& inner_;
    ProviderErrorKind kind_;
    std::int64_t fail_from_;
    std::int64_t fail_count_;
    std::atomic<std::int64_t> calls_{0};
};

// Canned WER per candidate name; resume-safe because names are deterministic.
class ScriptedScorer : public PromptScorer {
  public:
    explicit ScriptedScorer(std::map<std::string, double> by_name)
        : by_name_(std::move(by_name)) {}

    double score(const InstructionPrompt& prompt) override {
        auto it = by_name_.find(prompt.name);
        if (it == by_name_.end()) {
            throw std::runtime_error("no scripted score for prompt '" + prompt.name + "'");
        }
        return it->second;
    }

  private:
    std::map<std::string, double> by_name_;
};

// Deterministic operator stand-in: every distinct meta prompt yields a
// distinct child text, so cache behavior tracks parent-pair uniqueness.
class SynthOperatorProvider : public Provider {
  public:
    CompletionResponse complete(const CompletionRequest& request) override {
        CompletionResponse response;
        response.text =
            "<prompt>synth " + hex64(fnv1a64(request.prompt_text)) + "</prompt>";
        response.input_tokens = whitespace_token_count(request.prompt_text);
        response.output_tokens = whitespace_token_count(response.text);
        response.provider_id = provider_id();
        return response;
    }
    std::string provider_id() const override { return "synth"; }
};

// Pure function of the request: a synthetic child for operator prompts and an
// echo of hypothesis 0 for rendered queries. Cache-consistent by construction.
class RouterProvider : public Provider {
  public:
    explicit RouterProvider(Corpus corpus)
        : echo_(make_echo_provider(std::move(corpus), 0)) {}

    CompletionResponse complete(const CompletionRequest& request) override {
        if (find_utterance_marker(request.prompt_text)) return echo_->complete(request);
        CompletionResponse response;
        response.text =
            "<prompt>synthetic child " + hex64(fnv1a64(request.prompt_text)) + "</prompt>";
        response.input_tokens = whitespace_token_count(request.prompt_text);
        response.output_tokens = whitespace_token_count(response.text);
        response.provider_id = provider_id();
        return response;
    }
    std::string provider_id() const override { return "router"; }

  private:
    std::unique_ptr<UtteranceProvider> echo_;
};

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    return nlohmann::json::parse(read_text_file(path));
}

// Table-1 style seed prompts named prompt-1..prompt-N.
inline std::vector<InstructionPrompt> make_seed_prompts(int n) {
    std::vector<InstructionPrompt> seeds;
    for (int i = 1; i <= n; ++i) {
        seeds.push_back({"prompt-" + std::to_string(i),
                         "Seed instruction number " + std::to_string(i) +
                             ": report the true transcription."});
    }
    return seeds;
}

}  // namespace testsupport
