#pragma once

#include "evogec/corpus.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace evogec {

struct NormPolicy {
    bool lowercase = true;
    bool strip_punctuation = true;  // leading/trailing ASCII punctuation per token
    // whitespace is always collapsed

    bool operator==(const NormPolicy&) const = default;
};

// Tokenize after applying the policy. Idempotent: re-normalizing the joined
// token list changes nothing.
std::vector<std::string> normalize(std::string_view text, const NormPolicy& policy = {});

struct EditStats {
    int substitutions = 0;
    int insertions = 0;
    int deletions = 0;
    int ref_len = 0;

    int total_edits() const { return substitutions + insertions + deletions; }
    // Per-utterance rate; insertions against an empty reference count absolutely.
    double wer() const {
        return ref_len > 0 ? static_cast<double>(total_edits()) / ref_len
                           : static_cast<double>(total_edits());
    }

    bool operator==(const EditStats&) const = default;
};

enum class DiffKind { match, sub, ins, del };

struct DiffOp {
    DiffKind kind;
    std::string ref_token;  // empty for ins
    std::string hyp_token;  // empty for del
};

// Minimal unit-cost alignment. Backtrace ties prefer match/substitution over
// deletion over insertion so the decomposition is stable across platforms.
EditStats align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

// Full alignment as ops; replaying them over ref reproduces hyp, and the op
// counts equal align()'s stats.
std::vector<DiffOp> diff_markup(const std::vector<std::string>& ref,
                                const std::vector<std::string>& hyp);

// Token stream with textual markers: ^ref=>hyp^ for sub, +hyp+ ins, -ref- del.
std::string render_diff(const std::vector<DiffOp>& ops);

struct UtteranceScore {
    std::string id;
    EditStats stats;
};

struct WerReport {
    std::vector<UtteranceScore> per_utterance;
    long long total_edits = 0;
    long long total_ref_len = 0;
    double corpus_wer = 0.0;  // micro average: total edits over total reference words
};

struct ScoredPair {
    std::string id;
    std::vector<std::string> ref;
    std::vector<std::string> hyp;
};

// Integer sums with one final division; errors on an empty list or a zero
// total reference length.
WerReport corpus_wer(const std::vector<ScoredPair>& pairs);

// Index of the hypothesis with minimal edits vs the reference; ties go to the
// lowest index. DataError when the utterance has no reference.
std::size_t oracle_choice(const Utterance& utterance, const NormPolicy& policy = {});

// Scores hypothesis 0 of every utterance.
WerReport onebest_baseline(const Corpus& corpus, const NormPolicy& policy = {});

// Per utterance scores the closest hypothesis: the re-ranking ceiling.
WerReport oracle_nbest_baseline(const Corpus& corpus, const NormPolicy& policy = {});

}  // namespace evogec
