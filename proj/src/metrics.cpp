#include "evogec/metrics.hpp"

#include "evogec/errors.hpp"
#include "evogec/util.hpp"

#include <algorithm>
#include <cctype>

namespace evogec {

std::vector<std::string> normalize(std::string_view text, const NormPolicy& policy) {
    std::vector<std::string> out;
    for (std::string& token : split_whitespace(text)) {
        std::string t = policy.lowercase ? to_lower_ascii(token) : std::move(token);
        if (policy.strip_punctuation) {
            std::size_t begin = 0;
            std::size_t end = t.size();
            while (begin < end && std::ispunct(static_cast<unsigned char>(t[begin]))) ++begin;
            while (end > begin && std::ispunct(static_cast<unsigned char>(t[end - 1]))) --end;
            t = t.substr(begin, end - begin);
        }
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

namespace {

// d[i][j] = edit distance between ref[0..i) and hyp[0..j), unit costs.
std::vector<std::vector<int>> edit_table(const std::vector<std::string>& ref,
                                         const std::vector<std::string>& hyp) {
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();
    std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const int sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            const int del = d[i - 1][j] + 1;
            const int ins = d[i][j - 1] + 1;
            d[i][j] = std::min({sub, del, ins});
        }
    }
    return d;
}

}  // namespace

std::vector<DiffOp> diff_markup(const std::vector<std::string>& ref,
                                const std::vector<std::string>& hyp) {
    const auto d = edit_table(ref, hyp);
    std::vector<DiffOp> ops;
    std::size_t i = ref.size();
    std::size_t j = hyp.size();
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0) {
            const int sub_cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
            if (d[i][j] == d[i - 1][j - 1] + sub_cost) {
                ops.push_back({sub_cost ? DiffKind::sub : DiffKind::match, ref[i - 1], hyp[j - 1]});
                --i;
                --j;
                continue;
            }
        }
        if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
            ops.push_back({DiffKind::del, ref[i - 1], {}});
            --i;
            continue;
        }
        ops.push_back({DiffKind::ins, {}, hyp[j - 1]});
        --j;
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

EditStats align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    EditStats stats;
    stats.ref_len = static_cast<int>(ref.size());
    for (const DiffOp& op : diff_markup(ref, hyp)) {
        switch (op.kind) {
            case DiffKind::sub: ++stats.substitutions; break;
            case DiffKind::ins: ++stats.insertions; break;
            case DiffKind::del: ++stats.deletions; break;
            case DiffKind::match: break;
        }
    }
    return stats;
}

std::string render_diff(const std::vector<DiffOp>& ops) {
    std::vector<std::string> parts;
    parts.reserve(ops.size());
    for (const DiffOp& op : ops) {
        switch (op.kind) {
            case DiffKind::match: parts.push_back(op.ref_token); break;
            case DiffKind::sub: parts.push_back("^" + op.ref_token + "=>" + op.hyp_token + "^"); break;
            case DiffKind::ins: parts.push_back("+" + op.hyp_token + "+"); break;
            case DiffKind::del: parts.push_back("-" + op.ref_token + "-"); break;
        }
    }
    return join(parts, " ");
}

WerReport corpus_wer(const std::vector<ScoredPair>& pairs) {
    if (pairs.empty()) throw DataError("cannot score an empty pair list");
    WerReport report;
    report.per_utterance.reserve(pairs.size());
    for (const ScoredPair& pair : pairs) {
        EditStats stats = align(pair.ref, pair.hyp);
        report.total_edits += stats.total_edits();
        report.total_ref_len += stats.ref_len;
        report.per_utterance.push_back({pair.id, stats});
    }
    if (report.total_ref_len == 0) {
        throw DataError("total reference length is zero; WER undefined");
    }
    report.corpus_wer =
        static_cast<double>(report.total_edits) / static_cast<double>(report.total_ref_len);
    return report;
}

std::size_t oracle_choice(const Utterance& utterance, const NormPolicy& policy) {
    if (!utterance.reference) {
        throw DataError("utterance '" + utterance.id + "' has no reference");
    }
    if (utterance.hypotheses.empty()) {
        throw DataError("utterance '" + utterance.id + "' has no hypotheses");
    }
    const auto ref = normalize(*utterance.reference, policy);
    std::size_t best = 0;
    int best_edits = align(ref, normalize(utterance.hypotheses[0], policy)).total_edits();
    for (std::size_t k = 1; k < utterance.hypotheses.size(); ++k) {
        const int edits = align(ref, normalize(utterance.hypotheses[k], policy)).total_edits();
        if (edits < best_edits) {
            best = k;
            best_edits = edits;
        }
    }
    return best;
}

namespace {

WerReport baseline_report(const Corpus& corpus, const NormPolicy& policy,
                          bool pick_oracle_hypothesis) {
    std::vector<ScoredPair> pairs;
    pairs.reserve(corpus.size());
    for (const Utterance& utt : corpus.utterances) {
        if (!utt.reference) {
            throw DataError("utterance '" + utt.id + "' has no reference; baselines need labels");
        }
        const std::size_t pick = pick_oracle_hypothesis ? oracle_choice(utt, policy) : 0;
        pairs.push_back({utt.id, normalize(*utt.reference, policy),
                         normalize(utt.hypotheses.at(pick), policy)});
    }
    return corpus_wer(pairs);
}

}  // namespace

WerReport onebest_baseline(const Corpus& corpus, const NormPolicy& policy) {
    return baseline_report(corpus, policy, false);
}

WerReport oracle_nbest_baseline(const Corpus& corpus, const NormPolicy& policy) {
    return baseline_report(corpus, policy, true);
}

}  // namespace evogec
