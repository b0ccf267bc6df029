#include "evogec/gec.hpp"

#include "evogec/providers.hpp"
#include "evogec/util.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <iostream>
#include <mutex>
#include <thread>
#include <unordered_set>

namespace evogec {

InstructionPrompt load_prompt_file(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    if (text.size() >= 2 && text.compare(text.size() - 2, 2, "\r\n") == 0) {
        text.erase(text.size() - 2);
    } else if (!text.empty() && text.back() == '\n') {
        text.pop_back();
    }
    if (text.empty()) throw ConfigError("prompt file is empty: " + path.string());
    return {path.stem().string(), std::move(text)};
}

std::vector<InstructionPrompt> load_prompt_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("prompt directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<InstructionPrompt> prompts;
    prompts.reserve(files.size());
    for (const auto& file : files) prompts.push_back(load_prompt_file(file));
    if (prompts.empty()) throw ConfigError("no prompt files in " + dir.string());
    return prompts;
}

namespace {

constexpr std::string_view kAnswerLabel = "The true transcription is:";

void append_hypothesis_block(std::string& out, const std::vector<std::string>& hypotheses) {
    out += "The " + std::to_string(hypotheses.size()) + "-best hypotheses are:\n";
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        out += std::to_string(i + 1) + ". " + hypotheses[i] + "\n";
    }
}

bool is_quote_char(char c) { return c == '"' || c == '\'' || c == '`'; }

std::string strip_wrapping(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && (std::isspace(static_cast<unsigned char>(text[begin])) ||
                           is_quote_char(text[begin]))) {
        ++begin;
    }
    while (end > begin && (std::isspace(static_cast<unsigned char>(text[end - 1])) ||
                           is_quote_char(text[end - 1]))) {
        --end;
    }
    return std::string(text.substr(begin, end - begin));
}

// Drops every leading "the true transcription is[:]" label so re-parsing the
// result is a no-op.
std::string drop_answer_labels(std::string text) {
    constexpr std::string_view label = "the true transcription is";
    for (;;) {
        if (!starts_with_ci(text, label)) return text;
        std::size_t pos = label.size();
        if (pos < text.size() && std::isalnum(static_cast<unsigned char>(text[pos]))) {
            return text;  // label is a prefix of a longer word
        }
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
        if (pos < text.size() && text[pos] == ':') ++pos;
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
        text = text.substr(pos);
    }
}

std::string first_nonempty_line(std::string_view text) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line =
            nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
        std::string candidate = strip_wrapping(line);
        if (!candidate.empty()) return candidate;
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return {};
}

}  // namespace

std::string render_query(const InstructionPrompt& instruction,
                         const std::vector<Demonstration>& demos, const Utterance& utterance,
                         const RenderOptions& options) {
    std::string out = instruction.text;
    out += "\n\n";
    if (options.include_marker) {
        out += utterance_marker(utterance.id);
        out += "\n\n";
    }
    for (const Demonstration& demo : demos) {
        append_hypothesis_block(out, demo.hypotheses);
        out += "\n";
        out += kAnswerLabel;
        out += " " + demo.reference + "\n\n";
    }
    append_hypothesis_block(out, utterance.hypotheses);
    out += "\n";
    out += kAnswerLabel;
    return out;
}

ParsedCorrection parse_correction(const std::string& raw, const Utterance& utterance) {
    std::string text = strip_wrapping(raw);
    text = drop_answer_labels(std::move(text));
    std::string line = first_nonempty_line(text);
    line = drop_answer_labels(std::move(line));
    line = strip_wrapping(line);
    if (!line.empty()) return {line, false};
    if (utterance.hypotheses.empty()) return {std::string{}, true};
    return {utterance.hypotheses.front(), true};
}

CorrectionRun correct_corpus(Provider& provider, ResponseCache* cache, CostLedger& ledger,
                             const InstructionPrompt& instruction,
                             const std::vector<Demonstration>& demos, const Corpus& corpus,
                             const GecOptions& options) {
    if (corpus.utterances.empty()) throw DataError("cannot correct an empty corpus");
    if (instruction.text.empty()) throw ConfigError("instruction prompt text is empty");

    const std::size_t n = corpus.utterances.size();
    std::vector<CorrectionResult> results(n);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            const Utterance& utt = corpus.utterances[i];
            try {
                CorrectionResult result;
                result.utterance_id = utt.id;
                CompletionRequest request;
                request.prompt_text = render_query(instruction, demos, utt, options.render);
                request.max_output_tokens = options.max_output_tokens;
                request.temperature = options.temperature;
                request.tag = options.tag;
                try {
                    result.raw_response =
                        complete_cached(provider, cache, request, ledger, options.retry).text;
                } catch (const ProviderError& err) {
                    std::lock_guard<std::mutex> lock(log_mutex);
                    std::cerr << "warning: provider failed for utterance " << utt.id << " ("
                              << err.what() << "); using the top hypothesis\n";
                }
                const ParsedCorrection parsed = parse_correction(result.raw_response, utt);
                result.parsed = parsed.text;
                result.fallback_used = parsed.fallback_used;
                if (utt.reference) {
                    result.stats = align(normalize(*utt.reference, options.policy),
                                         normalize(result.parsed, options.policy));
                }
                results[i] = std::move(result);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int workers =
        std::max(1, std::min(options.concurrency, static_cast<int>(n)));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (int w = 0; w < workers; ++w) threads.emplace_back(work);
        for (std::thread& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    CorrectionRun run;
    run.results = std::move(results);
    if (corpus.fully_labeled()) {
        WerReport report;
        report.per_utterance.reserve(n);
        for (const CorrectionResult& result : run.results) {
            report.per_utterance.push_back({result.utterance_id, *result.stats});
            report.total_edits += result.stats->total_edits();
            report.total_ref_len += result.stats->ref_len;
        }
        if (report.total_ref_len == 0) {
            throw DataError("total reference length is zero; WER undefined");
        }
        report.corpus_wer = static_cast<double>(report.total_edits) /
                            static_cast<double>(report.total_ref_len);
        run.report = std::move(report);
    }
    return run;
}

std::vector<DemoPick> pick_demonstrations(const Corpus& corpus, std::size_t d,
                                          std::uint64_t seed) {
    if (d == 0) return {};
    Corpus labeled;
    labeled.name = corpus.name;
    labeled.split = corpus.split;
    for (const Utterance& utt : corpus.utterances) {
        if (utt.reference && !trim_ws(*utt.reference).empty()) {
            labeled.utterances.push_back(utt);
        }
    }
    if (d > labeled.size()) {
        throw DataError("requested " + std::to_string(d) + " demonstrations but only " +
                        std::to_string(labeled.size()) + " labeled utterances are available");
    }
    const Corpus sampled = sample_subset(labeled, d, mix_seed(seed, "demo"));
    std::vector<DemoPick> picks;
    picks.reserve(d);
    for (const Utterance& utt : sampled.utterances) {
        picks.push_back({{utt.hypotheses, *utt.reference}, utt.id});
    }
    return picks;
}

std::vector<Demonstration> demos_of(const std::vector<DemoPick>& picks) {
    std::vector<Demonstration> demos;
    demos.reserve(picks.size());
    for (const DemoPick& pick : picks) demos.push_back(pick.demo);
    return demos;
}

std::vector<std::string> demo_ids(const std::vector<DemoPick>& picks) {
    std::vector<std::string> ids;
    ids.reserve(picks.size());
    for (const DemoPick& pick : picks) ids.push_back(pick.source_id);
    return ids;
}

Corpus eval_subset_excluding(const Corpus& corpus, std::size_t n, std::uint64_t seed,
                             const std::vector<std::string>& exclude_ids) {
    const std::unordered_set<std::string> excluded(exclude_ids.begin(), exclude_ids.end());
    Corpus filtered;
    filtered.name = corpus.name;
    filtered.split = corpus.split;
    for (const Utterance& utt : corpus.utterances) {
        if (!excluded.count(utt.id)) filtered.utterances.push_back(utt);
    }
    if (filtered.utterances.empty()) {
        throw DataError("no utterances left after exclusions");
    }
    if (n == 0 || n >= filtered.size()) return filtered;
    return sample_subset(filtered, n, mix_seed(seed, "eval"));
}

}  // namespace evogec
