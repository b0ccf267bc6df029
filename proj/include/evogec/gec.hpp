#pragma once

#include "evogec/corpus.hpp"
#include "evogec/llm.hpp"
#include "evogec/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace evogec {

struct InstructionPrompt {
    std::string name;
    std::string text;
};

// name = file stem; one trailing newline is not part of the prompt.
InstructionPrompt load_prompt_file(const std::filesystem::path& path);

// Every regular file in the directory, sorted by filename.
std::vector<InstructionPrompt> load_prompt_dir(const std::filesystem::path& dir);

struct Demonstration {
    std::vector<std::string> hypotheses;
    std::string reference;
};

struct RenderOptions {
    bool include_marker = true;  // off for live A/B runs
};

// Layout, in order: instruction paragraph; optional marker line; for each
// demonstration a numbered hypothesis block and its transcription line; the
// target's numbered block; a final line requesting the transcription.
// Byte-deterministic for fixed inputs.
std::string render_query(const InstructionPrompt& instruction,
                         const std::vector<Demonstration>& demos, const Utterance& utterance,
                         const RenderOptions& options = {});

struct ParsedCorrection {
    std::string text;
    bool fallback_used = false;
};

// Total function: strips wrapping whitespace/quotes, drops any leading
// "the true transcription is" label (case-insensitive, optional colon), keeps
// the first non-empty line. Empty results fall back to the top hypothesis.
// Idempotent on its own output.
ParsedCorrection parse_correction(const std::string& raw, const Utterance& utterance);

struct CorrectionResult {
    std::string utterance_id;
    std::string raw_response;
    std::string parsed;
    bool fallback_used = false;
    std::optional<EditStats> stats;  // present when the utterance is labeled
};

struct GecOptions {
    NormPolicy policy;
    RenderOptions render;
    int concurrency = 4;
    int max_output_tokens = 256;
    double temperature = 0.0;
    RetryPolicy retry;
    std::string tag = "gec";
};

struct CorrectionRun {
    std::vector<CorrectionResult> results;  // corpus order
    std::optional<WerReport> report;        // present when the corpus is fully labeled
};

// Fans out per utterance up to options.concurrency completions. A provider
// hard failure degrades that utterance to its top hypothesis with a warning;
// the run always completes.
CorrectionRun correct_corpus(Provider& provider, ResponseCache* cache, CostLedger& ledger,
                             const InstructionPrompt& instruction,
                             const std::vector<Demonstration>& demos, const Corpus& corpus,
                             const GecOptions& options = {});

struct DemoPick {
    Demonstration demo;
    std::string source_id;
};

// Seeded draw of d labeled utterances. Uses a salted stream distinct from
// eval_subset_excluding's, so demos and an eval subset drawn under the same
// seed never overlap once the demo ids are excluded.
std::vector<DemoPick> pick_demonstrations(const Corpus& corpus, std::size_t d,
                                          std::uint64_t seed);

std::vector<Demonstration> demos_of(const std::vector<DemoPick>& picks);
std::vector<std::string> demo_ids(const std::vector<DemoPick>& picks);

// Drops the excluded ids, then samples n (n == 0 or n >= remainder keeps the
// whole remainder).
Corpus eval_subset_excluding(const Corpus& corpus, std::size_t n, std::uint64_t seed,
                             const std::vector<std::string>& exclude_ids);

}  // namespace evogec
