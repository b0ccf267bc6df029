#pragma once

#include "evogec/gec.hpp"

#include <json.hpp>

#include <random>
#include <utility>

namespace evogec {

enum class EvoOperator { seed, ga_crossover_mutate };

const char* to_string(EvoOperator op);
EvoOperator evo_operator_from_string(std::string_view name);

struct Lineage {
    int iteration = 0;
    std::optional<std::pair<int, int>> parents;  // population indices
    EvoOperator op = EvoOperator::seed;
};

struct EvalMeta {
    std::size_t subset_size = 0;
    std::uint64_t subset_seed = 0;
    std::size_t demos = 0;
};

struct Candidate {
    InstructionPrompt prompt;
    double score = 0.0;  // corpus WER on the fixed eval subset; lower is better
    Lineage lineage;
    EvalMeta eval_meta;
};

// Append-only; candidates are never removed or re-scored.
using Population = std::vector<Candidate>;

struct MetaPrompt {
    std::string template_text;  // must contain {parent_a} and {parent_b}

    static MetaPrompt default_template();
    static MetaPrompt load(const std::filesystem::path& path);

    void validate() const;  // ConfigError when a placeholder is missing
    std::string render(std::string_view parent_a, std::string_view parent_b) const;

    bool operator==(const MetaPrompt&) const = default;
};

struct EvoConfig {
    int population_size = 5;  // N: seed count and children per iteration
    int iterations = 3;       // T
    std::uint64_t rng_seed = 0;
    std::size_t eval_subset = 200;
    std::uint64_t eval_seed = 0;
    int demos = 1;
    MetaPrompt meta = MetaPrompt::default_template();

    nlohmann::json to_json() const;
    static EvoConfig from_json(const nlohmann::json& j);
};

class PromptScorer {
  public:
    virtual ~PromptScorer() = default;
    virtual double score(const InstructionPrompt& prompt) = 0;  // WER fraction
};

// Production scorer: correction WER over a fixed labeled evaluation corpus,
// same demonstrations and subset for every candidate so scores compare.
class GecScorer : public PromptScorer {
  public:
    GecScorer(Provider& provider, ResponseCache* cache, CostLedger& ledger,
              std::vector<Demonstration> demos, Corpus eval_corpus, GecOptions options = {});

    double score(const InstructionPrompt& prompt) override;
    const Corpus& eval_corpus() const { return eval_corpus_; }

  private:
    Provider& provider_;
    ResponseCache* cache_;
    CostLedger& ledger_;
    std::vector<Demonstration> demos_;
    Corpus eval_corpus_;
    GecOptions options_;
};

struct ChildRecord {
    int parent_a = 0;
    int parent_b = 0;
    std::string raw_response;
    std::string child_prompt;
    bool extraction_fallback = false;  // operator output was unusable; parent_a substituted
    double score = 0.0;
};

struct IterationRecord {
    int iteration = 0;
    std::vector<int> selected;  // best-subset population indices, best first
    std::vector<ChildRecord> children;

    nlohmann::json to_json() const;
    static IterationRecord from_json(const nlohmann::json& j);
};

struct EvolutionLog {
    EvoConfig config;
    Population population;
    std::vector<IterationRecord> iterations;
    std::vector<double> best_so_far;  // entry t = best WER once iteration t completed
    int completed_iterations = -1;    // 0 after seed scoring, t after iteration t
    nlohmann::json ledger = nlohmann::json::object();

    int best_index() const;  // global minimum score, earliest index on ties

    nlohmann::json to_json() const;
    static EvolutionLog from_json(const nlohmann::json& j);
};

// The n lowest-scoring candidates, ordered by (score, insertion index).
std::vector<int> select_best_subset(const Population& population, std::size_t n);

// Uniform random ordered pair of distinct entries of subset.
std::pair<int, int> pick_parents(const std::vector<int>& subset, std::mt19937_64& rng);

struct CrossoverOptions {
    int max_output_tokens = 512;
    double temperature = 0.0;
    RetryPolicy retry;
    std::string tag = "evolve";
};

struct CrossoverResult {
    std::string child_text;
    std::string raw_response;
    bool extraction_fallback = false;
};

// One meta-prompted completion blending both parents. The child is the text in
// the last <prompt>...</prompt> pair, else the last non-empty line, else
// parent_a's text (flagged).
CrossoverResult crossover_mutate(Provider& provider, ResponseCache* cache, CostLedger& ledger,
                                 const MetaPrompt& meta, const Candidate& parent_a,
                                 const Candidate& parent_b, const CrossoverOptions& options = {});

// Scores the seeds, then per iteration t selects the best subset, breeds and
// scores N children, and appends them. Writes checkpoint.json and
// iteration-<t>.json under run_dir (when given) after every completed step;
// a provider hard failure leaves the last checkpoint behind and rethrows.
EvolutionLog run_evolution(const EvoConfig& config, const std::vector<InstructionPrompt>& seeds,
                           PromptScorer& scorer, Provider& operator_provider,
                           ResponseCache* cache, CostLedger& ledger,
                           const std::filesystem::path& run_dir = {},
                           const CrossoverOptions& options = {});

// Continues a checkpointed run; the expected config must match the snapshot.
// The ledger is restored from the checkpoint before continuing. A finished
// run is returned unchanged.
EvolutionLog resume_evolution(const std::filesystem::path& run_dir, const EvoConfig& expected,
                              PromptScorer& scorer, Provider& operator_provider,
                              ResponseCache* cache, CostLedger& ledger,
                              const CrossoverOptions& options = {});

}  // namespace evogec
