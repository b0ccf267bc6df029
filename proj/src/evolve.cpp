#include "evogec/evolve.hpp"

#include "evogec/util.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

namespace evogec {

using nlohmann::json;

const char* to_string(EvoOperator op) {
    switch (op) {
        case EvoOperator::seed: return "seed";
        case EvoOperator::ga_crossover_mutate: return "ga-crossover-mutate";
    }
    return "seed";
}

EvoOperator evo_operator_from_string(std::string_view name) {
    if (name == "seed") return EvoOperator::seed;
    if (name == "ga-crossover-mutate") return EvoOperator::ga_crossover_mutate;
    throw DataError("unknown operator name: '" + std::string(name) + "'");
}

MetaPrompt MetaPrompt::default_template() {
    return {
        "Please follow the instruction step-by-step to generate a better prompt.\n"
        "1. Cross over the following prompts and generate a new prompt:\n"
        "Prompt 1: {parent_a}\n"
        "Prompt 2: {parent_b}\n"
        "2. Mutate the prompt generated in Step 1 and generate a final prompt bracketed with "
        "<prompt> and </prompt>.\n"};
}

MetaPrompt MetaPrompt::load(const std::filesystem::path& path) {
    MetaPrompt meta{read_text_file(path)};
    meta.validate();
    return meta;
}

void MetaPrompt::validate() const {
    if (template_text.find("{parent_a}") == std::string::npos ||
        template_text.find("{parent_b}") == std::string::npos) {
        throw ConfigError("meta prompt template must contain {parent_a} and {parent_b}");
    }
}

namespace {
void replace_all(std::string& text, std::string_view needle, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
}
}  // namespace

std::string MetaPrompt::render(std::string_view parent_a, std::string_view parent_b) const {
    std::string out = template_text;
    replace_all(out, "{parent_a}", parent_a);
    replace_all(out, "{parent_b}", parent_b);
    return out;
}

json EvoConfig::to_json() const {
    return {{"population_size", population_size},
            {"iterations", iterations},
            {"rng_seed", rng_seed},
            {"eval_subset", eval_subset},
            {"eval_seed", eval_seed},
            {"demos", demos},
            {"meta_template", meta.template_text}};
}

EvoConfig EvoConfig::from_json(const json& j) {
    EvoConfig config;
    config.population_size = j.at("population_size").get<int>();
    config.iterations = j.at("iterations").get<int>();
    config.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    config.eval_subset = j.at("eval_subset").get<std::size_t>();
    config.eval_seed = j.at("eval_seed").get<std::uint64_t>();
    config.demos = j.at("demos").get<int>();
    config.meta.template_text = j.at("meta_template").get<std::string>();
    return config;
}

GecScorer::GecScorer(Provider& provider, ResponseCache* cache, CostLedger& ledger,
                     std::vector<Demonstration> demos, Corpus eval_corpus, GecOptions options)
    : provider_(provider),
      cache_(cache),
      ledger_(ledger),
      demos_(std::move(demos)),
      eval_corpus_(std::move(eval_corpus)),
      options_(std::move(options)) {
    if (eval_corpus_.utterances.empty()) {
        throw DataError("evaluation corpus is empty");
    }
    if (!eval_corpus_.fully_labeled()) {
        throw DataError("evaluation corpus must be fully labeled");
    }
}

double GecScorer::score(const InstructionPrompt& prompt) {
    const CorrectionRun run =
        correct_corpus(provider_, cache_, ledger_, prompt, demos_, eval_corpus_, options_);
    return run.report->corpus_wer;
}

json IterationRecord::to_json() const {
    json kids = json::array();
    for (const ChildRecord& child : children) {
        kids.push_back({{"parent_a", child.parent_a},
                        {"parent_b", child.parent_b},
                        {"raw_response", child.raw_response},
                        {"child_prompt", child.child_prompt},
                        {"extraction_fallback", child.extraction_fallback},
                        {"score", child.score}});
    }
    return {{"iteration", iteration}, {"selected", selected}, {"children", kids}};
}

IterationRecord IterationRecord::from_json(const json& j) {
    IterationRecord record;
    record.iteration = j.at("iteration").get<int>();
    record.selected = j.at("selected").get<std::vector<int>>();
    for (const json& kid : j.at("children")) {
        ChildRecord child;
        child.parent_a = kid.at("parent_a").get<int>();
        child.parent_b = kid.at("parent_b").get<int>();
        child.raw_response = kid.at("raw_response").get<std::string>();
        child.child_prompt = kid.at("child_prompt").get<std::string>();
        child.extraction_fallback = kid.at("extraction_fallback").get<bool>();
        child.score = kid.at("score").get<double>();
        record.children.push_back(std::move(child));
    }
    return record;
}

int EvolutionLog::best_index() const {
    if (population.empty()) return -1;
    std::size_t best = 0;
    for (std::size_t i = 1; i < population.size(); ++i) {
        if (population[i].score < population[best].score) best = i;
    }
    return static_cast<int>(best);
}

json EvolutionLog::to_json() const {
    json pop = json::array();
    for (const Candidate& candidate : population) {
        json entry = {{"name", candidate.prompt.name},
                      {"text", candidate.prompt.text},
                      {"score", candidate.score},
                      {"iteration", candidate.lineage.iteration},
                      {"operator", to_string(candidate.lineage.op)},
                      {"eval",
                       {{"subset_size", candidate.eval_meta.subset_size},
                        {"subset_seed", candidate.eval_meta.subset_seed},
                        {"demos", candidate.eval_meta.demos}}}};
        if (candidate.lineage.parents) {
            entry["parents"] = {candidate.lineage.parents->first,
                                candidate.lineage.parents->second};
        } else {
            entry["parents"] = nullptr;
        }
        pop.push_back(std::move(entry));
    }
    json iters = json::array();
    for (const IterationRecord& record : iterations) iters.push_back(record.to_json());
    return {{"config", config.to_json()},
            {"population", pop},
            {"iterations", iters},
            {"best_so_far", best_so_far},
            {"completed_iterations", completed_iterations},
            {"best_index", best_index()},
            {"ledger", ledger}};
}

EvolutionLog EvolutionLog::from_json(const json& j) {
    EvolutionLog log;
    log.config = EvoConfig::from_json(j.at("config"));
    for (const json& entry : j.at("population")) {
        Candidate candidate;
        candidate.prompt.name = entry.at("name").get<std::string>();
        candidate.prompt.text = entry.at("text").get<std::string>();
        candidate.score = entry.at("score").get<double>();
        candidate.lineage.iteration = entry.at("iteration").get<int>();
        candidate.lineage.op = evo_operator_from_string(entry.at("operator").get<std::string>());
        if (!entry.at("parents").is_null()) {
            candidate.lineage.parents = {entry.at("parents").at(0).get<int>(),
                                         entry.at("parents").at(1).get<int>()};
        }
        const json& eval = entry.at("eval");
        candidate.eval_meta.subset_size = eval.at("subset_size").get<std::size_t>();
        candidate.eval_meta.subset_seed = eval.at("subset_seed").get<std::uint64_t>();
        candidate.eval_meta.demos = eval.at("demos").get<std::size_t>();
        log.population.push_back(std::move(candidate));
    }
    for (const json& record : j.at("iterations")) {
        log.iterations.push_back(IterationRecord::from_json(record));
    }
    log.best_so_far = j.at("best_so_far").get<std::vector<double>>();
    log.completed_iterations = j.at("completed_iterations").get<int>();
    log.ledger = j.at("ledger");
    return log;
}

std::vector<int> select_best_subset(const Population& population, std::size_t n) {
    if (n == 0) throw DataError("best-subset size must be positive");
    if (n > population.size()) {
        throw DataError("best-subset size " + std::to_string(n) +
                        " exceeds population of " + std::to_string(population.size()));
    }
    std::vector<int> indices(population.size());
    std::iota(indices.begin(), indices.end(), 0);
    // stable sort keeps earlier insertions first on score ties
    std::stable_sort(indices.begin(), indices.end(), [&](int a, int b) {
        return population[static_cast<std::size_t>(a)].score <
               population[static_cast<std::size_t>(b)].score;
    });
    indices.resize(n);
    return indices;
}

std::pair<int, int> pick_parents(const std::vector<int>& subset, std::mt19937_64& rng) {
    if (subset.size() < 2) {
        throw DataError("parent selection needs a subset of at least 2 candidates");
    }
    const std::size_t a = static_cast<std::size_t>(bounded_rand(rng, subset.size()));
    std::size_t b = static_cast<std::size_t>(bounded_rand(rng, subset.size() - 1));
    if (b >= a) ++b;
    return {subset[a], subset[b]};
}

namespace {

// Text between the last <prompt>...</prompt> pair, trimmed; empty on failure.
std::string extract_delimited_child(std::string_view response) {
    constexpr std::string_view open = "<prompt>";
    constexpr std::string_view close = "</prompt>";
    const std::size_t close_pos = response.rfind(close);
    if (close_pos == std::string_view::npos) return {};
    const std::size_t open_pos = response.rfind(open, close_pos);
    if (open_pos == std::string_view::npos) return {};
    const std::size_t begin = open_pos + open.size();
    return std::string(trim_ws(response.substr(begin, close_pos - begin)));
}

std::string last_nonempty_line(std::string_view text) {
    std::size_t end = text.size();
    while (end > 0) {
        std::size_t begin = text.rfind('\n', end - 1);
        const std::size_t line_start = begin == std::string_view::npos ? 0 : begin + 1;
        const std::string_view line = trim_ws(text.substr(line_start, end - line_start));
        if (!line.empty()) return std::string(line);
        if (begin == std::string_view::npos) break;
        end = begin;
    }
    return {};
}

}  // namespace

CrossoverResult crossover_mutate(Provider& provider, ResponseCache* cache, CostLedger& ledger,
                                 const MetaPrompt& meta, const Candidate& parent_a,
                                 const Candidate& parent_b, const CrossoverOptions& options) {
    meta.validate();
    CompletionRequest request;
    request.prompt_text = meta.render(parent_a.prompt.text, parent_b.prompt.text);
    request.max_output_tokens = options.max_output_tokens;
    request.temperature = options.temperature;
    request.tag = options.tag;

    CrossoverResult result;
    try {
        const CompletionResponse response =
            complete_cached(provider, cache, request, ledger, options.retry);
        result.raw_response = response.text;
    } catch (const ProviderError& err) {
        if (err.kind != ProviderErrorKind::refusal) throw;
        // refused/empty operator output degrades to parent_a below
    }
    result.child_text = extract_delimited_child(result.raw_response);
    if (result.child_text.empty()) result.child_text = last_nonempty_line(result.raw_response);
    if (result.child_text.empty()) {
        result.child_text = parent_a.prompt.text;
        result.extraction_fallback = true;
    }
    return result;
}

namespace {

void persist_checkpoint(const EvolutionLog& log, const std::filesystem::path& run_dir) {
    if (run_dir.empty()) return;
    std::filesystem::create_directories(run_dir);
    write_text_file_atomic(run_dir / "checkpoint.json", log.to_json().dump(2) + "\n");
}

void persist_iteration(const IterationRecord& record, const std::filesystem::path& run_dir) {
    if (run_dir.empty()) return;
    write_text_file_atomic(
        run_dir / ("iteration-" + std::to_string(record.iteration) + ".json"),
        record.to_json().dump(2) + "\n");
}

double population_minimum(const Population& population) {
    double best = population.front().score;
    for (const Candidate& candidate : population) best = std::min(best, candidate.score);
    return best;
}

EvolutionLog continue_evolution(EvolutionLog log, PromptScorer& scorer,
                                Provider& operator_provider, ResponseCache* cache,
                                CostLedger& ledger, const std::filesystem::path& run_dir,
                                const CrossoverOptions& options) {
    const EvoConfig& config = log.config;
    const EvalMeta eval_meta{config.eval_subset, config.eval_seed,
                             static_cast<std::size_t>(config.demos)};

    for (int t = log.completed_iterations + 1; t <= config.iterations; ++t) {
        IterationRecord record;
        record.iteration = t;
        record.selected =
            select_best_subset(log.population, static_cast<std::size_t>(config.population_size));
        // Per-iteration rng stream: parent picks depend only on (seed, t), so a
        // resumed run replays them exactly.
        std::mt19937_64 rng(mix_seed(config.rng_seed, static_cast<std::uint64_t>(t)));

        std::vector<Candidate> children;
        for (int k = 0; k < config.population_size; ++k) {
            const auto [pa, pb] = pick_parents(record.selected, rng);
            const CrossoverResult cross = crossover_mutate(
                operator_provider, cache, ledger, config.meta,
                log.population[static_cast<std::size_t>(pa)],
                log.population[static_cast<std::size_t>(pb)], options);

            InstructionPrompt child_prompt{
                "mutated-" + std::to_string(k + 1) + "-iter" + std::to_string(t),
                cross.child_text};
            const double score = scorer.score(child_prompt);

            record.children.push_back({pa, pb, cross.raw_response, cross.child_text,
                                       cross.extraction_fallback, score});
            Candidate child;
            child.prompt = std::move(child_prompt);
            child.score = score;
            child.lineage = {t, {{pa, pb}}, EvoOperator::ga_crossover_mutate};
            child.eval_meta = eval_meta;
            children.push_back(std::move(child));
        }

        for (Candidate& child : children) log.population.push_back(std::move(child));
        log.iterations.push_back(record);
        log.best_so_far.push_back(population_minimum(log.population));
        log.completed_iterations = t;
        log.ledger = ledger.to_json();
        assert(log.population.size() ==
               static_cast<std::size_t>(config.population_size) *
                   static_cast<std::size_t>(1 + t));
        persist_iteration(record, run_dir);
        persist_checkpoint(log, run_dir);
    }
    return log;
}

}  // namespace

EvolutionLog run_evolution(const EvoConfig& config, const std::vector<InstructionPrompt>& seeds,
                           PromptScorer& scorer, Provider& operator_provider,
                           ResponseCache* cache, CostLedger& ledger,
                           const std::filesystem::path& run_dir,
                           const CrossoverOptions& options) {
    if (config.population_size < 2) {
        throw ConfigError("population size must be at least 2");
    }
    if (config.iterations < 1) {
        throw ConfigError("iteration count must be at least 1");
    }
    if (static_cast<int>(seeds.size()) != config.population_size) {
        throw ConfigError("expected " + std::to_string(config.population_size) +
                          " seed prompts, got " + std::to_string(seeds.size()));
    }
    config.meta.validate();

    EvolutionLog log;
    log.config = config;
    const EvalMeta eval_meta{config.eval_subset, config.eval_seed,
                             static_cast<std::size_t>(config.demos)};
    for (const InstructionPrompt& seed : seeds) {
        if (seed.text.empty()) throw ConfigError("seed prompt '" + seed.name + "' is empty");
        Candidate candidate;
        candidate.prompt = seed;
        candidate.score = scorer.score(seed);
        candidate.lineage = {0, std::nullopt, EvoOperator::seed};
        candidate.eval_meta = eval_meta;
        log.population.push_back(std::move(candidate));
    }
    log.best_so_far.push_back(population_minimum(log.population));
    log.completed_iterations = 0;
    log.ledger = ledger.to_json();
    persist_checkpoint(log, run_dir);

    return continue_evolution(std::move(log), scorer, operator_provider, cache, ledger, run_dir,
                              options);
}

EvolutionLog resume_evolution(const std::filesystem::path& run_dir, const EvoConfig& expected,
                              PromptScorer& scorer, Provider& operator_provider,
                              ResponseCache* cache, CostLedger& ledger,
                              const CrossoverOptions& options) {
    const std::filesystem::path checkpoint = run_dir / "checkpoint.json";
    if (!std::filesystem::exists(checkpoint)) {
        throw DataError("no checkpoint found at " + checkpoint.string());
    }
    EvolutionLog log;
    try {
        log = EvolutionLog::from_json(json::parse(read_text_file(checkpoint)));
    } catch (const json::exception& err) {
        throw DataError("corrupt checkpoint " + checkpoint.string() + ": " + err.what());
    }

    const json stored = log.config.to_json();
    const json wanted = expected.to_json();
    if (stored != wanted) {
        std::string detail;
        for (const auto& [key, value] : wanted.items()) {
            if (stored.at(key) != value) {
                detail = key;
                break;
            }
        }
        throw ConfigError("config mismatch between checkpoint and current settings" +
                          (detail.empty() ? std::string{} : " (field '" + detail + "')"));
    }

    ledger.restore(log.ledger);
    if (log.completed_iterations >= log.config.iterations) return log;
    return continue_evolution(std::move(log), scorer, operator_provider, cache, ledger, run_dir,
                              options);
}

}  // namespace evogec
