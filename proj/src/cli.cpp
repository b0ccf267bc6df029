#include "evogec/cli.hpp"

#include "evogec/gec.hpp"
#include "evogec/providers.hpp"
#include "evogec/util.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace evogec {

using nlohmann::json;

json ProviderSettings::to_json() const {
    return {{"kind", kind},
            {"echo_index", echo_index},
            {"base_url", http.base_url},
            {"path", http.path},
            {"model", http.model},
            {"api_key_env", http.api_key_env},
            {"version_header", http.version_header},
            {"input_price_per_mtok", http.price.input_per_mtok},
            {"output_price_per_mtok", http.price.output_per_mtok}};
}

ProviderSettings ProviderSettings::from_json(const json& j) {
    ProviderSettings settings;
    settings.kind = j.at("kind").get<std::string>();
    settings.echo_index = j.at("echo_index").get<std::size_t>();
    settings.http.base_url = j.at("base_url").get<std::string>();
    settings.http.path = j.at("path").get<std::string>();
    settings.http.model = j.at("model").get<std::string>();
    settings.http.api_key_env = j.at("api_key_env").get<std::string>();
    settings.http.version_header = j.at("version_header").get<std::string>();
    settings.http.price.input_per_mtok = j.at("input_price_per_mtok").get<double>();
    settings.http.price.output_per_mtok = j.at("output_price_per_mtok").get<double>();
    return settings;
}

json RunConfig::to_json() const {
    json mapping_json = {{"hypotheses_key", mapping.hypotheses_key},
                         {"reference_key", mapping.reference_key}};
    if (mapping.id_key) mapping_json["id_key"] = *mapping.id_key;
    return {{"data_path", data_path},
            {"train_path", train_path},
            {"mapping", mapping_json},
            {"split", to_string(split)},
            {"norm_lowercase", policy.lowercase},
            {"norm_strip_punctuation", policy.strip_punctuation},
            {"subset", subset},
            {"seed", seed},
            {"demos", demos},
            {"concurrency", concurrency},
            {"include_marker", include_marker},
            {"worst_diffs", worst_diffs},
            {"max_output_tokens", max_output_tokens},
            {"temperature", temperature},
            {"retries", retry.max_retries},
            {"retry_delay_ms", retry.initial_delay_ms},
            {"out_dir", out_dir},
            {"cache_dir", cache_dir},
            {"provider", provider.to_json()},
            {"evo", evo.to_json()}};
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig config;
    config.data_path = j.at("data_path").get<std::string>();
    config.train_path = j.at("train_path").get<std::string>();
    const json& mapping_json = j.at("mapping");
    config.mapping.hypotheses_key = mapping_json.at("hypotheses_key").get<std::string>();
    config.mapping.reference_key = mapping_json.at("reference_key").get<std::string>();
    if (mapping_json.contains("id_key")) {
        config.mapping.id_key = mapping_json.at("id_key").get<std::string>();
    }
    config.split = split_from_string(j.at("split").get<std::string>());
    config.policy.lowercase = j.at("norm_lowercase").get<bool>();
    config.policy.strip_punctuation = j.at("norm_strip_punctuation").get<bool>();
    config.subset = j.at("subset").get<std::size_t>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.demos = j.at("demos").get<int>();
    config.concurrency = j.at("concurrency").get<int>();
    config.include_marker = j.at("include_marker").get<bool>();
    config.worst_diffs = j.at("worst_diffs").get<int>();
    config.max_output_tokens = j.at("max_output_tokens").get<int>();
    config.temperature = j.at("temperature").get<double>();
    config.retry.max_retries = j.at("retries").get<int>();
    config.retry.initial_delay_ms = j.at("retry_delay_ms").get<int>();
    config.out_dir = j.at("out_dir").get<std::string>();
    config.cache_dir = j.at("cache_dir").get<std::string>();
    config.provider = ProviderSettings::from_json(j.at("provider"));
    config.evo = EvoConfig::from_json(j.at("evo"));
    return config;
}

void ResultsTable::sort_rows() {
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        const int ia = a.iteration.value_or(-1);
        const int ib = b.iteration.value_or(-1);
        if (ia != ib) return ia < ib;
        return a.prompt_name < b.prompt_name;
    });
}

std::string ResultsTable::to_markdown() const {
    std::string out = "| Row | Prompt | Demos | Iteration | WER (%) |\n"
                      "| --- | --- | --- | --- | --- |\n";
    for (const ResultRow& row : rows) {
        out += "| " + row.label + " | " + row.prompt_name + " | " + std::to_string(row.demos) +
               " | " + (row.iteration ? std::to_string(*row.iteration) : std::string("-")) +
               " | " + format_double(row.wer * 100.0, 2) + " |\n";
    }
    return out;
}

std::string ResultsTable::to_csv() const {
    std::string out = "label,prompt,demos,iteration,wer_percent\n";
    for (const ResultRow& row : rows) {
        char wer[40];
        std::snprintf(wer, sizeof(wer), "%.10g", row.wer * 100.0);
        out += row.label + "," + row.prompt_name + "," + std::to_string(row.demos) + "," +
               (row.iteration ? std::to_string(*row.iteration) : std::string{}) + "," + wer +
               "\n";
    }
    return out;
}

std::unique_ptr<Provider> make_provider(const ProviderSettings& settings, const Corpus& corpus,
                                        const NormPolicy& policy, CostLedger& ledger) {
    if (settings.kind == "live") {
        auto provider = std::make_unique<HttpProvider>(settings.http);
        ledger.set_price(provider->provider_id(), settings.http.price);
        return provider;
    }
    std::unique_ptr<UtteranceProvider> inner;
    if (settings.kind == "echo") {
        inner = make_echo_provider(corpus, settings.echo_index);
    } else if (settings.kind == "oracle") {
        inner = make_oracle_provider(corpus, policy);
    } else if (settings.kind == "reference") {
        inner = make_reference_provider(corpus);
    } else {
        throw ConfigError("unknown provider kind '" + settings.kind +
                          "' (expected live, echo, oracle or reference)");
    }
    ledger.set_price(inner->provider_id(), Price{0.0, 0.0});
    return std::make_unique<OfflineProvider>(std::move(inner));
}

ResultsTable evolution_table(const EvolutionLog& log) {
    ResultsTable table;
    table.rows.reserve(log.population.size());
    for (const Candidate& candidate : log.population) {
        table.rows.push_back({candidate.prompt.name, candidate.prompt.name, log.config.demos,
                              candidate.lineage.iteration, candidate.score});
    }
    table.sort_rows();
    return table;
}

namespace {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string sanitize_for_filename(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return out;
}

GecOptions gec_options_from(const RunConfig& config) {
    GecOptions options;
    options.policy = config.policy;
    options.render.include_marker = config.include_marker;
    options.concurrency = config.concurrency;
    options.max_output_tokens = config.max_output_tokens;
    options.temperature = config.temperature;
    options.retry = config.retry;
    options.tag = "gec";
    return options;
}

void write_cost_summary(const CostLedger& ledger, std::ostream& out) {
    const auto lines = ledger.estimate_cost();
    for (const CostLine& line : lines) {
        out << "cost: " << line.provider_id << " tag=" << line.tag
            << " calls=" << line.usage.call_count << " cache_hits=" << line.usage.cache_hits
            << " in=" << line.usage.input_tokens << " out=" << line.usage.output_tokens << " $"
            << format_double(line.cost, 2) << "\n";
    }
    out << "total cost: $" << format_double(ledger.total_cost(), 2) << "\n";
}

void write_utterance_csv(const std::filesystem::path& path,
                         const std::vector<CorrectionResult>& results) {
    std::string out =
        "id,ref_len,substitutions,insertions,deletions,wer_percent,fallback,parsed\n";
    for (const CorrectionResult& result : results) {
        out += csv_escape(result.utterance_id) + ",";
        if (result.stats) {
            char wer[40];
            std::snprintf(wer, sizeof(wer), "%.10g", result.stats->wer() * 100.0);
            out += std::to_string(result.stats->ref_len) + "," +
                   std::to_string(result.stats->substitutions) + "," +
                   std::to_string(result.stats->insertions) + "," +
                   std::to_string(result.stats->deletions) + "," + wer + ",";
        } else {
            out += ",,,,,";
        }
        out += std::string(result.fallback_used ? "1" : "0") + "," +
               csv_escape(result.parsed) + "\n";
    }
    write_text_file_atomic(path, out);
}

void write_worst_diffs(const std::filesystem::path& dir, const Corpus& corpus,
                       const std::vector<CorrectionResult>& results, const NormPolicy& policy,
                       int worst) {
    std::unordered_map<std::string, const Utterance*> by_id;
    for (const Utterance& utt : corpus.utterances) by_id[utt.id] = &utt;

    std::vector<const CorrectionResult*> ranked;
    for (const CorrectionResult& result : results) {
        if (result.stats) ranked.push_back(&result);
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const CorrectionResult* a, const CorrectionResult* b) {
                  const double wa = a->stats->wer();
                  const double wb = b->stats->wer();
                  if (wa != wb) return wa > wb;
                  return a->utterance_id < b->utterance_id;
              });
    if (worst >= 0 && ranked.size() > static_cast<std::size_t>(worst)) ranked.resize(worst);

    std::filesystem::create_directories(dir);
    for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
        const CorrectionResult& result = *ranked[rank];
        const Utterance& utt = *by_id.at(result.utterance_id);
        const auto ref_tokens = normalize(*utt.reference, policy);
        const auto hyp_tokens = normalize(result.parsed, policy);
        std::string body;
        body += "id: " + result.utterance_id + "\n";
        body += "wer_percent: " + format_double(result.stats->wer() * 100.0, 2) + "\n";
        body += "ref: " + *utt.reference + "\n";
        body += "hyp: " + result.parsed + "\n";
        body += "diff: " + render_diff(diff_markup(ref_tokens, hyp_tokens)) + "\n";
        write_text_file_atomic(dir / ("diff-" + std::to_string(rank + 1) + "-" +
                                      sanitize_for_filename(result.utterance_id) + ".txt"),
                               body);
    }
}

}  // namespace

int cmd_baseline(const RunConfig& config, bool include_oracle, std::ostream& out) {
    Corpus corpus = load_corpus(config.data_path, config.mapping, config.split);
    if (config.subset > 0 && config.subset < corpus.size()) {
        corpus = eval_subset_excluding(corpus, config.subset, config.seed, {});
    }
    if (!corpus.fully_labeled()) {
        throw DataError("references required: corpus '" + corpus.name +
                        "' has unlabeled utterances");
    }

    ResultsTable table;
    const WerReport onebest = onebest_baseline(corpus, config.policy);
    table.rows.push_back({"1-best", "-", 0, std::nullopt, onebest.corpus_wer});
    if (include_oracle) {
        const WerReport oracle = oracle_nbest_baseline(corpus, config.policy);
        table.rows.push_back({"oracle-nbest", "-", 0, std::nullopt, oracle.corpus_wer});
    }
    out << table.to_markdown();

    if (!config.out_dir.empty()) {
        const std::filesystem::path dir = config.out_dir;
        std::filesystem::create_directories(dir);
        write_text_file_atomic(dir / "run.json", config.to_json().dump(2) + "\n");
        write_text_file_atomic(dir / "results.csv", table.to_csv());
    }
    return kExitOk;
}

int cmd_evaluate(const RunConfig& config, const std::filesystem::path& prompt_file,
                 std::ostream& out) {
    const InstructionPrompt prompt = load_prompt_file(prompt_file);
    const Corpus corpus = load_corpus(config.data_path, config.mapping, config.split);

    std::vector<DemoPick> picks;
    const bool demos_from_data =
        config.train_path.empty() || config.train_path == config.data_path;
    if (config.demos > 0) {
        if (demos_from_data) {
            picks = pick_demonstrations(corpus, static_cast<std::size_t>(config.demos),
                                        config.seed);
        } else {
            const Corpus train = load_corpus(config.train_path, config.mapping, Split::train);
            picks = pick_demonstrations(train, static_cast<std::size_t>(config.demos),
                                        config.seed);
        }
    }

    const Corpus eval = eval_subset_excluding(
        corpus, config.subset, config.seed,
        demos_from_data ? demo_ids(picks) : std::vector<std::string>{});
    if (!eval.fully_labeled()) {
        throw DataError("references required: corpus '" + eval.name +
                        "' has unlabeled utterances");
    }

    CostLedger ledger;
    auto provider = make_provider(config.provider, eval, config.policy, ledger);
    std::optional<ResponseCache> cache;
    if (!config.cache_dir.empty()) cache.emplace(config.cache_dir);

    const CorrectionRun run =
        correct_corpus(*provider, cache ? &*cache : nullptr, ledger, prompt, demos_of(picks),
                       eval, gec_options_from(config));

    ResultsTable table;
    table.rows.push_back(
        {prompt.name, prompt.name, config.demos, std::nullopt, run.report->corpus_wer});
    out << table.to_markdown();

    if (!config.out_dir.empty()) {
        const std::filesystem::path dir = config.out_dir;
        std::filesystem::create_directories(dir);
        write_text_file_atomic(dir / "run.json", config.to_json().dump(2) + "\n");
        write_text_file_atomic(dir / "results.csv", table.to_csv());
        write_utterance_csv(dir / "utterances.csv", run.results);
        write_worst_diffs(dir / "diffs", eval, run.results, config.policy, config.worst_diffs);
        ledger.write_csv(dir / "ledger.csv");
        write_text_file_atomic(dir / "ledger.json", ledger.to_json().dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_optimize(const RunConfig& config, const std::filesystem::path& seeds_dir, bool resume,
                 std::ostream& out) {
    if (config.out_dir.empty()) throw ConfigError("optimize needs --out RUNDIR");
    const std::vector<InstructionPrompt> seeds = load_prompt_dir(seeds_dir);

    const std::string train_path =
        config.train_path.empty() ? config.data_path : config.train_path;
    const Corpus train = load_corpus(train_path, config.mapping, Split::train);

    const auto picks = pick_demonstrations(
        train, static_cast<std::size_t>(config.evo.demos), config.evo.eval_seed);
    const Corpus eval = eval_subset_excluding(train, config.evo.eval_subset,
                                              config.evo.eval_seed, demo_ids(picks));

    CostLedger ledger;
    auto provider = make_provider(config.provider, eval, config.policy, ledger);

    const std::filesystem::path run_dir = config.out_dir;
    std::filesystem::create_directories(run_dir);
    write_text_file_atomic(run_dir / "run.json", config.to_json().dump(2) + "\n");
    ResponseCache cache(config.cache_dir.empty() ? run_dir / "cache"
                                                 : std::filesystem::path(config.cache_dir));

    GecScorer scorer(*provider, &cache, ledger, demos_of(picks), eval,
                     gec_options_from(config));
    CrossoverOptions crossover;
    crossover.temperature = config.temperature;
    crossover.retry = config.retry;

    const EvolutionLog log =
        resume ? resume_evolution(run_dir, config.evo, scorer, *provider, &cache, ledger,
                                  crossover)
               : run_evolution(config.evo, seeds, scorer, *provider, &cache, ledger, run_dir,
                               crossover);

    const ResultsTable table = evolution_table(log);
    out << table.to_markdown();
    const int best = log.best_index();
    const Candidate& winner = log.population[static_cast<std::size_t>(best)];
    out << "\nbest: " << winner.prompt.name << " (WER "
        << format_double(winner.score * 100.0, 2) << "%, population index " << best << ")\n";

    write_text_file_atomic(run_dir / "results.csv", table.to_csv());
    write_text_file_atomic(run_dir / "table.md", table.to_markdown());
    write_text_file_atomic(run_dir / "best-prompt.txt", winner.prompt.text + "\n");
    ledger.write_csv(run_dir / "ledger.csv");
    write_text_file_atomic(run_dir / "ledger.json", ledger.to_json().dump(2) + "\n");
    return kExitOk;
}

int cmd_report(const std::filesystem::path& run_dir, std::ostream& out) {
    if (!std::filesystem::is_directory(run_dir)) {
        throw DataError("run directory not found: " + run_dir.string());
    }
    const std::filesystem::path checkpoint = run_dir / "checkpoint.json";
    if (std::filesystem::exists(checkpoint)) {
        EvolutionLog log;
        try {
            log = EvolutionLog::from_json(json::parse(read_text_file(checkpoint)));
        } catch (const json::exception& err) {
            throw DataError("corrupt log " + checkpoint.string() + ": " + err.what());
        }
        const ResultsTable table = evolution_table(log);
        out << table.to_markdown() << "\n";
        const int best = log.best_index();
        const Candidate& winner = log.population[static_cast<std::size_t>(best)];
        out << "best prompt: " << winner.prompt.name << " (WER "
            << format_double(winner.score * 100.0, 2) << "%)\n\n";
        out << winner.prompt.text << "\n\n";
        out << table.to_csv() << "\n";
        CostLedger ledger;
        ledger.restore(log.ledger);
        write_cost_summary(ledger, out);
        return kExitOk;
    }
    const std::filesystem::path results = run_dir / "results.csv";
    if (std::filesystem::exists(results)) {
        out << read_text_file(results) << "\n";
        const std::filesystem::path ledger_json = run_dir / "ledger.json";
        if (std::filesystem::exists(ledger_json)) {
            CostLedger ledger;
            try {
                ledger.restore(json::parse(read_text_file(ledger_json)));
            } catch (const json::exception& err) {
                throw DataError("corrupt ledger " + ledger_json.string() + ": " + err.what());
            }
            write_cost_summary(ledger, out);
        }
        return kExitOk;
    }
    throw DataError("no log found in run directory " + run_dir.string());
}

int cmd_cost(const std::filesystem::path& run_dir, std::ostream& out) {
    json snapshot;
    const std::filesystem::path ledger_json = run_dir / "ledger.json";
    const std::filesystem::path checkpoint = run_dir / "checkpoint.json";
    try {
        if (std::filesystem::exists(ledger_json)) {
            snapshot = json::parse(read_text_file(ledger_json));
        } else if (std::filesystem::exists(checkpoint)) {
            snapshot = json::parse(read_text_file(checkpoint)).at("ledger");
        } else {
            throw DataError("no ledger found in run directory " + run_dir.string());
        }
    } catch (const json::exception& err) {
        throw DataError("corrupt ledger in " + run_dir.string() + ": " + err.what());
    }
    CostLedger ledger;
    ledger.restore(snapshot);
    write_cost_summary(ledger, out);
    return kExitOk;
}

NormPolicy parse_norm_spec(const std::string& spec) {
    NormPolicy policy{false, false};
    std::stringstream stream(spec);
    std::string token;
    bool any = false;
    while (std::getline(stream, token, ',')) {
        const std::string t = std::string(trim_ws(token));
        if (t.empty()) continue;
        any = true;
        if (t == "lowercase") {
            policy.lowercase = true;
        } else if (t == "punct" || t == "punctuation") {
            policy.strip_punctuation = true;
        } else if (t == "none") {
            policy = {false, false};
        } else {
            throw ConfigError("unknown --norm token '" + t + "'");
        }
    }
    if (!any) throw ConfigError("--norm needs at least one of: lowercase, punct, none");
    return policy;
}

namespace {

struct CliState {
    RunConfig config;
    std::string norm_spec = "lowercase,punct";
    std::string split_name = "test";
    std::string id_key;
    std::string prompt_file;
    std::string seeds_dir;
    std::string meta_prompt_file;
    std::string run_dir;
    bool include_oracle = true;
    bool no_marker = false;
    bool resume = false;
    std::uint64_t eval_seed = 0;
};

void add_data_options(CLI::App* cmd, CliState& state, bool required_data = true) {
    auto* data = cmd->add_option("--data", state.config.data_path, "corpus file (JSON array or JSON-lines)");
    if (required_data) data->required();
    cmd->add_option("--hyp-key", state.config.mapping.hypotheses_key,
                    "record key holding the hypothesis list");
    cmd->add_option("--ref-key", state.config.mapping.reference_key,
                    "record key holding the reference transcription");
    cmd->add_option("--id-key", state.id_key, "record key holding the utterance id");
    cmd->add_option("--split", state.split_name, "split label: train|valid|test|other");
    cmd->add_option("--norm", state.norm_spec,
                    "normalization: comma list of lowercase,punct, or none");
}

void add_provider_options(CLI::App* cmd, CliState& state) {
    cmd->add_option("--provider", state.config.provider.kind,
                    "provider kind: live|echo|oracle|reference");
    cmd->add_option("--model", state.config.provider.http.model, "live model name");
    cmd->add_option("--base-url", state.config.provider.http.base_url, "live endpoint base URL");
    cmd->add_option("--api-key-env", state.config.provider.http.api_key_env,
                    "environment variable holding the API key");
    cmd->add_option("--input-price", state.config.provider.http.price.input_per_mtok,
                    "currency per million input tokens");
    cmd->add_option("--output-price", state.config.provider.http.price.output_per_mtok,
                    "currency per million output tokens");
    cmd->add_option("--echo-index", state.config.provider.echo_index,
                    "hypothesis index for the echo provider");
    cmd->add_option("--max-output-tokens", state.config.max_output_tokens,
                    "completion token budget");
    cmd->add_option("--temperature", state.config.temperature, "sampling temperature");
    cmd->add_option("--cache-dir", state.config.cache_dir, "response cache directory");
    cmd->add_option("--concurrency", state.config.concurrency, "max in-flight completions");
    cmd->add_option("--retries", state.config.retry.max_retries,
                    "transient-error retries per completion");
    cmd->add_option("--retry-delay-ms", state.config.retry.initial_delay_ms,
                    "initial retry backoff in milliseconds");
    cmd->add_flag("--no-marker", state.no_marker,
                  "omit the [utt:<id>] routing marker from rendered queries");
}

void finalize_common(CliState& state) {
    state.config.policy = parse_norm_spec(state.norm_spec);
    state.config.split = split_from_string(state.split_name);
    if (!state.id_key.empty()) state.config.mapping.id_key = state.id_key;
    state.config.include_marker = !state.no_marker;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CliState state;

    CLI::App app{"N-best transcription correction with LLM prompts and a GA prompt optimizer"};
    app.set_config("--config", "", "TOML config file; flags override file values");
    app.require_subcommand(1);

    auto* baseline = app.add_subcommand("baseline", "score the 1-best and oracle N-best baselines");
    add_data_options(baseline, state);
    baseline->add_option("--subset", state.config.subset, "evaluate on a seeded subset of N utterances");
    baseline->add_option("--seed", state.config.seed, "subset sampling seed");
    baseline->add_flag("--oracle,!--no-oracle", state.include_oracle,
                       "include the oracle N-best row (default on)");
    baseline->add_option("--out", state.config.out_dir, "run directory for CSV output");

    auto* evaluate = app.add_subcommand("evaluate", "score one instruction prompt over a corpus");
    add_data_options(evaluate, state);
    add_provider_options(evaluate, state);
    evaluate->add_option("--prompt-file", state.prompt_file, "instruction prompt file")->required();
    evaluate->add_option("--train", state.config.train_path,
                         "labeled corpus for demonstrations (defaults to --data)");
    evaluate->add_option("--demos", state.config.demos, "number of in-context demonstrations");
    evaluate->add_option("--subset", state.config.subset, "evaluate on a seeded subset of N utterances");
    evaluate->add_option("--seed", state.config.seed, "subset/demonstration seed");
    evaluate->add_option("--worst", state.config.worst_diffs, "how many worst-case diffs to write");
    evaluate->add_option("--out", state.config.out_dir, "run directory for reports");

    auto* optimize = app.add_subcommand("optimize", "evolve better prompts with the GA loop");
    add_data_options(optimize, state);
    add_provider_options(optimize, state);
    optimize->add_option("--seeds", state.seeds_dir, "directory with the N seed prompt files")
        ->required();
    optimize->add_option("--iters", state.config.evo.iterations, "evolution iterations T");
    optimize->add_option("--pop", state.config.evo.population_size, "children per iteration N");
    optimize->add_option("--eval-subset", state.config.evo.eval_subset,
                         "labeled utterances per scoring pass (0 = all)");
    optimize->add_option("--seed", state.config.seed, "rng seed for parent picks");
    optimize->add_option("--eval-seed", state.eval_seed,
                         "seed for the eval subset and demonstrations (defaults to --seed)");
    optimize->add_option("--demos", state.config.evo.demos, "demonstrations per scoring query");
    optimize->add_option("--meta-prompt", state.meta_prompt_file,
                         "crossover/mutation template file ({parent_a}/{parent_b})");
    optimize->add_option("--out", state.config.out_dir, "run directory")->required();
    optimize->add_flag("--resume", state.resume, "continue from the run directory's checkpoint");

    auto* report = app.add_subcommand("report", "render tables and cost for a finished run");
    report->add_option("rundir", state.run_dir, "run directory")->required();

    auto* cost = app.add_subcommand("cost", "print the token/cost ledger of a run");
    cost->add_option("rundir", state.run_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        finalize_common(state);
        if (baseline->parsed()) {
            return cmd_baseline(state.config, state.include_oracle, std::cout);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(state.config, state.prompt_file, std::cout);
        }
        if (optimize->parsed()) {
            state.config.evo.rng_seed = state.config.seed;
            state.config.evo.eval_seed =
                optimize->count("--eval-seed") > 0 ? state.eval_seed : state.config.seed;
            if (!state.meta_prompt_file.empty()) {
                state.config.evo.meta = MetaPrompt::load(state.meta_prompt_file);
            }
            if (state.resume) {
                // The stored run config is the base; explicit flags override it.
                const std::filesystem::path stored_path =
                    std::filesystem::path(state.config.out_dir) / "run.json";
                if (!std::filesystem::exists(stored_path)) {
                    throw DataError("cannot resume: " + stored_path.string() + " not found");
                }
                RunConfig stored;
                try {
                    stored = RunConfig::from_json(json::parse(read_text_file(stored_path)));
                } catch (const json::exception& err) {
                    throw DataError("corrupt run config " + stored_path.string() + ": " +
                                    err.what());
                }
                RunConfig merged = stored;
                merged.out_dir = state.config.out_dir;
                if (optimize->count("--data")) merged.data_path = state.config.data_path;
                if (optimize->count("--train")) merged.train_path = state.config.train_path;
                if (optimize->count("--provider")) merged.provider.kind = state.config.provider.kind;
                if (optimize->count("--model")) merged.provider.http.model = state.config.provider.http.model;
                if (optimize->count("--base-url")) merged.provider.http.base_url = state.config.provider.http.base_url;
                if (optimize->count("--cache-dir")) merged.cache_dir = state.config.cache_dir;
                if (optimize->count("--concurrency")) merged.concurrency = state.config.concurrency;
                if (optimize->count("--iters")) merged.evo.iterations = state.config.evo.iterations;
                if (optimize->count("--pop")) merged.evo.population_size = state.config.evo.population_size;
                if (optimize->count("--eval-subset")) merged.evo.eval_subset = state.config.evo.eval_subset;
                if (optimize->count("--seed")) {
                    merged.seed = state.config.seed;
                    merged.evo.rng_seed = state.config.evo.rng_seed;
                }
                if (optimize->count("--eval-seed")) merged.evo.eval_seed = state.config.evo.eval_seed;
                if (optimize->count("--demos")) merged.evo.demos = state.config.evo.demos;
                if (optimize->count("--meta-prompt")) merged.evo.meta = state.config.evo.meta;
                state.config = merged;
            }
            return cmd_optimize(state.config, state.seeds_dir, state.resume, std::cout);
        }
        if (report->parsed()) {
            return cmd_report(state.run_dir, std::cout);
        }
        if (cost->parsed()) {
            return cmd_cost(state.run_dir, std::cout);
        }
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const DataError& err) {
        std::cerr << "data error: " << err.what() << "\n";
        return kExitData;
    } catch (const ProviderError& err) {
        std::cerr << "provider error (" << to_string(err.kind) << "): " << err.what() << "\n";
        return kExitProvider;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}

}  // namespace evogec
