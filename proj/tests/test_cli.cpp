#include "evogec/cli.hpp"

#include "evogec/gec.hpp"
#include "evogec/util.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <sstream>

using namespace evogec;
using testsupport::TempDir;
using testsupport::make_synthetic_corpus;

namespace {

const std::filesystem::path kToyData =
    std::filesystem::path(EVOGEC_TEST_DATA_DIR) / "toy.jsonl";
const std::filesystem::path kSeedsDir = std::filesystem::path(EVOGEC_PROMPTS_DIR) / "seeds";
const std::filesystem::path kBaselinePrompt =
    std::filesystem::path(EVOGEC_PROMPTS_DIR) / "baseline.txt";

int run_argv(std::vector<std::string> args) {
    std::vector<const char*> argv;
    argv.push_back("evogec");
    for (const std::string& arg : args) argv.push_back(arg.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

RunConfig make_config(const TempDir& dir, const std::string& provider_kind) {
    RunConfig config;
    config.data_path = kToyData.string();
    config.provider.kind = provider_kind;
    config.cache_dir = (dir.path / "cache").string();
    config.out_dir = (dir.path / "run").string();
    return config;
}

std::map<std::string, std::string> snapshot_dir(const std::filesystem::path& dir) {
    std::map<std::string, std::string> contents;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            contents[entry.path().string()] = read_text_file(entry.path());
        }
    }
    return contents;
}

std::size_t count_lines(const std::string& text) {
    std::size_t lines = 0;
    for (char c : text) {
        if (c == '\n') ++lines;
    }
    return lines;
}

}  // namespace

TEST_CASE("parse_norm_spec understands the toggle list") {
    CHECK(parse_norm_spec("lowercase,punct") == NormPolicy{true, true});
    CHECK(parse_norm_spec("lowercase") == NormPolicy{true, false});
    CHECK(parse_norm_spec("punct") == NormPolicy{false, true});
    CHECK(parse_norm_spec("none") == NormPolicy{false, false});
    CHECK_THROWS_AS(parse_norm_spec("bogus"), ConfigError);
    CHECK_THROWS_AS(parse_norm_spec(""), ConfigError);
}

TEST_CASE("results tables sort by iteration then prompt name and format WER at 2 decimals") {
    ResultsTable table;
    table.rows.push_back({"b", "b", 1, 2, 0.0537});
    table.rows.push_back({"a", "a", 1, std::nullopt, 0.0749});
    table.rows.push_back({"c", "c", 1, 1, 0.0631});
    table.rows.push_back({"a2", "a2", 1, 1, 0.0599245});
    table.sort_rows();

    CHECK(table.rows[0].prompt_name == "a");
    CHECK(table.rows[1].prompt_name == "a2");
    CHECK(table.rows[2].prompt_name == "c");
    CHECK(table.rows[3].prompt_name == "b");

    const std::string markdown = table.to_markdown();
    CHECK(markdown.find("| a | a | 1 | - | 7.49 |") != std::string::npos);
    CHECK(markdown.find("| a2 | a2 | 1 | 1 | 5.99 |") != std::string::npos);

    const std::string csv = table.to_csv();
    CHECK(csv.find("a,a,1,,7.49") != std::string::npos);
    CHECK(csv.find("a2,a2,1,1,5.99245") != std::string::npos);  // full precision in CSV
}

TEST_CASE("run config round-trips through json") {
    RunConfig config;
    config.data_path = "x.jsonl";
    config.train_path = "y.jsonl";
    config.mapping.id_key = "uid";
    config.split = Split::train;
    config.policy = {false, true};
    config.subset = 123;
    config.seed = 77;
    config.demos = 2;
    config.provider.kind = "oracle";
    config.evo.iterations = 9;
    const RunConfig reparsed = RunConfig::from_json(config.to_json());
    CHECK(reparsed.to_json() == config.to_json());
}

TEST_CASE("cmd_baseline matches the metrics module and writes CSV") {
    TempDir dir;
    RunConfig config = make_config(dir, "echo");
    std::ostringstream out;
    CHECK(cmd_baseline(config, true, out) == kExitOk);

    const Corpus corpus = load_corpus(kToyData);
    const double onebest = onebest_baseline(corpus).corpus_wer;
    const double oracle = oracle_nbest_baseline(corpus).corpus_wer;
    CHECK(out.str().find("| 1-best | - | 0 | - | " + format_double(onebest * 100, 2) + " |") !=
          std::string::npos);
    CHECK(out.str().find("| oracle-nbest | - | 0 | - | " + format_double(oracle * 100, 2) +
                         " |") != std::string::npos);

    const std::string csv = read_text_file(dir.path / "run" / "results.csv");
    CHECK(csv.find("1-best") != std::string::npos);
    CHECK(std::filesystem::exists(dir.path / "run" / "run.json"));
}

TEST_CASE("cmd_baseline on a perfect corpus prints zeros") {
    TempDir dir;
    Corpus corpus;
    for (int i = 0; i < 3; ++i) {
        const std::string text = "word number " + std::to_string(i);
        corpus.utterances.push_back({"u" + std::to_string(i), {text, "other"}, text});
    }
    save_corpus(corpus, dir.path / "perfect.jsonl");
    RunConfig config;
    config.data_path = (dir.path / "perfect.jsonl").string();
    std::ostringstream out;
    CHECK(cmd_baseline(config, true, out) == kExitOk);
    CHECK(out.str().find("| 1-best | - | 0 | - | 0.00 |") != std::string::npos);
    CHECK(out.str().find("| oracle-nbest | - | 0 | - | 0.00 |") != std::string::npos);
}

TEST_CASE("cmd_baseline requires references") {
    TempDir dir;
    Corpus corpus = make_synthetic_corpus(3, 4, /*labeled=*/false);
    save_corpus(corpus, dir.path / "unlabeled.jsonl");
    RunConfig config;
    config.data_path = (dir.path / "unlabeled.jsonl").string();
    std::ostringstream out;
    CHECK_THROWS_WITH_AS(cmd_baseline(config, true, out),
                         doctest::Contains("references required"), DataError);
}

TEST_CASE("cmd_evaluate with the identity provider reproduces the onebest row") {
    TempDir dir;
    RunConfig config = make_config(dir, "echo");
    std::ostringstream out;
    CHECK(cmd_evaluate(config, kBaselinePrompt, out) == kExitOk);

    const Corpus corpus = load_corpus(kToyData);
    const double expected = onebest_baseline(corpus).corpus_wer;
    CHECK(out.str().find("| baseline | baseline | 0 | - | " +
                         format_double(expected * 100, 2) + " |") != std::string::npos);

    CHECK(std::filesystem::exists(dir.path / "run" / "utterances.csv"));
    CHECK(std::filesystem::exists(dir.path / "run" / "ledger.csv"));
    CHECK(std::filesystem::exists(dir.path / "run" / "diffs"));
    const std::string utterances = read_text_file(dir.path / "run" / "utterances.csv");
    CHECK(count_lines(utterances) == corpus.size() + 1);
}

TEST_CASE("cmd_evaluate with the oracle provider reproduces the oracle row") {
    TempDir dir;
    RunConfig config = make_config(dir, "oracle");
    std::ostringstream out;
    CHECK(cmd_evaluate(config, kBaselinePrompt, out) == kExitOk);
    const double expected = oracle_nbest_baseline(load_corpus(kToyData)).corpus_wer;
    CHECK(out.str().find(format_double(expected * 100, 2)) != std::string::npos);
}

TEST_CASE("cmd_evaluate writes at most the requested number of worst-case diffs") {
    TempDir dir;
    RunConfig config = make_config(dir, "echo");
    config.worst_diffs = 3;
    std::ostringstream out;
    CHECK(cmd_evaluate(config, kBaselinePrompt, out) == kExitOk);
    std::size_t diff_files = 0;
    for (const auto& entry :
         std::filesystem::directory_iterator(dir.path / "run" / "diffs")) {
        (void)entry;
        ++diff_files;
    }
    CHECK(diff_files == 3);
}

TEST_CASE("cmd_evaluate reruns byte-identically against a warm cache") {
    TempDir dir;
    RunConfig config = make_config(dir, "oracle");
    config.demos = 1;
    config.seed = 11;
    std::ostringstream out_a;
    CHECK(cmd_evaluate(config, kBaselinePrompt, out_a) == kExitOk);
    const std::string results_a = read_text_file(dir.path / "run" / "results.csv");
    const std::string utterances_a = read_text_file(dir.path / "run" / "utterances.csv");

    std::ostringstream out_b;
    CHECK(cmd_evaluate(config, kBaselinePrompt, out_b) == kExitOk);
    CHECK(out_b.str() == out_a.str());
    CHECK(read_text_file(dir.path / "run" / "results.csv") == results_a);
    CHECK(read_text_file(dir.path / "run" / "utterances.csv") == utterances_a);

    // warm cache means zero fresh provider calls on the second run
    const auto ledger = testsupport::read_json_file(dir.path / "run" / "ledger.json");
    for (const auto& entry : ledger.at("usage")) {
        CHECK(entry.at("cache_hits").get<int>() > 0);
    }
}

TEST_CASE("cmd_optimize produces the block table, best prompt and run files") {
    TempDir dir;
    RunConfig config = make_config(dir, "echo");
    config.evo.eval_subset = 0;
    config.evo.demos = 1;
    std::ostringstream out;
    CHECK(cmd_optimize(config, kSeedsDir, false, out) == kExitOk);

    const std::string markdown = out.str();
    for (int t = 1; t <= 3; ++t) {
        for (int k = 1; k <= 5; ++k) {
            CHECK(markdown.find("mutated-" + std::to_string(k) + "-iter" + std::to_string(t)) !=
                  std::string::npos);
        }
    }
    const std::string csv = read_text_file(dir.path / "run" / "results.csv");
    CHECK(count_lines(csv) == 21);  // header + N*(1+T)
    CHECK(std::filesystem::exists(dir.path / "run" / "best-prompt.txt"));
    CHECK(std::filesystem::exists(dir.path / "run" / "checkpoint.json"));
    CHECK(std::filesystem::exists(dir.path / "run" / "table.md"));
    CHECK(std::filesystem::exists(dir.path / "run" / "ledger.csv"));
}

TEST_CASE("cmd_optimize resume of a finished run reproduces the table") {
    TempDir dir;
    RunConfig config = make_config(dir, "echo");
    config.evo.eval_subset = 0;
    std::ostringstream out_a;
    CHECK(cmd_optimize(config, kSeedsDir, false, out_a) == kExitOk);
    const std::string results_a = read_text_file(dir.path / "run" / "results.csv");

    std::ostringstream out_b;
    CHECK(cmd_optimize(config, kSeedsDir, true, out_b) == kExitOk);
    CHECK(out_b.str() == out_a.str());
    CHECK(read_text_file(dir.path / "run" / "results.csv") == results_a);
}

TEST_CASE("cmd_report renders a finished optimization run without touching it") {
    TempDir dir;
    RunConfig config = make_config(dir, "echo");
    config.evo.eval_subset = 0;
    std::ostringstream optimize_out;
    CHECK(cmd_optimize(config, kSeedsDir, false, optimize_out) == kExitOk);

    const auto before = snapshot_dir(dir.path / "run");
    std::ostringstream out;
    CHECK(cmd_report(dir.path / "run", out) == kExitOk);
    CHECK(snapshot_dir(dir.path / "run") == before);

    // header + N*(1+T) table rows
    CHECK(count_lines(out.str().substr(0, out.str().find("\n\n"))) >= 21);
    CHECK(out.str().find("best prompt:") != std::string::npos);
    CHECK(out.str().find("total cost: $0.00") != std::string::npos);
}

TEST_CASE("cmd_report prices a stored ledger") {
    TempDir dir;
    const std::filesystem::path run = dir.path / "run";
    std::filesystem::create_directories(run);
    write_text_file_atomic(run / "results.csv", "label,prompt,demos,iteration,wer_percent\n");
    CostLedger ledger;
    ledger.set_price("claude", {3.0, 15.0});
    ledger.record_call("claude", "gec", 100'000, 20'000);
    write_text_file_atomic(run / "ledger.json", ledger.to_json().dump(2) + "\n");

    std::ostringstream out;
    CHECK(cmd_report(run, out) == kExitOk);
    CHECK(out.str().find("total cost: $0.60") != std::string::npos);

    std::ostringstream cost_out;
    CHECK(cmd_cost(run, cost_out) == kExitOk);
    CHECK(cost_out.str().find("total cost: $0.60") != std::string::npos);
}

TEST_CASE("cmd_report and cmd_cost reject unusable run directories") {
    TempDir dir;
    std::filesystem::create_directories(dir.path / "empty");
    std::ostringstream out;
    CHECK_THROWS_AS(cmd_report(dir.path / "empty", out), DataError);
    CHECK_THROWS_AS(cmd_report(dir.path / "missing", out), DataError);
    CHECK_THROWS_AS(cmd_cost(dir.path / "empty", out), DataError);
}

TEST_CASE("run_cli maps error classes onto exit codes") {
    SUBCASE("unknown flags are config errors") {
        CHECK(run_argv({"baseline", "--data", kToyData.string(), "--bogus-flag"}) == kExitConfig);
    }
    SUBCASE("missing subcommand is a config error") {
        CHECK(run_argv({}) == kExitConfig);
    }
    SUBCASE("missing data files are data errors") {
        CHECK(run_argv({"baseline", "--data", "/nonexistent/nothing.jsonl"}) == kExitData);
    }
    SUBCASE("unknown provider kinds are config errors") {
        CHECK(run_argv({"evaluate", "--data", kToyData.string(), "--prompt-file",
                        kBaselinePrompt.string(), "--provider", "martian"}) == kExitConfig);
    }
    SUBCASE("bad norm specs are config errors") {
        CHECK(run_argv({"baseline", "--data", kToyData.string(), "--norm", "shouting"}) ==
              kExitConfig);
    }
    SUBCASE("happy path returns zero") {
        CHECK(run_argv({"baseline", "--data", kToyData.string()}) == kExitOk);
    }
}

TEST_CASE("run_cli executes evaluate end to end") {
    TempDir dir;
    CHECK(run_argv({"evaluate", "--data", kToyData.string(), "--prompt-file",
                    kBaselinePrompt.string(), "--provider", "oracle", "--demos", "1", "--seed",
                    "3", "--out", (dir.path / "run").string(), "--cache-dir",
                    (dir.path / "cache").string()}) == kExitOk);
    CHECK(std::filesystem::exists(dir.path / "run" / "results.csv"));
}

TEST_CASE("run_cli reads options from a TOML config file") {
    TempDir dir;
    const std::filesystem::path cfg = dir.path / "run.toml";
    write_text_file_atomic(cfg, "[baseline]\ndata = \"" + kToyData.string() + "\"\n");
    CHECK(run_argv({"--config", cfg.string(), "baseline"}) == kExitOk);
    // flags beat the config file
    CHECK(run_argv({"--config", cfg.string(), "baseline", "--data",
                    "/nonexistent/nothing.jsonl"}) == kExitData);
}

TEST_CASE("run_cli surfaces provider hard failures from optimize as exit 4") {
    TempDir dir;
    setenv("EVOGEC_TEST_KEY", "k", 1);
    CHECK(run_argv({"optimize", "--data", kToyData.string(), "--seeds", kSeedsDir.string(),
                    "--provider", "live", "--base-url", "http://127.0.0.1:1", "--api-key-env",
                    "EVOGEC_TEST_KEY", "--eval-subset", "0", "--demos", "0", "--retries", "0",
                    "--retry-delay-ms", "1", "--out", (dir.path / "run").string()}) ==
          kExitProvider);
}
