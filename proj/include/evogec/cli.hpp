#pragma once

#include "evogec/corpus.hpp"
#include "evogec/evolve.hpp"
#include "evogec/http_provider.hpp"
#include "evogec/metrics.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace evogec {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitProvider = 4;

struct ProviderSettings {
    std::string kind = "live";  // live | echo | oracle | reference
    HttpProviderConfig http;
    std::size_t echo_index = 0;

    nlohmann::json to_json() const;
    static ProviderSettings from_json(const nlohmann::json& j);
};

// The resolved settings of one run; serialized into the run directory so every
// run is self-describing.
struct RunConfig {
    std::string data_path;
    std::string train_path;  // demonstration/optimization source; data_path when empty
    FieldMapping mapping;
    Split split = Split::test;
    NormPolicy policy;
    std::size_t subset = 0;  // 0 = whole corpus
    std::uint64_t seed = 0;
    int demos = 0;
    int concurrency = 4;
    bool include_marker = true;
    int worst_diffs = 10;
    int max_output_tokens = 256;
    double temperature = 0.0;
    RetryPolicy retry;
    std::string out_dir;
    std::string cache_dir;
    ProviderSettings provider;
    EvoConfig evo;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

struct ResultRow {
    std::string label;
    std::string prompt_name;
    int demos = 0;
    std::optional<int> iteration;
    double wer = 0.0;  // fraction
};

struct ResultsTable {
    std::vector<ResultRow> rows;

    void sort_rows();  // by (iteration, prompt name); rows without iteration first
    std::string to_markdown() const;  // WER at 2 decimals
    std::string to_csv() const;       // full precision
};

// Mock kinds copy the corpus they answer from; the ledger gets a price entry
// for the provider (live prices from settings, zero for mocks).
std::unique_ptr<Provider> make_provider(const ProviderSettings& settings, const Corpus& corpus,
                                        const NormPolicy& policy, CostLedger& ledger);

ResultsTable evolution_table(const EvolutionLog& log);

int cmd_baseline(const RunConfig& config, bool include_oracle, std::ostream& out);
int cmd_evaluate(const RunConfig& config, const std::filesystem::path& prompt_file,
                 std::ostream& out);
int cmd_optimize(const RunConfig& config, const std::filesystem::path& seeds_dir, bool resume,
                 std::ostream& out);
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out);
int cmd_cost(const std::filesystem::path& run_dir, std::ostream& out);

// Full argument parsing and dispatch. Exit codes: 0 ok, 2 config error,
// 3 data error, 4 provider error.
int run_cli(int argc, const char* const* argv);

NormPolicy parse_norm_spec(const std::string& spec);  // e.g. "lowercase,punct" or "none"

}  // namespace evogec
