#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evogec {

enum class Split { train, valid, test, other };

const char* to_string(Split split);
Split split_from_string(std::string_view name);  // ConfigError on unknown names

// One recognition example: ranked hypothesis list plus optional ground truth.
struct Utterance {
    std::string id;
    std::vector<std::string> hypotheses;  // best-first, K >= 1
    std::optional<std::string> reference;

    bool operator==(const Utterance&) const = default;
};

// Maps record fields onto Utterance members; public dumps disagree on names.
struct FieldMapping {
    std::string hypotheses_key = "input";
    std::string reference_key = "output";
    std::optional<std::string> id_key;  // absent: ids synthesized as "utt-<index>"
};

struct Corpus {
    std::string name;
    Split split = Split::other;
    std::vector<Utterance> utterances;  // file order, stable

    std::size_t size() const { return utterances.size(); }
    bool fully_labeled() const;
};

// Accepts one JSON array or JSON-lines, detected from the first non-whitespace
// byte. A record without the hypotheses key is an error naming its index; a
// record without the reference key loads with reference absent.
Corpus load_corpus(const std::filesystem::path& path, const FieldMapping& mapping = {},
                   Split split = Split::other);

// JSON-lines, one record per utterance, same mapping keys. Reloading the file
// reproduces the corpus exactly.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path,
                 const FieldMapping& mapping = {});

// Deterministic sample of n utterances without replacement; original relative
// order is preserved. Requires 1 <= n <= |corpus|.
Corpus sample_subset(const Corpus& corpus, std::size_t n, std::uint64_t seed);

}  // namespace evogec
