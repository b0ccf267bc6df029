#include "evogec/corpus.hpp"

#include "evogec/errors.hpp"
#include "evogec/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <iostream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace evogec {

using nlohmann::json;

const char* to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
        case Split::other: return "other";
    }
    return "other";
}

Split split_from_string(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "valid" || name == "dev") return Split::valid;
    if (name == "test") return Split::test;
    if (name == "other") return Split::other;
    throw ConfigError("unknown split name: '" + std::string(name) + "'");
}

bool Corpus::fully_labeled() const {
    return std::all_of(utterances.begin(), utterances.end(),
                       [](const Utterance& u) { return u.reference.has_value(); });
}

namespace {

Utterance parse_record(const json& record, std::size_t index, const FieldMapping& mapping) {
    const std::string where = "record " + std::to_string(index);
    if (!record.is_object()) throw DataError(where + ": expected a JSON object");

    Utterance utt;
    if (!record.contains(mapping.hypotheses_key)) {
        throw DataError(where + ": missing key '" + mapping.hypotheses_key + "'");
    }
    const json& hyps = record.at(mapping.hypotheses_key);
    if (hyps.is_array()) {
        for (const json& h : hyps) {
            if (!h.is_string()) {
                throw DataError(where + ": key '" + mapping.hypotheses_key +
                                "' must contain strings");
            }
            utt.hypotheses.push_back(h.get<std::string>());
        }
    } else if (hyps.is_string()) {
        utt.hypotheses.push_back(hyps.get<std::string>());
    } else {
        throw DataError(where + ": key '" + mapping.hypotheses_key +
                        "' must be a string array");
    }
    if (utt.hypotheses.empty()) throw DataError(where + ": empty hypothesis list");
    for (const std::string& h : utt.hypotheses) {
        if (trim_ws(h).empty()) {
            std::cerr << "warning: " << where << ": empty hypothesis kept as-is\n";
        }
    }

    if (record.contains(mapping.reference_key) && !record.at(mapping.reference_key).is_null()) {
        const json& ref = record.at(mapping.reference_key);
        if (!ref.is_string()) {
            throw DataError(where + ": key '" + mapping.reference_key + "' must be a string");
        }
        utt.reference = ref.get<std::string>();
    }

    if (mapping.id_key && record.contains(*mapping.id_key)) {
        const json& id = record.at(*mapping.id_key);
        if (id.is_string()) {
            utt.id = id.get<std::string>();
        } else if (id.is_number_integer()) {
            utt.id = std::to_string(id.get<long long>());
        } else {
            throw DataError(where + ": key '" + *mapping.id_key + "' must be a string or integer");
        }
    } else {
        utt.id = "utt-" + std::to_string(index);
    }
    return utt;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, const FieldMapping& mapping, Split split) {
    if (mapping.hypotheses_key.empty() || mapping.reference_key.empty() ||
        (mapping.id_key && mapping.id_key->empty())) {
        throw ConfigError("field mapping keys must be non-empty");
    }

    const std::string raw = read_text_file(path);
    const std::size_t first = raw.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw DataError(path.string() + ": empty corpus file");

    Corpus corpus;
    corpus.name = path.stem().string();
    corpus.split = split;

    if (raw[first] == '[') {
        json records;
        try {
            records = json::parse(raw);
        } catch (const json::parse_error& err) {
            throw DataError(path.string() + ": invalid JSON array: " + err.what());
        }
        if (!records.is_array()) throw DataError(path.string() + ": expected a JSON array");
        for (std::size_t i = 0; i < records.size(); ++i) {
            corpus.utterances.push_back(parse_record(records[i], i, mapping));
        }
    } else {
        std::istringstream lines{raw};
        std::string line;
        std::size_t index = 0;
        std::size_t lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            if (trim_ws(line).empty()) continue;
            json record;
            try {
                record = json::parse(line);
            } catch (const json::parse_error& err) {
                throw DataError(path.string() + ": record " + std::to_string(index) + " (line " +
                                std::to_string(lineno) + "): " + err.what());
            }
            corpus.utterances.push_back(parse_record(record, index, mapping));
            ++index;
        }
    }

    if (corpus.utterances.empty()) throw DataError(path.string() + ": empty corpus");

    std::unordered_set<std::string> seen;
    for (const Utterance& utt : corpus.utterances) {
        if (!seen.insert(utt.id).second) {
            throw DataError(path.string() + ": duplicate utterance id '" + utt.id + "'");
        }
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path,
                 const FieldMapping& mapping) {
    std::string out;
    for (const Utterance& utt : corpus.utterances) {
        json record;
        record[mapping.hypotheses_key] = utt.hypotheses;
        if (utt.reference) record[mapping.reference_key] = *utt.reference;
        if (mapping.id_key) record[*mapping.id_key] = utt.id;
        out += record.dump();
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

Corpus sample_subset(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
    if (n < 1 || n > corpus.size()) {
        throw DataError("subset size " + std::to_string(n) + " out of range for corpus of " +
                        std::to_string(corpus.size()));
    }
    std::vector<std::size_t> indices(corpus.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first n slots are the sample.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i + static_cast<std::size_t>(bounded_rand(rng, indices.size() - i));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(n);
    std::sort(indices.begin(), indices.end());

    Corpus out;
    out.name = corpus.name;
    out.split = corpus.split;
    out.utterances.reserve(n);
    for (std::size_t k : indices) out.utterances.push_back(corpus.utterances[k]);
    return out;
}

}  // namespace evogec
