#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "promptopt/core.hpp"
#include "promptopt/util.hpp"

namespace promptopt {

struct OrdinalOutOfRange : Error {
    OrdinalOutOfRange(std::size_t ordinal, std::size_t count)
        : Error("OrdinalOutOfRange",
                std::to_string(ordinal) + " >= " + std::to_string(count)) {}
};

struct IndexFormatError : Error {
    explicit IndexFormatError(const std::string& message) : Error("IndexFormatError", message) {}
};

/// Lowercases and splits on every non-alphanumeric codepoint; empty segments
/// are dropped. No stemming, no stopword removal. ASCII letters are folded;
/// non-ASCII letters pass through unchanged, while Unicode punctuation,
/// symbol and separator blocks split tokens just like ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

struct Posting {
    std::uint32_t doc = 0;  // ordinal, ascending within each list
    std::uint32_t tf = 0;
};

struct ScoredDoc {
    std::string id;
    std::size_t ordinal = 0;
    double score = 0;
};

/// Immutable BM25 inverted index over prompt text. Insertion order defines
/// doc ordinals; identical input order reproduces identical index files.
class Index {
public:
    static constexpr double kK1 = 1.2;
    static constexpr double kB = 0.75;

    static Index build(const std::vector<std::pair<std::string, std::string>>& docs);

    /// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), non-negative variant.
    /// Terms absent from the document contribute 0.
    double bm25_score(const std::vector<std::string>& query_terms, std::size_t ordinal) const;

    /// At most min(k, doc_count) results, descending score, ties broken by
    /// ascending ordinal; zero-score documents are excluded.
    std::vector<ScoredDoc> top_k(const std::string& query_text, std::size_t k) const;

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    std::size_t doc_length(std::size_t ordinal) const;
    const std::string& doc_id(std::size_t ordinal) const;

    void save(const std::filesystem::path& path) const;
    static Index load(const std::filesystem::path& path);

private:
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<std::string> doc_ids_;
    double avg_doc_length_ = 0;

    double idf(std::size_t df) const;
};

}  // namespace promptopt
