#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "promptopt/util.hpp"

namespace promptopt {

// ---------------------------------------------------------------------------
// Errors

struct MissingField : Error {
    explicit MissingField(const std::string& field) : Error("MissingField", field) {}
};

struct ScoreOutOfRange : Error {
    ScoreOutOfRange(const std::string& metric, double value)
        : Error("ScoreOutOfRange", metric + "=" + format_double(value)),
          metric_name(metric),
          value(value) {}
    std::string metric_name;
    double value;
};

struct EmptyText : Error {
    explicit EmptyText(const std::string& field) : Error("EmptyText", field) {}
};

struct InvalidRecord : Error {
    explicit InvalidRecord(const std::string& message) : Error("InvalidRecord", message) {}
};

struct DuplicateDocId : Error {
    explicit DuplicateDocId(const std::string& id) : Error("DuplicateDocId", id) {}
};

// ---------------------------------------------------------------------------
// Prompts

struct Turn {
    std::string role;
    std::string text;

    bool operator==(const Turn&) const = default;
};

/// A single turn flattens to the bare utterance; multi-turn conversations
/// join "role: text" blocks with blank lines. The flattened form is what the
/// retrieval index sees.
std::string flatten_turns(const std::vector<Turn>& turns);

struct PromptRecord {
    std::string id;
    std::string text;          // always the canonical flattening of turns
    std::vector<Turn> turns;   // length >= 1

    static PromptRecord single(std::string id, std::string text);
    static PromptRecord multi(std::string id, std::vector<Turn> turns);

    bool operator==(const PromptRecord&) const = default;
};

/// Throws EmptyText / InvalidRecord when invariants do not hold.
void validate_prompt(const PromptRecord& prompt);

// ---------------------------------------------------------------------------
// Scores

inline constexpr std::size_t kMetricCount = 5;
inline constexpr std::array<const char*, kMetricCount> kMetricNames = {
    "helpfulness", "correctness", "coherence", "complexity", "verbosity"};
inline constexpr std::array<const char*, kMetricCount> kMetricKeys = {
    "help", "corr", "coh", "comp", "verb"};

/// Five raw metric scores on the 0-4 scale, in fixed component order
/// (help, corr, coh, comp, verb) everywhere they are serialized or printed.
struct ScoreVector {
    double help = 0;
    double corr = 0;
    double coh = 0;
    double comp = 0;
    double verb = 0;

    std::array<double, kMetricCount> as_array() const { return {help, corr, coh, comp, verb}; }
    static ScoreVector from_array(const std::array<double, kMetricCount>& a) {
        return {a[0], a[1], a[2], a[3], a[4]};
    }

    bool operator==(const ScoreVector&) const = default;
};

/// Throws ScoreOutOfRange naming the first offending metric.
void validate_scores(const ScoreVector& scores);

// ---------------------------------------------------------------------------
// Training data and reasoning assets

struct TrainingInstance {
    PromptRecord prompt;
    std::string response;
    ScoreVector scores;

    const std::string& id() const { return prompt.id; }

    bool operator==(const TrainingInstance&) const = default;
};

struct ReasoningAssets {
    std::string card;
    std::string diagnosis;
    std::vector<std::string> directives;  // length >= 1, entries non-empty
    std::string source_id;

    bool operator==(const ReasoningAssets&) const = default;
};

void validate_assets(const ReasoningAssets& assets);

struct RetrievalHit {
    TrainingInstance instance;
    ReasoningAssets assets;
    double score = 0;  // non-negative BM25 relevance
    int rank = 0;      // 1-based

    bool operator==(const RetrievalHit&) const = default;
};

/// Ranks must be 1..n with non-increasing scores.
void validate_hits(const std::vector<RetrievalHit>& hits);

// ---------------------------------------------------------------------------
// Usage accounting

struct UsageStats {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t calls = 0;

    UsageStats& operator+=(const UsageStats& o) {
        input_tokens += o.input_tokens;
        output_tokens += o.output_tokens;
        calls += o.calls;
        return *this;
    }
    friend UsageStats operator+(UsageStats a, const UsageStats& b) { return a += b; }

    bool operator==(const UsageStats&) const = default;
};

/// calls = 0 implies zero tokens.
void validate_usage(const UsageStats& usage);

// ---------------------------------------------------------------------------
// Optimization results

enum class Strategy { MaSapo, MaSapoCombined, Direct, Cot, Role, Rag };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);  // throws InvalidRecord
bool is_single_pass(Strategy s);                          // direct / cot / role

struct OptimizationResult {
    PromptRecord original;
    std::string report;                 // Analyzer output; empty for single-pass strategies
    PromptRecord optimized_prompt;
    std::string optimized_response;
    UsageStats usage;
    std::optional<ScoreVector> judged;
    Strategy strategy = Strategy::MaSapo;
    int k_used = 0;
    bool retrieval_empty = false;       // set when retrieval found nothing and the
                                        // item fell back to the direct strategy

    bool operator==(const OptimizationResult&) const = default;
};

void validate_result(const OptimizationResult& result);

// ---------------------------------------------------------------------------
// Ingestion-side validation

/// A candidate record as parsed from a dataset row, before validation.
struct RawInstance {
    std::optional<std::string> id;
    std::optional<std::string> prompt_text;
    std::optional<std::vector<Turn>> turns;  // optional multi-turn structure
    std::optional<std::string> response;
    std::array<std::optional<double>, kMetricCount> scores;
};

/// Validates field presence, score bounds and emptiness rules; returns a
/// fully-formed TrainingInstance. `fallback_id` (the ingestion ordinal in
/// decimal) is used when the row carries no id.
TrainingInstance validate_training_instance(const RawInstance& raw,
                                            const std::string& fallback_id);

}  // namespace promptopt
