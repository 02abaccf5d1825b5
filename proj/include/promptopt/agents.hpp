#pragma once

#include <utility>

#include "promptopt/core.hpp"
#include "promptopt/gateway.hpp"
#include "promptopt/templates.hpp"

namespace promptopt {

struct AgentInputEmpty : Error {
    explicit AgentInputEmpty(const std::string& field) : Error("AgentInputEmpty", field) {}
};

struct AgentOutputEmpty : Error {
    explicit AgentOutputEmpty(const std::string& agent) : Error("AgentOutputEmpty", agent) {}
};

struct UnparseableDirectives : Error {
    explicit UnparseableDirectives(std::string raw_text)
        : Error("UnparseableDirectives", "no directives found"), raw(std::move(raw_text)) {}
    std::string raw;  // retained for audit
};

struct UnparseableCombinedOutput : Error {
    explicit UnparseableCombinedOutput(std::string raw_text)
        : Error("UnparseableCombinedOutput", "missing ANALYSIS / OPTIMIZED_PROMPT sections"),
          raw(std::move(raw_text)) {}
    std::string raw;
};

struct EmptyRetrieval : Error {
    EmptyRetrieval() : Error("EmptyRetrieval", "no retrieval hits") {}
};

struct AgentOptions {
    int max_tokens_analysis = 1024;    // cards, diagnoses, directives, reports
    int max_tokens_generation = 2048;  // optimized prompts and responses
    std::string model_id;
};

struct TextResult {
    std::string text;
    UsageStats usage;
};

struct DirectivesResult {
    std::vector<std::string> directives;
    UsageStats usage;
};

struct RefineResult {
    PromptRecord optimized;
    UsageStats usage;
};

struct CombinedResult {
    std::string report;
    PromptRecord optimized;
    UsageStats usage;
};

// --- payload construction -------------------------------------------------

/// prompt, response and the five scores (rendered with the shortest exact
/// decimal form, so "4" and "2.5", never "4.000000").
Bindings instance_bindings(const TrainingInstance& instance);

/// One block per hit in rank order: retrieved prompt, response, card,
/// diagnosis, directives. Retrieval scores are deliberately not included.
std::string serialize_hits(const std::vector<RetrievalHit>& hits);

/// RAG-baseline view: prompt, response and the five scores per exemplar,
/// never the reasoning assets.
std::string serialize_rag_examples(const std::vector<RetrievalHit>& hits);

// --- completion parsing ----------------------------------------------------

/// Splits on leading enumeration markers ("1.", "-", "•") at line starts;
/// a completion without markers becomes a single directive. Throws
/// UnparseableDirectives when markers exist but carry no text.
std::vector<std::string> parse_directives(const std::string& completion);

/// Trims and drops a leading "Final optimized prompt:" label (case-insensitive).
std::string strip_refiner_label(const std::string& completion);

/// Extracts the "=== ANALYSIS ===" and "=== OPTIMIZED_PROMPT ===" sections.
std::pair<std::string, std::string> parse_combined_output(const std::string& completion);

// --- the agent calls (one gateway call each) --------------------------------

TextResult explain_metrics(const TrainingInstance& instance, ChatProvider& provider,
                           const TemplateSet& templates, const AgentOptions& options = {});

TextResult diagnose(const TrainingInstance& instance, const std::string& card,
                    ChatProvider& provider, const TemplateSet& templates,
                    const AgentOptions& options = {});

DirectivesResult synthesize_actions(const TrainingInstance& instance, const std::string& card,
                                    const std::string& diagnosis, ChatProvider& provider,
                                    const TemplateSet& templates,
                                    const AgentOptions& options = {});

TextResult analyze(const PromptRecord& test_prompt, const std::vector<RetrievalHit>& hits,
                   ChatProvider& provider, const TemplateSet& templates,
                   const AgentOptions& options = {});

RefineResult refine(const PromptRecord& test_prompt, const std::string& report,
                    ChatProvider& provider, const TemplateSet& templates,
                    const AgentOptions& options = {});

CombinedResult analyze_and_refine_combined(const PromptRecord& test_prompt,
                                           const std::vector<RetrievalHit>& hits,
                                           ChatProvider& provider, const TemplateSet& templates,
                                           const AgentOptions& options = {});

}  // namespace promptopt
