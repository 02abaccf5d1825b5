#pragma once

#include <filesystem>
#include <map>
#include <memory>

#include "promptopt/agents.hpp"
#include "promptopt/core.hpp"
#include "promptopt/evaluation.hpp"
#include "promptopt/gateway.hpp"
#include "promptopt/ledger.hpp"
#include "promptopt/retrieval.hpp"
#include "promptopt/store.hpp"

namespace promptopt {

struct AbortedTooManyFailures : Error {
    AbortedTooManyFailures(std::size_t failed, std::size_t total)
        : Error("AbortedTooManyFailures",
                std::to_string(failed) + " of " + std::to_string(total) + " records failed") {}
};

struct EmptyGrid : Error {
    EmptyGrid() : Error("EmptyGrid", "ablation grid has no cells") {}
};

enum class Variant { Split, Combined };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct PipelineConfig {
    int k = 3;                      // 10 is the default for the rag strategy
    Variant variant = Variant::Split;
    Strategy strategy = Strategy::MaSapo;
    std::string asset_provider = "mock";
    std::string optimizer_provider = "mock";
    std::string responder_provider = "mock";
    int parallelism = 4;
    std::uint64_t seed = 0;
    int max_tokens_analysis = 1024;    // cards, diagnoses, directives, reports
    int max_tokens_generation = 2048;  // optimized prompts and responses
    double failure_threshold = 0.10;
    std::string model_id;

    AgentOptions agent_options() const {
        return AgentOptions{max_tokens_analysis, max_tokens_generation, model_id};
    }
};

/// k >= 1 for every retrieval-backed strategy.
void validate_config(const PipelineConfig& config);

std::string config_digest(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Phases

struct TrainingRunStats {
    std::size_t processed = 0;  // records that gained assets in this run
    std::size_t skipped = 0;    // records that already had assets
    std::size_t failed = 0;
    UsageStats usage;           // training-category usage of this run
};

/// Runs explain -> diagnose -> synthesize for every record lacking assets
/// (exactly 3 calls per processed record). Failures are isolated per record;
/// the run aborts only when more than `failure_threshold` of the pending
/// records have failed.
TrainingRunStats run_training_phase(CorpusStore& corpus, const PipelineConfig& config,
                                    ChatProvider& provider, UsageLedger& ledger,
                                    const TemplateSet& templates = TemplateSet::builtin());

/// Maps top-k retrieval output onto corpus records with their assets.
std::vector<RetrievalHit> retrieve_hits(const CorpusStore& corpus, const Index& index,
                                        const PromptRecord& prompt, int k);

struct TestRunOutput {
    std::vector<OptimizationResult> results;  // in input order, failed items omitted
    std::vector<std::pair<std::size_t, std::string>> failures;  // (input ordinal, reason)
    UsageStats optimizer_usage;
    UsageStats responder_usage;
};

/// Retrieve -> analyze -> refine (split: 2 optimizer calls; combined: 1),
/// then one responder call per prompt. Prompts whose retrieval comes back
/// empty degrade to the direct strategy and are flagged retrieval_empty.
TestRunOutput run_test_phase(const std::vector<PromptRecord>& prompts, const CorpusStore& corpus,
                             const Index& index, const PipelineConfig& config,
                             ChatProvider& optimizer, ChatProvider& responder,
                             UsageLedger& ledger,
                             const TemplateSet& templates = TemplateSet::builtin());

/// Single-pass strategies (direct, cot, role) and rag: exactly 1 optimizer
/// call plus 1 responder call per prompt. rag payloads carry the exemplars'
/// prompts, responses and scores, never reasoning assets.
TestRunOutput run_baseline(Strategy strategy, const std::vector<PromptRecord>& prompts,
                           const CorpusStore& corpus, const Index* index,
                           const PipelineConfig& config, ChatProvider& optimizer,
                           ChatProvider& responder, UsageLedger& ledger,
                           const TemplateSet& templates = TemplateSet::builtin());

// ---------------------------------------------------------------------------
// Ablation

struct AblationCell {
    int k = 3;
    Variant variant = Variant::Split;
};

struct AblationRow {
    AblationCell cell;
    bool failed = false;
    std::string error;
    EvalReport report;            // judged with the supplied judge
    UsageStats optimizer_usage;
    UsageStats responder_usage;
    std::size_t items = 0;
};

std::vector<AblationRow> run_ablation_grid(const std::vector<PromptRecord>& prompts,
                                           const CorpusStore& corpus, const Index& index,
                                           const std::vector<AblationCell>& grid,
                                           const PipelineConfig& config,
                                           ChatProvider& optimizer, ChatProvider& responder,
                                           Judge& judge,
                                           const TemplateSet& templates = TemplateSet::builtin());

std::string render_ablation_table(const std::vector<AblationRow>& rows);

// ---------------------------------------------------------------------------
// Result files and run manifests

void save_results(const std::filesystem::path& path,
                  const std::vector<OptimizationResult>& results);
std::vector<OptimizationResult> load_results(const std::filesystem::path& path);

struct RunManifest {
    std::string command;
    std::vector<std::string> args;
    std::string config_digest;
    std::string corpus_checksum;
    std::map<std::string, std::string> providers;  // role -> provider id
    std::uint64_t seed = 0;
    std::string strategy;
    int k = 0;
    std::string variant;
    std::size_t items = 0;
    std::size_t failures = 0;
    std::int64_t started_at = 0;
    std::int64_t finished_at = 0;
    ojson ledger;  // UsageLedger::to_json()
};

/// Written atomically at run end; a missing manifest marks the run incomplete.
void save_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest load_manifest(const std::filesystem::path& path);

}  // namespace promptopt
