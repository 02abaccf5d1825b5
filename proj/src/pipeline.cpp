#include "promptopt/pipeline.hpp"

#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

namespace promptopt {

namespace {

int attempts_of(const std::exception& e) {
    if (auto* transport = dynamic_cast<const TransportError*>(&e)) return transport->attempts;
    if (auto* provider = dynamic_cast<const ProviderError*>(&e)) return provider->attempts;
    return 1;
}

/// Runs fn(i) for i in [0, n) on up to `parallelism` threads. fn must handle
/// its own exceptions.
void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn) {
    int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

std::string extract_after_last_label(const std::string& text, const std::string& label) {
    std::string lowered = ascii_lower(text);
    size_t pos = lowered.rfind(label);
    if (pos == std::string::npos) return trim_copy(text);
    std::string after = trim_copy(text.substr(pos + label.size()));
    return after.empty() ? trim_copy(text) : after;
}

ChatResponse respond(ChatProvider& responder, const PromptRecord& optimized,
                     const PipelineConfig& config) {
    ChatRequest request;
    request.system = "";
    request.user = optimized.text;
    request.temperature = 0.0;
    request.max_output_tokens = config.max_tokens_generation;
    request.model_id = config.model_id;
    ChatResponse response = responder.complete(request);
    if (is_blank(response.text)) throw AgentOutputEmpty("responder");
    return response;
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::Split ? "split" : "combined"; }

Variant variant_from_string(const std::string& name) {
    if (name == "split") return Variant::Split;
    if (name == "combined") return Variant::Combined;
    throw InvalidRecord("unknown variant: " + name);
}

void validate_config(const PipelineConfig& config) {
    bool needs_retrieval = config.strategy == Strategy::MaSapo ||
                           config.strategy == Strategy::MaSapoCombined ||
                           config.strategy == Strategy::Rag;
    if (needs_retrieval && config.k < 1) {
        throw ConfigError("k must be >= 1 for strategy " + to_string(config.strategy));
    }
    if (config.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (config.failure_threshold < 0 || config.failure_threshold > 1) {
        throw ConfigError("failure threshold must lie in [0, 1]");
    }
}

std::string config_digest(const PipelineConfig& config) {
    ojson j{{"k", config.k},
            {"variant", to_string(config.variant)},
            {"strategy", to_string(config.strategy)},
            {"asset_provider", config.asset_provider},
            {"optimizer_provider", config.optimizer_provider},
            {"responder_provider", config.responder_provider},
            {"parallelism", config.parallelism},
            {"seed", config.seed},
            {"max_tokens_analysis", config.max_tokens_analysis},
            {"max_tokens_generation", config.max_tokens_generation},
            {"failure_threshold", config.failure_threshold},
            {"model_id", config.model_id}};
    return to_hex16(fnv1a64(j.dump()));
}

// ---------------------------------------------------------------------------
// Training phase

TrainingRunStats run_training_phase(CorpusStore& corpus, const PipelineConfig& config,
                                    ChatProvider& provider, UsageLedger& ledger,
                                    const TemplateSet& templates) {
    validate_config(config);

    std::vector<std::string> pending;
    for (const auto& record : corpus.records()) {
        if (!record.assets) pending.push_back(record.id());
    }
    TrainingRunStats stats;
    stats.skipped = corpus.size() - pending.size();
    if (pending.empty()) return stats;

    AgentOptions options = config.agent_options();
    std::mutex corpus_mutex;  // single-writer append, isolated from scoring work
    std::atomic<std::size_t> failed{0};
    std::atomic<bool> aborted{false};
    std::mutex stats_mutex;
    std::size_t max_failures =
        static_cast<std::size_t>(config.failure_threshold * static_cast<double>(pending.size()));

    parallel_for(pending.size(), config.parallelism, [&](std::size_t i) {
        if (aborted.load()) return;
        const CorpusRecord* record = corpus.find(pending[i]);
        UsageStats item_usage;
        try {
            TrainingInstance instance = record->instance;
            auto card = explain_metrics(instance, provider, templates, options);
            item_usage += card.usage;
            ledger.record(CallCategory::Training, card.usage);

            auto diagnosis = diagnose(instance, card.text, provider, templates, options);
            item_usage += diagnosis.usage;
            ledger.record(CallCategory::Training, diagnosis.usage);

            auto directives =
                synthesize_actions(instance, card.text, diagnosis.text, provider, templates,
                                   options);
            item_usage += directives.usage;
            ledger.record(CallCategory::Training, directives.usage);

            ReasoningAssets assets{card.text, diagnosis.text, directives.directives,
                                   instance.id()};
            {
                std::lock_guard lock(corpus_mutex);
                corpus.append_assets(instance.id(), std::move(assets), false, provider.id());
            }
            std::lock_guard lock(stats_mutex);
            ++stats.processed;
            stats.usage += item_usage;
        } catch (const std::exception& e) {
            ledger.record_failure(CallCategory::Training, attempts_of(e));
            std::size_t so_far = failed.fetch_add(1) + 1;
            {
                std::lock_guard lock(stats_mutex);
                ++stats.failed;
            }
            if (so_far > max_failures) aborted.store(true);
        }
    });

    if (aborted.load()) throw AbortedTooManyFailures(stats.failed, pending.size());
    return stats;
}

// ---------------------------------------------------------------------------
// Test phase

std::vector<RetrievalHit> retrieve_hits(const CorpusStore& corpus, const Index& index,
                                        const PromptRecord& prompt, int k) {
    auto scored = index.top_k(prompt.text, static_cast<std::size_t>(k));
    std::vector<RetrievalHit> hits;
    hits.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        const CorpusRecord* record = corpus.find(scored[i].id);
        if (!record) throw UnknownId(scored[i].id);
        RetrievalHit hit;
        hit.instance = record->instance;
        if (record->assets) hit.assets = *record->assets;
        hit.score = scored[i].score;
        hit.rank = static_cast<int>(i) + 1;
        hits.push_back(std::move(hit));
    }
    return hits;
}

namespace {

struct ItemOutcome {
    bool ok = false;
    OptimizationResult result;
    std::string error;
};

using UsageSink = std::function<void(const UsageStats&)>;

OptimizationResult run_direct_fallback(const PromptRecord& prompt, const PipelineConfig& config,
                                       ChatProvider& optimizer, ChatProvider& responder,
                                       const UsageSink& add_optimizer,
                                       const UsageSink& add_responder,
                                       const TemplateSet& templates) {
    const BaselineTemplate& tpl = templates.baseline(Strategy::Direct);
    ChatRequest request;
    request.system = tpl.system_text;
    request.user = render(tpl.payload_text, Bindings{{"prompt", prompt.text}});
    request.temperature = 0.0;
    request.max_output_tokens = config.max_tokens_generation;
    request.model_id = config.model_id;

    ChatResponse completion = optimizer.complete(request);
    add_optimizer(completion.usage);
    std::string optimized_text = strip_refiner_label(completion.text);
    if (optimized_text.empty()) throw AgentOutputEmpty("direct");

    OptimizationResult result;
    result.original = prompt;
    result.optimized_prompt = PromptRecord::single(prompt.id + "/optimized", optimized_text);
    result.strategy = Strategy::Direct;
    result.k_used = 0;
    result.retrieval_empty = true;
    result.usage += completion.usage;

    ChatResponse response = respond(responder, result.optimized_prompt, config);
    add_responder(response.usage);
    result.optimized_response = response.text;
    result.usage += response.usage;
    return result;
}

}  // namespace

TestRunOutput run_test_phase(const std::vector<PromptRecord>& prompts, const CorpusStore& corpus,
                             const Index& index, const PipelineConfig& config,
                             ChatProvider& optimizer, ChatProvider& responder,
                             UsageLedger& ledger, const TemplateSet& templates) {
    validate_config(config);
    AgentOptions options = config.agent_options();

    std::mutex usage_mutex;
    UsageStats run_optimizer_usage;
    UsageStats run_responder_usage;
    auto add_optimizer = [&](const UsageStats& u) {
        ledger.record(CallCategory::Optimizer, u);
        std::lock_guard lock(usage_mutex);
        run_optimizer_usage += u;
    };
    auto add_responder = [&](const UsageStats& u) {
        ledger.record(CallCategory::Responder, u);
        std::lock_guard lock(usage_mutex);
        run_responder_usage += u;
    };

    std::vector<ItemOutcome> outcomes(prompts.size());
    parallel_for(prompts.size(), config.parallelism, [&](std::size_t i) {
        ItemOutcome& outcome = outcomes[i];
        const PromptRecord& prompt = prompts[i];
        try {
            auto hits = retrieve_hits(corpus, index, prompt, config.k);
            if (hits.empty()) {
                outcome.result = run_direct_fallback(prompt, config, optimizer, responder,
                                                     add_optimizer, add_responder, templates);
                outcome.ok = true;
                return;
            }
            for (const auto& hit : hits) {
                if (hit.assets.card.empty()) {
                    throw InvalidRecord("retrieved record " + hit.instance.id() +
                                        " has no reasoning assets");
                }
            }

            OptimizationResult result;
            result.original = prompt;
            result.k_used = static_cast<int>(hits.size());

            if (config.variant == Variant::Split) {
                auto report = analyze(prompt, hits, optimizer, templates, options);
                add_optimizer(report.usage);
                result.usage += report.usage;
                auto refined = refine(prompt, report.text, optimizer, templates, options);
                add_optimizer(refined.usage);
                result.usage += refined.usage;
                result.report = report.text;
                result.optimized_prompt = refined.optimized;
                result.strategy = Strategy::MaSapo;
            } else {
                auto combined =
                    analyze_and_refine_combined(prompt, hits, optimizer, templates, options);
                add_optimizer(combined.usage);
                result.usage += combined.usage;
                result.report = combined.report;
                result.optimized_prompt = combined.optimized;
                result.strategy = Strategy::MaSapoCombined;
            }

            ChatResponse response = respond(responder, result.optimized_prompt, config);
            add_responder(response.usage);
            result.optimized_response = response.text;
            result.usage += response.usage;

            validate_result(result);
            outcome.result = std::move(result);
            outcome.ok = true;
        } catch (const std::exception& e) {
            ledger.record_failure(CallCategory::Optimizer, attempts_of(e));
            outcome.error = e.what();
        }
    });

    TestRunOutput output;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].ok) {
            output.results.push_back(std::move(outcomes[i].result));
        } else {
            output.failures.emplace_back(i, outcomes[i].error);
        }
    }
    output.optimizer_usage = run_optimizer_usage;
    output.responder_usage = run_responder_usage;
    return output;
}

TestRunOutput run_baseline(Strategy strategy, const std::vector<PromptRecord>& prompts,
                           const CorpusStore& corpus, const Index* index,
                           const PipelineConfig& config, ChatProvider& optimizer,
                           ChatProvider& responder, UsageLedger& ledger,
                           const TemplateSet& templates) {
    if (strategy == Strategy::MaSapo || strategy == Strategy::MaSapoCombined) {
        throw ConfigError("run_baseline only accepts single-pass and rag strategies");
    }
    if (strategy == Strategy::Rag && index == nullptr) {
        throw ConfigError("rag baseline requires an index");
    }
    PipelineConfig effective = config;
    effective.strategy = strategy;
    validate_config(effective);

    std::mutex usage_mutex;
    UsageStats run_optimizer_usage;
    UsageStats run_responder_usage;
    auto add_optimizer = [&](const UsageStats& u) {
        ledger.record(CallCategory::Optimizer, u);
        std::lock_guard lock(usage_mutex);
        run_optimizer_usage += u;
    };
    auto add_responder = [&](const UsageStats& u) {
        ledger.record(CallCategory::Responder, u);
        std::lock_guard lock(usage_mutex);
        run_responder_usage += u;
    };

    std::vector<ItemOutcome> outcomes(prompts.size());
    parallel_for(prompts.size(), config.parallelism, [&](std::size_t i) {
        ItemOutcome& outcome = outcomes[i];
        const PromptRecord& prompt = prompts[i];
        try {
            std::vector<RetrievalHit> hits;
            if (strategy == Strategy::Rag) {
                hits = retrieve_hits(corpus, *index, prompt, effective.k);
                if (hits.empty()) {
                    outcome.result = run_direct_fallback(prompt, effective, optimizer, responder,
                                                         add_optimizer, add_responder, templates);
                    outcome.ok = true;
                    return;
                }
            }

            const BaselineTemplate& tpl = templates.baseline(strategy);
            Bindings bindings{{"prompt", prompt.text}};
            if (strategy == Strategy::Rag) {
                bindings["exemplars"] = serialize_rag_examples(hits);
            }

            ChatRequest request;
            request.system = tpl.system_text;
            request.user = render(tpl.payload_text, bindings);
            request.temperature = 0.0;
            request.max_output_tokens = config.max_tokens_generation;
            request.model_id = config.model_id;

            ChatResponse completion = optimizer.complete(request);
            add_optimizer(completion.usage);

            std::string optimized_text =
                strategy == Strategy::Cot
                    ? extract_after_last_label(completion.text, "final optimized prompt:")
                    : strip_refiner_label(completion.text);
            if (optimized_text.empty()) throw AgentOutputEmpty(to_string(strategy));

            OptimizationResult result;
            result.original = prompt;
            result.optimized_prompt =
                PromptRecord::single(prompt.id + "/optimized", optimized_text);
            result.strategy = strategy;
            result.k_used = strategy == Strategy::Rag ? static_cast<int>(hits.size()) : 0;
            result.usage += completion.usage;

            ChatResponse response = respond(responder, result.optimized_prompt, config);
            add_responder(response.usage);
            result.optimized_response = response.text;
            result.usage += response.usage;

            validate_result(result);
            outcome.result = std::move(result);
            outcome.ok = true;
        } catch (const std::exception& e) {
            ledger.record_failure(CallCategory::Optimizer, attempts_of(e));
            outcome.error = e.what();
        }
    });

    TestRunOutput output;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].ok) {
            output.results.push_back(std::move(outcomes[i].result));
        } else {
            output.failures.emplace_back(i, outcomes[i].error);
        }
    }
    output.optimizer_usage = run_optimizer_usage;
    output.responder_usage = run_responder_usage;
    return output;
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<AblationRow> run_ablation_grid(const std::vector<PromptRecord>& prompts,
                                           const CorpusStore& corpus, const Index& index,
                                           const std::vector<AblationCell>& grid,
                                           const PipelineConfig& config,
                                           ChatProvider& optimizer, ChatProvider& responder,
                                           Judge& judge, const TemplateSet& templates) {
    if (grid.empty()) throw EmptyGrid();

    std::vector<AblationRow> rows;
    rows.reserve(grid.size());
    for (const AblationCell& cell : grid) {
        AblationRow row;
        row.cell = cell;
        try {
            PipelineConfig cell_config = config;
            cell_config.k = cell.k;
            cell_config.variant = cell.variant;
            cell_config.strategy = cell.variant == Variant::Split ? Strategy::MaSapo
                                                                  : Strategy::MaSapoCombined;

            UsageLedger cell_ledger;
            auto output = run_test_phase(prompts, corpus, index, cell_config, optimizer,
                                         responder, cell_ledger, templates);
            if (output.results.empty()) throw EmptyResults();

            UsageStats judge_usage;
            std::vector<OptimizationResult> judged = output.results;
            for (auto& result : judged) {
                auto j = judge.judge(result.optimized_prompt, result.optimized_response);
                result.judged = j.verdict.scores;
                judge_usage += j.usage;
            }
            row.report = aggregate(judged);
            row.report.usage = judge_usage;
            row.optimizer_usage = cell_ledger.totals(CallCategory::Optimizer);
            row.responder_usage = cell_ledger.totals(CallCategory::Responder);
            row.items = judged.size();
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string render_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    auto pad = [](const std::string& s, size_t width) {
        return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
    };
    out << pad("Cell", 16);
    for (const char* name : {"Help", "Corr", "Coh", "Comp", "Verb", "Avg"}) out << pad(name, 8);
    out << pad("Calls", 8) << pad("InTok", 8) << pad("OutTok", 8) << "N\n";
    for (const auto& row : rows) {
        std::string label = "k=" + std::to_string(row.cell.k) + "/" + to_string(row.cell.variant);
        if (row.failed) {
            out << pad(label, 16) << "FAILED: " << row.error << "\n";
            continue;
        }
        out << pad(label, 16);
        for (size_t i = 0; i < kMetricCount; ++i) {
            out << pad(format_fixed(row.report.metric_means[i], 4), 8);
        }
        out << pad(format_fixed(row.report.composite_mean, 4), 8);
        out << pad(std::to_string(row.optimizer_usage.calls), 8);
        out << pad(std::to_string(row.optimizer_usage.input_tokens), 8);
        out << pad(std::to_string(row.optimizer_usage.output_tokens), 8);
        out << row.items << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Result files and manifests

namespace {
constexpr const char* kResultsTag = "#results";
}

void save_results(const std::filesystem::path& path,
                  const std::vector<OptimizationResult>& results) {
    std::uint64_t state = kFnvOffset;
    std::ostringstream out;
    for (const auto& result : results) {
        std::string line = canonical_line(to_json(result));
        state = fnv1a64(line, state);
        state = fnv1a64("\n", state);
        out << line << "\n";
    }
    std::ostringstream prefix;
    prefix << kResultsTag << " v=1 n=" << results.size() << " ";
    state = fnv1a64(prefix.str(), state);
    out << prefix.str() << "checksum=" << to_hex16(state) << "\n";
    write_file_atomic(path, out.str());
}

std::vector<OptimizationResult> load_results(const std::filesystem::path& path) {
    std::string content = read_file(path);
    auto lines = split_lines(content);
    if (lines.empty() || !starts_with(lines.back(), std::string(kResultsTag) + " ")) {
        throw ChecksumMismatch("results manifest line missing");
    }
    std::istringstream manifest(lines.back());
    std::string tag, version, n_field, checksum_field;
    manifest >> tag >> version >> n_field >> checksum_field;
    if (!starts_with(checksum_field, "checksum=")) {
        throw ChecksumMismatch("results manifest malformed");
    }

    std::uint64_t state = kFnvOffset;
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
        state = fnv1a64(lines[i], state);
        state = fnv1a64("\n", state);
    }
    state = fnv1a64(lines.back().substr(0, lines.back().find("checksum=")), state);
    if (to_hex16(state) != checksum_field.substr(9)) {
        throw ChecksumMismatch("results content checksum");
    }
    if (version != "v=1") throw SchemaVersionUnsupported(version);

    std::vector<OptimizationResult> results;
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
        try {
            results.push_back(result_from_json(ojson::parse(lines[i])));
        } catch (const std::exception& e) {
            throw FormatError(i + 1, e.what());
        }
    }
    if (std::to_string(results.size()) != n_field.substr(2)) {
        throw ChecksumMismatch("result count disagrees with manifest");
    }
    return results;
}

void save_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    ojson providers;
    for (const auto& [role, id] : manifest.providers) providers[role] = id;
    ojson j{{"command", manifest.command},
            {"args", manifest.args},
            {"config_digest", manifest.config_digest},
            {"corpus_checksum", manifest.corpus_checksum},
            {"providers", std::move(providers)},
            {"seed", manifest.seed},
            {"strategy", manifest.strategy},
            {"k", manifest.k},
            {"variant", manifest.variant},
            {"items", manifest.items},
            {"failures", manifest.failures},
            {"started_at", iso8601_utc(manifest.started_at)},
            {"finished_at", iso8601_utc(manifest.finished_at)},
            {"ledger", manifest.ledger}};
    write_file_atomic(path, j.dump(2) + "\n");
}

RunManifest load_manifest(const std::filesystem::path& path) {
    ojson j;
    try {
        j = ojson::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(0, std::string("manifest: ") + e.what());
    }
    RunManifest m;
    m.command = j.value("command", "");
    if (j.contains("args")) m.args = j["args"].get<std::vector<std::string>>();
    m.config_digest = j.value("config_digest", "");
    m.corpus_checksum = j.value("corpus_checksum", "");
    if (j.contains("providers")) {
        for (const auto& item : j["providers"].items()) {
            m.providers[item.key()] = item.value().get<std::string>();
        }
    }
    m.seed = j.value("seed", std::uint64_t{0});
    m.strategy = j.value("strategy", "");
    m.k = j.value("k", 0);
    m.variant = j.value("variant", "");
    m.items = j.value("items", std::size_t{0});
    m.failures = j.value("failures", std::size_t{0});
    if (j.contains("started_at")) m.started_at = parse_iso8601_utc(j["started_at"]);
    if (j.contains("finished_at")) m.finished_at = parse_iso8601_utc(j["finished_at"]);
    if (j.contains("ledger")) m.ledger = j["ledger"];
    return m;
}

}  // namespace promptopt
