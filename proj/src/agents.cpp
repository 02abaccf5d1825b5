#include "promptopt/agents.hpp"

#include <cctype>
#include <sstream>

namespace promptopt {

namespace {

ChatResponse call_agent(ChatProvider& provider, const std::string& agent_name,
                        const AgentTemplate& tpl, const Bindings& bindings, int max_tokens,
                        const std::string& model_id) {
    ChatRequest request;
    request.system = tpl.system_text;
    request.user = render(tpl.payload_text, bindings);
    request.temperature = 0.0;
    request.max_output_tokens = max_tokens;
    request.model_id = model_id;

    ChatResponse response;
    try {
        response = provider.complete(request);
    } catch (const EmptyCompletion&) {
        throw AgentOutputEmpty(agent_name);
    }
    if (is_blank(response.text)) throw AgentOutputEmpty(agent_name);
    return response;
}

// Does the line start a new enumerated item? Returns the offset past the
// marker, or npos.
size_t enumeration_marker_end(const std::string& line) {
    size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) return std::string::npos;

    if (std::isdigit(static_cast<unsigned char>(line[i]))) {
        size_t j = i;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        if (j < line.size() && (line[j] == '.' || line[j] == ')')) return j + 1;
        return std::string::npos;
    }
    if (line[i] == '-' || line[i] == '*') return i + 1;
    if (line.compare(i, 3, "\xe2\x80\xa2") == 0) return i + 3;  // •
    return std::string::npos;
}

}  // namespace

Bindings instance_bindings(const TrainingInstance& instance) {
    Bindings bindings;
    bindings["prompt"] = instance.prompt.text;
    bindings["response"] = instance.response;
    auto values = instance.scores.as_array();
    for (size_t i = 0; i < kMetricCount; ++i) {
        bindings[kMetricKeys[i]] = format_double(values[i]);
    }
    return bindings;
}

std::string serialize_hits(const std::vector<RetrievalHit>& hits) {
    std::ostringstream out;
    for (const auto& hit : hits) {
        if (hit.rank > 1) out << "\n";
        out << "Exemplar " << hit.rank << ":\n";
        out << "Prompt:\n" << hit.instance.prompt.text << "\n";
        out << "Response:\n" << hit.instance.response << "\n";
        out << "Reasoning card:\n" << hit.assets.card << "\n";
        out << "Diagnosis:\n" << hit.assets.diagnosis << "\n";
        out << "Edit directives:\n";
        for (size_t i = 0; i < hit.assets.directives.size(); ++i) {
            out << (i + 1) << ". " << hit.assets.directives[i] << "\n";
        }
    }
    return out.str();
}

std::string serialize_rag_examples(const std::vector<RetrievalHit>& hits) {
    std::ostringstream out;
    for (const auto& hit : hits) {
        if (hit.rank > 1) out << "\n";
        out << "Example " << hit.rank << ":\n";
        out << "Prompt:\n" << hit.instance.prompt.text << "\n";
        out << "Response:\n" << hit.instance.response << "\n";
        out << "Scores (0-4): ";
        auto values = hit.instance.scores.as_array();
        for (size_t i = 0; i < kMetricCount; ++i) {
            if (i > 0) out << ", ";
            out << kMetricNames[i] << ": " << format_double(values[i]);
        }
        out << "\n";
    }
    return out.str();
}

std::vector<std::string> parse_directives(const std::string& completion) {
    if (is_blank(completion)) throw AgentOutputEmpty("synthesizer");

    std::vector<std::string> items;
    std::string current;
    bool saw_marker = false;
    auto flush = [&] {
        std::string t = trim_copy(current);
        if (!t.empty()) items.push_back(std::move(t));
        current.clear();
    };

    for (const auto& line : split_lines(completion)) {
        size_t after = enumeration_marker_end(line);
        if (after != std::string::npos) {
            if (saw_marker) flush();
            saw_marker = true;
            current = line.substr(after);
        } else if (saw_marker) {
            current += " " + trim_copy(line);
        }
        // Lines before the first marker are preamble, not directives.
    }
    if (saw_marker) {
        flush();
        if (items.empty()) throw UnparseableDirectives(completion);
        return items;
    }
    return {trim_copy(completion)};
}

std::string strip_refiner_label(const std::string& completion) {
    std::string text = trim_copy(completion);
    const std::string label = "final optimized prompt:";
    if (ascii_lower(text.substr(0, label.size())) == label) {
        text = trim_copy(text.substr(label.size()));
    }
    return text;
}

std::pair<std::string, std::string> parse_combined_output(const std::string& completion) {
    const std::string analysis_marker = "=== ANALYSIS ===";
    const std::string prompt_marker = "=== OPTIMIZED_PROMPT ===";

    size_t a = completion.find(analysis_marker);
    size_t p = completion.find(prompt_marker);
    if (a == std::string::npos || p == std::string::npos || p < a) {
        throw UnparseableCombinedOutput(completion);
    }
    std::string report =
        trim_copy(completion.substr(a + analysis_marker.size(), p - a - analysis_marker.size()));
    std::string optimized = trim_copy(completion.substr(p + prompt_marker.size()));
    if (report.empty() || optimized.empty()) throw UnparseableCombinedOutput(completion);
    return {report, optimized};
}

TextResult explain_metrics(const TrainingInstance& instance, ChatProvider& provider,
                           const TemplateSet& templates, const AgentOptions& options) {
    auto response = call_agent(provider, "explainer", templates.agent(AgentRole::Explainer),
                               instance_bindings(instance), options.max_tokens_analysis,
                               options.model_id);
    return {response.text, response.usage};
}

TextResult diagnose(const TrainingInstance& instance, const std::string& card,
                    ChatProvider& provider, const TemplateSet& templates,
                    const AgentOptions& options) {
    if (is_blank(card)) throw AgentInputEmpty("card");
    Bindings bindings = instance_bindings(instance);
    bindings["card"] = card;
    auto response = call_agent(provider, "diagnostician",
                               templates.agent(AgentRole::Diagnostician), bindings,
                               options.max_tokens_analysis, options.model_id);
    return {response.text, response.usage};
}

DirectivesResult synthesize_actions(const TrainingInstance& instance, const std::string& card,
                                    const std::string& diagnosis, ChatProvider& provider,
                                    const TemplateSet& templates, const AgentOptions& options) {
    if (is_blank(card)) throw AgentInputEmpty("card");
    if (is_blank(diagnosis)) throw AgentInputEmpty("diagnosis");
    Bindings bindings = instance_bindings(instance);
    bindings["card"] = card;
    bindings["diagnosis"] = diagnosis;
    auto response = call_agent(provider, "synthesizer", templates.agent(AgentRole::Synthesizer),
                               bindings, options.max_tokens_analysis, options.model_id);
    return {parse_directives(response.text), response.usage};
}

TextResult analyze(const PromptRecord& test_prompt, const std::vector<RetrievalHit>& hits,
                   ChatProvider& provider, const TemplateSet& templates,
                   const AgentOptions& options) {
    if (hits.empty()) throw EmptyRetrieval();
    validate_hits(hits);
    Bindings bindings{{"prompt", test_prompt.text}, {"exemplars", serialize_hits(hits)}};
    auto response = call_agent(provider, "analyzer", templates.agent(AgentRole::Analyzer),
                               bindings, options.max_tokens_analysis, options.model_id);
    return {response.text, response.usage};
}

RefineResult refine(const PromptRecord& test_prompt, const std::string& report,
                    ChatProvider& provider, const TemplateSet& templates,
                    const AgentOptions& options) {
    if (is_blank(report)) throw AgentInputEmpty("report");
    Bindings bindings{{"prompt", test_prompt.text}, {"report", report}};
    auto response = call_agent(provider, "refiner", templates.agent(AgentRole::Refiner),
                               bindings, options.max_tokens_generation, options.model_id);
    std::string text = strip_refiner_label(response.text);
    if (text.empty()) throw AgentOutputEmpty("refiner");
    return {PromptRecord::single(test_prompt.id + "/optimized", std::move(text)),
            response.usage};
}

CombinedResult analyze_and_refine_combined(const PromptRecord& test_prompt,
                                           const std::vector<RetrievalHit>& hits,
                                           ChatProvider& provider, const TemplateSet& templates,
                                           const AgentOptions& options) {
    if (hits.empty()) throw EmptyRetrieval();
    validate_hits(hits);
    Bindings bindings{{"prompt", test_prompt.text}, {"exemplars", serialize_hits(hits)}};
    auto response = call_agent(provider, "combined", templates.agent(AgentRole::Combined),
                               bindings, options.max_tokens_generation, options.model_id);
    auto [report, optimized_text] = parse_combined_output(response.text);
    return {report, PromptRecord::single(test_prompt.id + "/optimized", optimized_text),
            response.usage};
}

}  // namespace promptopt
