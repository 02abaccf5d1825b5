#include "promptopt/core.hpp"

#include <sstream>

namespace promptopt {

std::string flatten_turns(const std::vector<Turn>& turns) {
    if (turns.size() == 1) return turns.front().text;
    std::ostringstream out;
    for (size_t i = 0; i < turns.size(); ++i) {
        if (i > 0) out << "\n\n";
        out << turns[i].role << ": " << turns[i].text;
    }
    return out.str();
}

PromptRecord PromptRecord::single(std::string id, std::string text) {
    PromptRecord p;
    p.id = std::move(id);
    p.turns = {Turn{"user", text}};
    p.text = std::move(text);
    return p;
}

PromptRecord PromptRecord::multi(std::string id, std::vector<Turn> turns) {
    PromptRecord p;
    p.id = std::move(id);
    p.text = flatten_turns(turns);
    p.turns = std::move(turns);
    return p;
}

void validate_prompt(const PromptRecord& prompt) {
    if (prompt.turns.empty()) throw InvalidRecord("prompt " + prompt.id + " has no turns");
    if (is_blank(prompt.text)) throw EmptyText("prompt");
    if (prompt.text != flatten_turns(prompt.turns)) {
        throw InvalidRecord("prompt " + prompt.id + " text does not match flattened turns");
    }
}

void validate_scores(const ScoreVector& scores) {
    auto values = scores.as_array();
    for (size_t i = 0; i < kMetricCount; ++i) {
        if (!(values[i] >= 0.0 && values[i] <= 4.0)) {
            throw ScoreOutOfRange(kMetricNames[i], values[i]);
        }
    }
}

void validate_assets(const ReasoningAssets& assets) {
    if (is_blank(assets.card)) throw EmptyText("card");
    if (is_blank(assets.diagnosis)) throw EmptyText("diagnosis");
    if (assets.directives.empty()) throw InvalidRecord("assets need at least one directive");
    for (const auto& d : assets.directives) {
        if (is_blank(d)) throw EmptyText("directive");
    }
    if (assets.source_id.empty()) throw MissingField("source_id");
}

void validate_hits(const std::vector<RetrievalHit>& hits) {
    for (size_t i = 0; i < hits.size(); ++i) {
        if (hits[i].rank != static_cast<int>(i) + 1) {
            throw InvalidRecord("hit ranks must be contiguous from 1");
        }
        if (hits[i].score < 0) throw InvalidRecord("negative retrieval score");
        if (i > 0 && hits[i].score > hits[i - 1].score) {
            throw InvalidRecord("retrieval scores must be non-increasing");
        }
    }
}

void validate_usage(const UsageStats& usage) {
    if (usage.input_tokens < 0 || usage.output_tokens < 0 || usage.calls < 0) {
        throw InvalidRecord("negative usage counter");
    }
    if (usage.calls == 0 && (usage.input_tokens != 0 || usage.output_tokens != 0)) {
        throw InvalidRecord("usage with zero calls must have zero tokens");
    }
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::MaSapo: return "ma-sapo";
        case Strategy::MaSapoCombined: return "ma-sapo-combined";
        case Strategy::Direct: return "direct";
        case Strategy::Cot: return "cot";
        case Strategy::Role: return "role";
        case Strategy::Rag: return "rag";
    }
    return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "ma-sapo") return Strategy::MaSapo;
    if (name == "ma-sapo-combined") return Strategy::MaSapoCombined;
    if (name == "direct") return Strategy::Direct;
    if (name == "cot") return Strategy::Cot;
    if (name == "role") return Strategy::Role;
    if (name == "rag") return Strategy::Rag;
    throw InvalidRecord("unknown strategy: " + name);
}

bool is_single_pass(Strategy s) {
    return s == Strategy::Direct || s == Strategy::Cot || s == Strategy::Role;
}

void validate_result(const OptimizationResult& result) {
    validate_prompt(result.original);
    validate_prompt(result.optimized_prompt);
    validate_usage(result.usage);
    if (result.judged) validate_scores(*result.judged);
    if (result.k_used < 0) throw InvalidRecord("k_used must be non-negative");
    if (result.strategy == Strategy::MaSapo || result.strategy == Strategy::MaSapoCombined) {
        if (is_blank(result.report)) throw InvalidRecord("retrieval strategies require a report");
        if (result.k_used < 1) throw InvalidRecord("retrieval strategies require k_used >= 1");
    }
    if (is_single_pass(result.strategy) && result.k_used != 0) {
        throw InvalidRecord("single-pass strategies must have k_used = 0");
    }
}

TrainingInstance validate_training_instance(const RawInstance& raw,
                                            const std::string& fallback_id) {
    if (!raw.prompt_text && !raw.turns) throw MissingField("prompt");
    if (!raw.response) throw MissingField("response");
    for (size_t i = 0; i < kMetricCount; ++i) {
        if (!raw.scores[i]) throw MissingField(kMetricNames[i]);
    }

    TrainingInstance instance;
    std::string id = raw.id.value_or(fallback_id);
    if (raw.turns && raw.turns->size() > 1) {
        instance.prompt = PromptRecord::multi(id, *raw.turns);
    } else if (raw.turns && raw.turns->size() == 1) {
        instance.prompt = PromptRecord::single(id, raw.turns->front().text);
        instance.prompt.turns.front().role = raw.turns->front().role;
    } else {
        instance.prompt = PromptRecord::single(id, *raw.prompt_text);
    }
    instance.response = *raw.response;

    std::array<double, kMetricCount> values{};
    for (size_t i = 0; i < kMetricCount; ++i) values[i] = *raw.scores[i];
    instance.scores = ScoreVector::from_array(values);

    validate_scores(instance.scores);
    if (is_blank(instance.prompt.text)) throw EmptyText("prompt");
    validate_prompt(instance.prompt);
    if (is_blank(instance.response)) throw EmptyText("response");
    return instance;
}

}  // namespace promptopt
