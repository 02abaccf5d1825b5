#include "promptopt/jsonio.hpp"

namespace promptopt {

namespace {

const ojson& require(const ojson& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw MissingField(key);
    return *it;
}

}  // namespace

ojson to_json(const PromptRecord& p) {
    ojson turns = ojson::array();
    for (const auto& t : p.turns) {
        turns.push_back(ojson{{"role", t.role}, {"text", t.text}});
    }
    return ojson{{"id", p.id}, {"text", p.text}, {"turns", std::move(turns)}};
}

PromptRecord prompt_from_json(const ojson& j) {
    PromptRecord p;
    p.id = require(j, "id").get<std::string>();
    p.text = require(j, "text").get<std::string>();
    for (const auto& t : require(j, "turns")) {
        p.turns.push_back(Turn{require(t, "role").get<std::string>(),
                               require(t, "text").get<std::string>()});
    }
    return p;
}

ojson to_json(const ScoreVector& s) {
    ojson j;
    auto values = s.as_array();
    for (size_t i = 0; i < kMetricCount; ++i) j[kMetricKeys[i]] = values[i];
    return j;
}

ScoreVector scores_from_json(const ojson& j) {
    std::array<double, kMetricCount> values{};
    for (size_t i = 0; i < kMetricCount; ++i) {
        values[i] = require(j, kMetricKeys[i]).get<double>();
    }
    return ScoreVector::from_array(values);
}

ojson to_json(const TrainingInstance& t) {
    return ojson{{"prompt", to_json(t.prompt)},
                 {"response", t.response},
                 {"scores", to_json(t.scores)}};
}

TrainingInstance instance_from_json(const ojson& j) {
    TrainingInstance t;
    t.prompt = prompt_from_json(require(j, "prompt"));
    t.response = require(j, "response").get<std::string>();
    t.scores = scores_from_json(require(j, "scores"));
    return t;
}

ojson to_json(const ReasoningAssets& a) {
    return ojson{{"card", a.card},
                 {"diagnosis", a.diagnosis},
                 {"directives", a.directives},
                 {"source_id", a.source_id}};
}

ReasoningAssets assets_from_json(const ojson& j) {
    ReasoningAssets a;
    a.card = require(j, "card").get<std::string>();
    a.diagnosis = require(j, "diagnosis").get<std::string>();
    a.directives = require(j, "directives").get<std::vector<std::string>>();
    a.source_id = require(j, "source_id").get<std::string>();
    return a;
}

ojson to_json(const RetrievalHit& h) {
    return ojson{{"instance", to_json(h.instance)},
                 {"assets", to_json(h.assets)},
                 {"score", h.score},
                 {"rank", h.rank}};
}

RetrievalHit hit_from_json(const ojson& j) {
    RetrievalHit h;
    h.instance = instance_from_json(require(j, "instance"));
    h.assets = assets_from_json(require(j, "assets"));
    h.score = require(j, "score").get<double>();
    h.rank = require(j, "rank").get<int>();
    return h;
}

ojson to_json(const UsageStats& u) {
    return ojson{{"input_tokens", u.input_tokens},
                 {"output_tokens", u.output_tokens},
                 {"calls", u.calls}};
}

UsageStats usage_from_json(const ojson& j) {
    UsageStats u;
    u.input_tokens = require(j, "input_tokens").get<std::int64_t>();
    u.output_tokens = require(j, "output_tokens").get<std::int64_t>();
    u.calls = require(j, "calls").get<std::int64_t>();
    return u;
}

ojson to_json(const OptimizationResult& r) {
    ojson j{{"original", to_json(r.original)},
            {"report", r.report},
            {"optimized_prompt", to_json(r.optimized_prompt)},
            {"optimized_response", r.optimized_response},
            {"usage", to_json(r.usage)},
            {"judged", r.judged ? to_json(*r.judged) : ojson(nullptr)},
            {"strategy", to_string(r.strategy)},
            {"k_used", r.k_used},
            {"retrieval_empty", r.retrieval_empty}};
    return j;
}

OptimizationResult result_from_json(const ojson& j) {
    OptimizationResult r;
    r.original = prompt_from_json(require(j, "original"));
    r.report = require(j, "report").get<std::string>();
    r.optimized_prompt = prompt_from_json(require(j, "optimized_prompt"));
    r.optimized_response = require(j, "optimized_response").get<std::string>();
    r.usage = usage_from_json(require(j, "usage"));
    const auto& judged = require(j, "judged");
    if (!judged.is_null()) r.judged = scores_from_json(judged);
    r.strategy = strategy_from_string(require(j, "strategy").get<std::string>());
    r.k_used = require(j, "k_used").get<int>();
    r.retrieval_empty = require(j, "retrieval_empty").get<bool>();
    return r;
}

std::string canonical_line(const ojson& j) { return j.dump(); }

}  // namespace promptopt
