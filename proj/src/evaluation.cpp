#include "promptopt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "promptopt/gateway.hpp"
#include "promptopt/retrieval.hpp"

namespace promptopt {

double normalize_score(double raw) {
    if (!(raw >= 0.0 && raw <= 4.0)) throw ScoreOutOfRange("score", raw);
    return raw / 4.0;
}

double composite_score(const ScoreVector& scores) {
    validate_scores(scores);
    auto values = scores.as_array();
    double sum = 0;
    for (double v : values) sum += v / 4.0;
    return sum / static_cast<double>(kMetricCount);
}

// ---------------------------------------------------------------------------
// Judges

JudgedOutput RuleBasedJudge::judge(const PromptRecord& prompt, const std::string& response) {
    auto prompt_tokens = tokenize(prompt.text);
    auto response_tokens = tokenize(response);

    std::unordered_set<std::string> prompt_vocab(prompt_tokens.begin(), prompt_tokens.end());
    std::unordered_set<std::string> response_vocab(response_tokens.begin(),
                                                   response_tokens.end());
    std::size_t shared = 0;
    for (const auto& t : prompt_vocab) {
        if (response_vocab.count(t)) ++shared;
    }
    double overlap = prompt_vocab.empty()
                         ? 0.0
                         : static_cast<double>(shared) / static_cast<double>(prompt_vocab.size());

    std::int64_t words = estimate_tokens(response);

    JudgeVerdict verdict;
    verdict.judge_id = id();
    verdict.scores.help = 4.0 * overlap;
    verdict.scores.corr = 4.0 * overlap * overlap;
    verdict.scores.coh = 4.0;
    verdict.scores.comp = 4.0 * overlap * (2.0 - overlap);
    verdict.scores.verb = std::min(4.0, static_cast<double>(words) / 50.0);
    validate_scores(verdict.scores);
    return {verdict, UsageStats{}};
}

HttpJudge::HttpJudge(HttpJudgeConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("live judge needs a base URL");
}

JudgedOutput HttpJudge::judge(const PromptRecord& prompt, const std::string& response) {
    auto scheme_end = config_.base_url.find("://");
    size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = config_.base_url.find('/', host_start);
    std::string host = path_start == std::string::npos ? config_.base_url
                                                       : config_.base_url.substr(0, path_start);
    std::string base_path =
        path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!base_path.empty() && base_path.back() == '/') base_path.pop_back();

    nlohmann::json body = {{"prompt", prompt.text}, {"response", response}};
    httplib::Client client(host);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto result = client.Post(base_path + "/score", headers, body.dump(), "application/json");
    if (!result) throw TransportError(httplib::to_string(result.error()));
    if (result->status < 200 || result->status >= 300) {
        throw ProviderError(result->status, result->body.substr(0, 512));
    }

    nlohmann::json payload;
    try {
        payload = nlohmann::json::parse(result->body);
    } catch (const std::exception& e) {
        throw JudgeOutputUnparseable(e.what());
    }

    std::array<double, kMetricCount> values{};
    for (size_t i = 0; i < kMetricCount; ++i) {
        if (!payload.contains(kMetricNames[i]) || !payload[kMetricNames[i]].is_number()) {
            throw JudgeOutputUnparseable(std::string("missing metric ") + kMetricNames[i]);
        }
        values[i] = payload[kMetricNames[i]].get<double>();
        if (config_.scale_by_four) values[i] *= 4.0;
    }

    JudgeVerdict verdict;
    verdict.judge_id = id();
    verdict.scores = ScoreVector::from_array(values);
    validate_scores(verdict.scores);

    UsageStats usage;
    usage.calls = 1;
    usage.input_tokens = estimate_tokens(prompt.text) + estimate_tokens(response);
    usage.output_tokens = 0;
    return {verdict, usage};
}

std::unique_ptr<Judge> make_judge(const std::string& judge_id, const HttpJudgeConfig& config) {
    if (judge_id == "mock") return std::make_unique<RuleBasedJudge>();
    if (judge_id == "live") return std::make_unique<HttpJudge>(config);
    throw ConfigError("unknown judge id: " + judge_id);
}

// ---------------------------------------------------------------------------
// Aggregation

EvalReport aggregate(const std::vector<OptimizationResult>& results) {
    if (results.empty()) throw EmptyResults();

    EvalReport report;
    report.n = results.size();
    double composite_sum = 0;
    std::array<double, kMetricCount> metric_sums{};

    for (const auto& result : results) {
        if (!result.judged) throw InvalidRecord("result lacks judged scores");
        validate_scores(*result.judged);
        composite_sum += composite_score(*result.judged);
        auto values = result.judged->as_array();
        for (size_t i = 0; i < kMetricCount; ++i) metric_sums[i] += normalize_score(values[i]);
    }

    double n = static_cast<double>(report.n);
    for (size_t i = 0; i < kMetricCount; ++i) report.metric_means[i] = metric_sums[i] / n;

    double mean_of_composites = composite_sum / n;
    double composite_of_means = 0;
    for (double m : report.metric_means) composite_of_means += m;
    composite_of_means /= static_cast<double>(kMetricCount);
    if (std::abs(mean_of_composites - composite_of_means) > 1e-12) {
        throw InvalidRecord("composite mean disagreement beyond 1e-12");
    }
    report.composite_mean = mean_of_composites;
    return report;
}

ojson to_json(const EvalReport& report) {
    ojson metrics;
    for (size_t i = 0; i < kMetricCount; ++i) {
        metrics[kMetricKeys[i]] = report.metric_means[i];
    }
    return ojson{{"metric_means", std::move(metrics)},
                 {"composite_mean", report.composite_mean},
                 {"n", report.n},
                 {"usage", to_json(report.usage)}};
}

std::string render_report_table(const std::string& label, const EvalReport& report) {
    std::ostringstream out;
    auto pad = [](const std::string& s, size_t width) {
        return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
    };
    out << pad("Method", 20);
    for (const char* name : {"Help", "Corr", "Coh", "Comp", "Verb", "Avg"}) {
        out << pad(name, 8);
    }
    out << "N\n";
    out << pad(label, 20);
    for (size_t i = 0; i < kMetricCount; ++i) {
        out << pad(format_fixed(report.metric_means[i], 4), 8);
    }
    out << pad(format_fixed(report.composite_mean, 4), 8);
    out << report.n << "\n";
    return out.str();
}

}  // namespace promptopt
