#pragma once

#include <memory>
#include <vector>

#include "promptopt/core.hpp"
#include "promptopt/jsonio.hpp"

namespace promptopt {

struct EmptyResults : Error {
    EmptyResults() : Error("EmptyResults", "no results to aggregate") {}
};

struct JudgeOutputUnparseable : Error {
    explicit JudgeOutputUnparseable(const std::string& detail)
        : Error("JudgeOutputUnparseable", detail) {}
};

struct JudgeVerdict {
    ScoreVector scores;  // raw 0-4 scale
    std::string judge_id;
};

struct JudgedOutput {
    JudgeVerdict verdict;
    UsageStats usage;  // zero calls for the rule-based judge
};

/// score / 4. Input must lie in [0, 4].
double normalize_score(double raw);

/// (1/5) * sum(s_m / 4); lies in [0, 1].
double composite_score(const ScoreVector& scores);

class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgedOutput judge(const PromptRecord& prompt, const std::string& response) = 0;
    virtual std::string id() const = 0;
};

/// Deterministic rule-based judge for hermetic runs: coherence is constant 4,
/// verbosity = min(4, words/50), and helpfulness / correctness / complexity
/// are bounded functions of the response's token overlap with the prompt
/// (4*o, 4*o^2 and 4*o*(2-o) for overlap fraction o). No gateway calls.
class RuleBasedJudge final : public Judge {
public:
    JudgedOutput judge(const PromptRecord& prompt, const std::string& response) override;
    std::string id() const override { return "mock"; }
};

/// Remote scoring endpoint: POST {endpoint}/score with {prompt, response},
/// expecting the five metrics as named reals. `scale_by_four` rescales
/// [0,1]-scaled judge outputs onto the 0-4 scale; it is explicit
/// configuration, never auto-detected.
struct HttpJudgeConfig {
    std::string base_url;
    std::string api_key;
    bool scale_by_four = false;
    int timeout_seconds = 120;
};

class HttpJudge final : public Judge {
public:
    explicit HttpJudge(HttpJudgeConfig config);
    JudgedOutput judge(const PromptRecord& prompt, const std::string& response) override;
    std::string id() const override { return "live-judge"; }

private:
    HttpJudgeConfig config_;
};

std::unique_ptr<Judge> make_judge(const std::string& judge_id, const HttpJudgeConfig& config = {});

struct EvalReport {
    std::array<double, kMetricCount> metric_means{};  // normalized, in [0,1]
    double composite_mean = 0;
    std::size_t n = 0;
    UsageStats usage;  // judge-category usage
};

/// Every result must carry judged scores. The composite mean is computed both
/// as mean-of-composites and as composite-of-means; they must agree to 1e-12.
EvalReport aggregate(const std::vector<OptimizationResult>& results);

ojson to_json(const EvalReport& report);

/// Aligned plain-text table: Help Corr Coh Comp Verb Avg (+ N), 4 decimals.
std::string render_report_table(const std::string& label, const EvalReport& report);

}  // namespace promptopt
