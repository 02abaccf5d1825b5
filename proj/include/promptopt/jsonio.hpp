#pragma once

#include <json.hpp>

#include "promptopt/core.hpp"

namespace promptopt {

/// All persisted records use insertion-ordered JSON dumped without
/// indentation, so identical values always serialize to identical bytes.
using ojson = nlohmann::ordered_json;

ojson to_json(const PromptRecord& p);
PromptRecord prompt_from_json(const ojson& j);

ojson to_json(const ScoreVector& s);
ScoreVector scores_from_json(const ojson& j);

ojson to_json(const TrainingInstance& t);
TrainingInstance instance_from_json(const ojson& j);

ojson to_json(const ReasoningAssets& a);
ReasoningAssets assets_from_json(const ojson& j);

ojson to_json(const RetrievalHit& h);
RetrievalHit hit_from_json(const ojson& j);

ojson to_json(const UsageStats& u);
UsageStats usage_from_json(const ojson& j);

ojson to_json(const OptimizationResult& r);
OptimizationResult result_from_json(const ojson& j);

/// dump() on one line; the building block of every line-delimited file.
std::string canonical_line(const ojson& j);

}  // namespace promptopt
