#pragma once

#include <vector>

#include "promptopt/pipeline.hpp"

namespace promptopt {

struct MixedCorpusChecksums : Error {
    MixedCorpusChecksums(const std::string& a, const std::string& b)
        : Error("MixedCorpusChecksums", a + " vs " + b) {}
};

struct CostRow {
    std::string strategy;
    double mean_input_tokens = 0;
    double mean_output_tokens = 0;
    double mean_calls = 0;       // optimizer category only
    std::size_t n = 0;           // instances
    bool reference = false;      // true for shipped paper-reported rows
};

/// One row per strategy across the given optimize-run manifests, sorted by
/// strategy name. Means cover the optimizer category only. Manifests over
/// different corpora are refused unless `force`.
std::vector<CostRow> cost_table(const std::vector<RunManifest>& manifests, bool force = false);

/// Static comparison rows for the two external multi-agent systems, labeled
/// paper-reported and never recomputed here.
std::vector<CostRow> reference_cost_rows();

std::string render_cost_table(const std::vector<CostRow>& rows);
ojson to_json(const std::vector<CostRow>& rows);

}  // namespace promptopt
