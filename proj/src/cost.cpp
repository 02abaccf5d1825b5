#include "promptopt/cost.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace promptopt {

std::vector<CostRow> cost_table(const std::vector<RunManifest>& manifests, bool force) {
    std::string corpus_checksum;
    struct Bucket {
        UsageStats optimizer;
        std::size_t items = 0;
    };
    std::map<std::string, Bucket> buckets;

    for (const auto& manifest : manifests) {
        if (manifest.strategy.empty() || manifest.items == 0) continue;
        if (!force) {
            if (corpus_checksum.empty()) {
                corpus_checksum = manifest.corpus_checksum;
            } else if (manifest.corpus_checksum != corpus_checksum) {
                throw MixedCorpusChecksums(corpus_checksum, manifest.corpus_checksum);
            }
        }
        Bucket& bucket = buckets[manifest.strategy];
        if (manifest.ledger.contains("optimizer")) {
            bucket.optimizer += usage_from_json(manifest.ledger["optimizer"]);
        }
        bucket.items += manifest.items;
    }

    std::vector<CostRow> rows;
    for (const auto& [strategy, bucket] : buckets) {
        CostRow row;
        row.strategy = strategy;
        row.n = bucket.items;
        double n = static_cast<double>(bucket.items);
        row.mean_input_tokens = static_cast<double>(bucket.optimizer.input_tokens) / n;
        row.mean_output_tokens = static_cast<double>(bucket.optimizer.output_tokens) / n;
        row.mean_calls = static_cast<double>(bucket.optimizer.calls) / n;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(),
              [](const CostRow& a, const CostRow& b) { return a.strategy < b.strategy; });
    return rows;
}

std::vector<CostRow> reference_cost_rows() {
    return {CostRow{"mad", 5217.0, 2170.0, 8.0, 0, true},
            CostRow{"mars", 17149.0, 6789.0, 60.0, 0, true}};
}

std::string render_cost_table(const std::vector<CostRow>& rows) {
    std::ostringstream out;
    auto pad = [](const std::string& s, size_t width) {
        return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
    };
    out << pad("Strategy", 20) << pad("InTokens", 12) << pad("OutTokens", 12) << pad("Calls", 8)
        << pad("N", 8) << "Source\n";
    for (const auto& row : rows) {
        out << pad(row.strategy, 20) << pad(format_fixed(row.mean_input_tokens, 1), 12)
            << pad(format_fixed(row.mean_output_tokens, 1), 12)
            << pad(format_fixed(row.mean_calls, 1), 8)
            << pad(row.reference ? "-" : std::to_string(row.n), 8)
            << (row.reference ? "paper-reported" : "measured") << "\n";
    }
    return out.str();
}

ojson to_json(const std::vector<CostRow>& rows) {
    ojson arr = ojson::array();
    for (const auto& row : rows) {
        arr.push_back(ojson{{"strategy", row.strategy},
                            {"mean_input_tokens", row.mean_input_tokens},
                            {"mean_output_tokens", row.mean_output_tokens},
                            {"mean_calls", row.mean_calls},
                            {"n", row.n},
                            {"source", row.reference ? "paper-reported" : "measured"}});
    }
    return arr;
}

}  // namespace promptopt
