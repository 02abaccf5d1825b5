#pragma once

#include <array>
#include <mutex>

#include "promptopt/core.hpp"
#include "promptopt/jsonio.hpp"

namespace promptopt {

/// Who a gateway call was made on behalf of. The cost table reports the
/// Optimizer category only; Responder and Judge are ledgered separately so
/// both views of per-instance cost stay reconstructible.
enum class CallCategory { Training, Optimizer, Responder, Judge };

inline constexpr std::array<const char*, 4> kCategoryNames = {"training", "optimizer",
                                                              "responder", "judge"};
std::string to_string(CallCategory c);
CallCategory category_from_string(const std::string& name);

/// Append-only usage accumulator, safe under concurrent appends. Accepted
/// calls and terminally-failed attempts are tracked separately: a failed
/// call contributes calls = 0 to the accepted totals.
class UsageLedger {
public:
    void record(CallCategory category, const UsageStats& usage);
    void record_failure(CallCategory category, int attempts);

    UsageStats totals(CallCategory category) const;
    UsageStats grand_total() const;
    std::int64_t failed_attempts(CallCategory category) const;

    ojson to_json() const;

private:
    mutable std::mutex mutex_;
    std::array<UsageStats, 4> totals_{};
    std::array<std::int64_t, 4> failed_{};
};

}  // namespace promptopt
