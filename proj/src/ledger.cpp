#include "promptopt/ledger.hpp"

namespace promptopt {

std::string to_string(CallCategory c) { return kCategoryNames[static_cast<size_t>(c)]; }

CallCategory category_from_string(const std::string& name) {
    for (size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (name == kCategoryNames[i]) return static_cast<CallCategory>(i);
    }
    throw InvalidRecord("unknown call category: " + name);
}

void UsageLedger::record(CallCategory category, const UsageStats& usage) {
    validate_usage(usage);
    std::lock_guard lock(mutex_);
    totals_[static_cast<size_t>(category)] += usage;
}

void UsageLedger::record_failure(CallCategory category, int attempts) {
    std::lock_guard lock(mutex_);
    failed_[static_cast<size_t>(category)] += attempts;
}

UsageStats UsageLedger::totals(CallCategory category) const {
    std::lock_guard lock(mutex_);
    return totals_[static_cast<size_t>(category)];
}

UsageStats UsageLedger::grand_total() const {
    std::lock_guard lock(mutex_);
    UsageStats sum;
    for (const auto& u : totals_) sum += u;
    return sum;
}

std::int64_t UsageLedger::failed_attempts(CallCategory category) const {
    std::lock_guard lock(mutex_);
    return failed_[static_cast<size_t>(category)];
}

ojson UsageLedger::to_json() const {
    std::lock_guard lock(mutex_);
    ojson j;
    for (size_t i = 0; i < kCategoryNames.size(); ++i) {
        j[kCategoryNames[i]] = promptopt::to_json(totals_[i]);
        j[kCategoryNames[i]]["failed_attempts"] = failed_[i];
    }
    return j;
}

}  // namespace promptopt
