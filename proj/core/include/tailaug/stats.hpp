#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tailaug/core/types.hpp"

namespace tailaug::stats {

struct ClassStats {
    std::vector<std::int64_t> counts;
    std::int64_t total_samples = 0;

    bool operator==(const ClassStats&) const = default;
};

struct HeadTailPartition {
    core::ClassSet head;
    core::ClassSet tail;
    /// Non-fatal notes, e.g. an empty tail that turns augmentation into a no-op.
    std::vector<std::string> warnings;

    bool is_head(core::ClassIndex c) const { return head.count(c) != 0; }
    bool is_tail(core::ClassIndex c) const { return tail.count(c) != 0; }
};

/// Tail classes named explicitly.
struct ExplicitTail {
    std::vector<std::string> names;
};

/// Class i is tail iff counts[i] < tau * max_j counts[j]. Ties go to head.
struct FrequencyThreshold {
    double tau = 0.1;
};

using PartitionPolicy = std::variant<ExplicitTail, FrequencyThreshold>;

/// The red-marked tail categories of the CXR evaluation tables:
/// EC, LL, CO, PA, PO, FE.
ExplicitTail cxr_tail_policy();

ClassStats compute_class_stats(const core::Manifest& manifest);

HeadTailPartition partition_head_tail(const ClassStats& stats, const core::ClassRegistry& registry,
                                      const PartitionPolicy& policy);

/// JSON array of {class, count, fraction, group} with group "head" or "tail".
std::string stats_report_json(const ClassStats& stats, const core::ClassRegistry& registry,
                              const HeadTailPartition& partition);

}  // namespace tailaug::stats
