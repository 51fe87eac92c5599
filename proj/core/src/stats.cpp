#include "tailaug/stats.hpp"

#include <algorithm>

#include "json.hpp"
#include "tailaug/error.hpp"

namespace tailaug::stats {

ExplicitTail cxr_tail_policy() {
    return ExplicitTail{{"Enlarged Cardiomediastinum", "Lung Lesion", "Consolidation", "Pneumonia",
                         "Pleural Other", "Fracture"}};
}

ClassStats compute_class_stats(const core::Manifest& manifest) {
    if (manifest.records.empty()) {
        throw ArgumentError("cannot compute class statistics of an empty manifest");
    }
    ClassStats stats;
    stats.counts.assign(manifest.registry.size(), 0);
    for (const auto& record : manifest.records) {
        for (core::ClassIndex c : record.labels.positives()) ++stats.counts[static_cast<std::size_t>(c)];
    }
    stats.total_samples = static_cast<std::int64_t>(manifest.records.size());
    return stats;
}

HeadTailPartition partition_head_tail(const ClassStats& stats, const core::ClassRegistry& registry,
                                      const PartitionPolicy& policy) {
    if (stats.counts.size() != registry.size()) {
        throw ArgumentError("class statistics and registry disagree on the number of classes");
    }
    HeadTailPartition partition;
    const auto k = static_cast<core::ClassIndex>(registry.size());

    if (const auto* explicit_tail = std::get_if<ExplicitTail>(&policy)) {
        for (const auto& name : explicit_tail->names) partition.tail.insert(registry.index_of(name));
    } else {
        const double tau = std::get<FrequencyThreshold>(policy).tau;
        if (!(tau > 0.0 && tau < 1.0)) {
            throw ArgumentError("frequency threshold must lie in (0,1)");
        }
        const auto max_count = *std::max_element(stats.counts.begin(), stats.counts.end());
        const double cutoff = tau * static_cast<double>(max_count);
        for (core::ClassIndex c = 0; c < k; ++c) {
            if (static_cast<double>(stats.counts[static_cast<std::size_t>(c)]) < cutoff) partition.tail.insert(c);
        }
    }
    for (core::ClassIndex c = 0; c < k; ++c) {
        if (!partition.tail.count(c)) partition.head.insert(c);
    }
    if (partition.tail.empty()) {
        partition.warnings.emplace_back("no tail classes: augmentation will be a no-op");
    }
    return partition;
}

std::string stats_report_json(const ClassStats& stats, const core::ClassRegistry& registry,
                              const HeadTailPartition& partition) {
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < registry.size(); ++i) {
        nlohmann::ordered_json row;
        row["class"] = registry.names()[i];
        row["count"] = stats.counts[i];
        row["fraction"] = stats.total_samples > 0
                              ? static_cast<double>(stats.counts[i]) / static_cast<double>(stats.total_samples)
                              : 0.0;
        row["group"] = partition.is_tail(static_cast<core::ClassIndex>(i)) ? "tail" : "head";
        classes.push_back(std::move(row));
    }
    nlohmann::ordered_json doc;
    doc["total_samples"] = stats.total_samples;
    doc["classes"] = std::move(classes);
    doc["warnings"] = partition.warnings;
    return doc.dump(2);
}

}  // namespace tailaug::stats
