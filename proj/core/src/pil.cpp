#include "tailaug/pil.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"

namespace tailaug::pil {

void PILSchedule::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("PIL beta must be > 0");
    if (total_augmented < 0) throw ArgumentError("PIL total_augmented must be >= 0");
}

double pil_fraction(std::int64_t epoch, double beta) {
    if (epoch < 0) throw ArgumentError("epoch index must be >= 0");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("PIL beta must be > 0");
    // -expm1(-x) == 1 - exp(-x) without cancellation for small x.
    return -std::expm1(-beta * static_cast<double>(epoch));
}

std::int64_t pil_included_count(std::int64_t epoch, const PILSchedule& schedule) {
    schedule.validate();
    const double fraction = pil_fraction(epoch, schedule.beta);
    const auto count = static_cast<std::int64_t>(std::floor(static_cast<double>(schedule.total_augmented) * fraction));
    return std::clamp<std::int64_t>(count, 0, schedule.total_augmented);
}

std::vector<std::size_t> augmented_order(std::size_t total, std::uint64_t ordering_seed) {
    return core::shuffled_indices(total, core::derive_seed(ordering_seed, "pil-order"));
}

namespace {

EpochView assemble(const core::Manifest& d_o, const core::Manifest* d_i, const std::vector<std::size_t>& order,
                   std::size_t take) {
    if (d_i && !(d_i->registry == d_o.registry)) throw ArgumentError("D_o and D_i use different registries");
    EpochView view;
    view.records.reserve(d_o.records.size() + take);
    std::unordered_set<std::string> ids;
    auto push = [&](const core::SampleRecord& record, const core::Manifest* source) {
        if (!ids.insert(record.id).second) throw ArgumentError("epoch view would duplicate record id " + record.id);
        view.records.push_back(record);
        view.sources.push_back(source);
    };
    for (const auto& record : d_o.records) push(record, &d_o);
    view.original_count = d_o.records.size();
    for (std::size_t i = 0; i < take; ++i) push(d_i->records[order[i]], d_i);
    view.augmented_count = take;
    return view;
}

}  // namespace

EpochView build_epoch_dataset(const core::Manifest& d_o, const core::Manifest& d_i, std::int64_t epoch,
                              const PILSchedule& schedule) {
    if (static_cast<std::size_t>(schedule.total_augmented) != d_i.records.size()) {
        throw ArgumentError("PIL schedule total_augmented does not match |D_i|");
    }
    const auto take = static_cast<std::size_t>(pil_included_count(epoch, schedule));
    return assemble(d_o, &d_i, augmented_order(d_i.records.size(), schedule.ordering_seed), take);
}

EpochView build_mixed_dataset(const core::Manifest& d_o, const core::Manifest& d_i) {
    std::vector<std::size_t> order(d_i.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return assemble(d_o, &d_i, order, order.size());
}

EpochView build_original_dataset(const core::Manifest& d_o) { return assemble(d_o, nullptr, {}, 0); }

}  // namespace tailaug::pil
