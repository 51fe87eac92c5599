#pragma once

#include <cstdint>
#include <vector>

#include "tailaug/core/types.hpp"

namespace tailaug::pil {

/// Exponential ramp-in of the augmented set: at epoch n the included share of
/// D_i is 1 - exp(-beta * n).
struct PILSchedule {
    double beta = 0.5;
    std::int64_t total_augmented = 0;
    std::uint64_t ordering_seed = 0;

    void validate() const;
};

double pil_fraction(std::int64_t epoch, double beta);

/// floor(total_augmented * pil_fraction(epoch, beta)), clamped to [0, total_augmented].
std::int64_t pil_included_count(std::int64_t epoch, const PILSchedule& schedule);

/// Training view for one epoch: every original record followed by a prefix of
/// the once-shuffled augmented records.
struct EpochView {
    std::vector<core::SampleRecord> records;
    /// Parallel to records: the manifest each record resolves its image against.
    std::vector<const core::Manifest*> sources;
    std::size_t original_count = 0;
    std::size_t augmented_count = 0;

    std::size_t size() const { return records.size(); }
};

/// The fixed ordering of D_i used by every epoch.
std::vector<std::size_t> augmented_order(std::size_t total, std::uint64_t ordering_seed);

/// Throws ArgumentError if the view would contain a duplicated record id or the
/// schedule disagrees with |d_i|.
EpochView build_epoch_dataset(const core::Manifest& d_o, const core::Manifest& d_i, std::int64_t epoch,
                              const PILSchedule& schedule);

/// Whole D_i from the first epoch (the ablation without progressive ramp-in).
EpochView build_mixed_dataset(const core::Manifest& d_o, const core::Manifest& d_i);

/// D_o alone.
EpochView build_original_dataset(const core::Manifest& d_o);

}  // namespace tailaug::pil
