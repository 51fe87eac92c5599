#pragma once

#include <string>
#include <vector>

#include "tailaug/core/types.hpp"
#include "tailaug/stats.hpp"
#include "tailaug/trainer.hpp"

namespace tailaug::cli {

/// Per-class F1 table: one row per method, overall macro F1 first, treated
/// cells annotated with their signed delta. Tail columns carry a '*'.
std::string markdown_f1_table(const trainer::EvalReport& baseline, const trainer::EvalReport& treated,
                              const std::string& baseline_name, const std::string& treated_name);

/// Horizontal-axis bar chart. `highlight` bars are drawn in the accent color.
/// Negative values extend below the zero line.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const core::ClassSet& highlight);

std::string class_distribution_svg(const stats::ClassStats& stats, const core::ClassRegistry& registry,
                                   const stats::HeadTailPartition& partition);

std::string f1_delta_svg(const trainer::DeltaReport& delta, const core::ClassSet& tail);

}  // namespace tailaug::cli
