#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tailaug::cli {

/// Version of the summary.json layout written by every run.
constexpr int kSummarySchemaVersion = 1;

std::string usage();

/// Runs one subcommand. `args` excludes the program name.
/// Returns 0 on success, 1 when a stage fails, 2 on usage errors.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tailaug::cli
