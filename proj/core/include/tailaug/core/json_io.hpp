#pragma once

#include <string>

#include "tailaug/core/types.hpp"

namespace tailaug::core {

/// Serializes a provenance record as a compact JSON object. `status` is
/// "emitted" or "skipped:<reason>"; `detail` is omitted when empty.
/// Classes are written by name when a registry is given, else by index.
std::string provenance_json_line(const ProvenanceRecord& record, const std::string& status,
                                 const std::string& detail = {}, const ClassRegistry* registry = nullptr);

}  // namespace tailaug::core
