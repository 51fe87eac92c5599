#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "tailaug/core/types.hpp"

namespace tailaug::core {

/// Reads a label CSV with header `id,path,<class names in registry order>`.
/// Cells must be 0 or 1. Relative image paths resolve against the CSV's directory;
/// missing image files are listed in Manifest::unresolved rather than rejected.
Manifest load_manifest(const std::filesystem::path& path, const ClassRegistry& registry,
                       SplitTag split = SplitTag::train);

/// Class names taken from a manifest header (the columns after id,path).
ClassRegistry registry_from_header(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Seeded partition into (train, test). The train side receives
/// floor(n * train_fraction) records; both sides keep manifest order.
std::pair<Manifest, Manifest> split_manifest(const Manifest& manifest, double train_fraction,
                                             std::uint64_t seed);

/// Registry files are a JSON list of class names.
ClassRegistry load_registry(const std::filesystem::path& path);
void write_registry(const std::filesystem::path& path, const ClassRegistry& registry);

/// Concatenates manifests over the same registry. Throws ArgumentError on
/// registry mismatch or duplicate ids.
Manifest concat_manifests(const std::vector<Manifest>& parts, SplitTag split);

/// Records whose label vector is all-zero.
Manifest filter_normals(const Manifest& manifest);

}  // namespace tailaug::core
