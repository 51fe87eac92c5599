#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tailaug::nn {

/// Self-describing container: a JSON header followed by a little-endian float blob.
///
///   "TAILAUG-CKPT\n" | u64 header_len | header JSON | u64 n_floats | float[n_floats]
struct CheckpointFile {
    std::string header_json;
    std::vector<float> weights;
};

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

/// SHA-256 over header JSON and weight bytes.
std::string content_hash(const std::string& header_json, const std::vector<float>& weights);

}  // namespace tailaug::nn
