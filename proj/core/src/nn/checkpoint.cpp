#include "tailaug/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "tailaug/core/hash.hpp"
#include "tailaug/error.hpp"

namespace tailaug::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

namespace {

constexpr char kMagic[] = "TAILAUG-CKPT\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

}  // namespace

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
    const std::uint64_t header_len = file.header_json.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(file.header_json.data(), static_cast<std::streamsize>(header_len));
    const std::uint64_t count = file.weights.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(file.weights.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint: " + path.string());
    char magic[kMagicLen];
    in.read(magic, static_cast<std::streamsize>(kMagicLen));
    if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0) {
        throw SchemaError("not a tailaug checkpoint: " + path.string());
    }
    CheckpointFile file;
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!in || header_len > (1u << 24)) throw SchemaError("corrupt checkpoint header: " + path.string());
    file.header_json.resize(header_len);
    in.read(file.header_json.data(), static_cast<std::streamsize>(header_len));
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || count > (1u << 28)) throw SchemaError("corrupt checkpoint blob: " + path.string());
    file.weights.resize(count);
    in.read(reinterpret_cast<char*>(file.weights.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw SchemaError("truncated checkpoint: " + path.string());
    return file;
}

std::string content_hash(const std::string& header_json, const std::vector<float>& weights) {
    core::Sha256 h;
    h.update(header_json);
    h.update(std::as_bytes(std::span<const float>(weights)));
    return h.hex_digest();
}

}  // namespace tailaug::nn
