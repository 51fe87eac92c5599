#include "tailaug/core/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"

namespace tailaug::core {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

ClassRegistry registry_from_header(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open manifest: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("manifest has no header row: " + path.string());
    strip_cr(line);
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "id" || header[1] != "path") {
        throw SchemaError("manifest header must start with id,path and name at least one class: " + path.string());
    }
    return ClassRegistry(std::vector<std::string>(header.begin() + 2, header.end()));
}

Manifest load_manifest(const std::filesystem::path& path, const ClassRegistry& registry, SplitTag split) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open manifest: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError("manifest has no header row: " + path.string());
    }
    strip_cr(line);
    const auto header = split_csv_line(line);
    std::vector<std::string> expected = {"id", "path"};
    expected.insert(expected.end(), registry.names().begin(), registry.names().end());
    if (header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw SchemaError("manifest header mismatch in " + path.string() + "; expected: " + want);
    }

    Manifest manifest;
    manifest.registry = registry;
    manifest.split = split;
    manifest.base_dir = path.parent_path();

    std::unordered_set<std::string> seen;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != expected.size()) {
            throw ValidationError("row " + std::to_string(row) + ": expected " + std::to_string(expected.size()) +
                                      " cells, got " + std::to_string(cells.size()),
                                  row, "");
        }
        SampleRecord record;
        record.id = cells[0];
        record.image_path = cells[1];
        if (record.id.empty()) {
            throw ValidationError("row " + std::to_string(row) + ": empty id", row, "id");
        }
        if (!seen.insert(record.id).second) {
            throw ValidationError("row " + std::to_string(row) + ": duplicate id " + record.id, row, "id");
        }
        record.labels = LabelVector(registry.size());
        for (std::size_t k = 0; k < registry.size(); ++k) {
            const std::string& cell = cells[k + 2];
            if (cell == "1") {
                record.labels.set(static_cast<ClassIndex>(k));
            } else if (cell != "0") {
                throw ValidationError("row " + std::to_string(row) + ", column " + registry.names()[k] +
                                          ": label cell '" + cell + "' is not 0 or 1",
                                      row, registry.names()[k]);
            }
        }
        if (!std::filesystem::exists(manifest.resolve(record))) {
            manifest.unresolved.push_back(record.id);
        }
        manifest.records.push_back(std::move(record));
    }
    return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write manifest: " + path.string());
    }
    out << "id,path";
    for (const auto& name : manifest.registry.names()) out << ',' << name;
    out << '\n';
    for (const auto& record : manifest.records) {
        out << record.id << ',' << record.image_path;
        for (std::size_t k = 0; k < record.labels.size(); ++k) {
            out << ',' << (record.labels.test(static_cast<ClassIndex>(k)) ? '1' : '0');
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing manifest: " + path.string());
    }
}

std::pair<Manifest, Manifest> split_manifest(const Manifest& manifest, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ArgumentError("train fraction must lie in (0,1), got " + std::to_string(train_fraction));
    }
    const std::size_t n = manifest.records.size();
    const auto train_count = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    auto order = shuffled_indices(n, seed);
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
    std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    auto take = [&](const std::vector<std::size_t>& idx, SplitTag tag) {
        Manifest part;
        part.registry = manifest.registry;
        part.split = tag;
        part.base_dir = manifest.base_dir;
        part.records.reserve(idx.size());
        for (std::size_t i : idx) part.records.push_back(manifest.records[i]);
        return part;
    };
    return {take(train_idx, SplitTag::train), take(test_idx, SplitTag::test)};
}

ClassRegistry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open registry: " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("registry is not valid JSON: " + path.string() + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw SchemaError("registry must be a JSON list of class names: " + path.string());
    }
    std::vector<std::string> names;
    for (const auto& item : doc) {
        if (!item.is_string()) throw SchemaError("registry entries must be strings: " + path.string());
        names.push_back(item.get<std::string>());
    }
    return ClassRegistry(std::move(names));
}

void write_registry(const std::filesystem::path& path, const ClassRegistry& registry) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write registry: " + path.string());
    out << nlohmann::json(registry.names()).dump(2) << '\n';
}

Manifest concat_manifests(const std::vector<Manifest>& parts, SplitTag split) {
    Manifest out;
    out.split = split;
    if (parts.empty()) return out;
    out.registry = parts.front().registry;
    std::unordered_set<std::string> seen;
    for (const auto& part : parts) {
        if (!(part.registry == out.registry)) {
            throw ArgumentError("cannot concatenate manifests over different registries");
        }
        for (const auto& record : part.records) {
            if (!seen.insert(record.id).second) {
                throw ArgumentError("duplicate record id across manifests: " + record.id);
            }
            SampleRecord copy = record;
            // Paths are made absolute so each record keeps resolving after the merge.
            copy.image_path = part.resolve(record).string();
            out.records.push_back(std::move(copy));
        }
    }
    return out;
}

Manifest filter_normals(const Manifest& manifest) {
    Manifest out;
    out.registry = manifest.registry;
    out.split = manifest.split;
    out.base_dir = manifest.base_dir;
    for (const auto& record : manifest.records) {
        if (!record.labels.any()) out.records.push_back(record);
    }
    return out;
}

}  // namespace tailaug::core
