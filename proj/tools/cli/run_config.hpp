#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tailaug::cli {

struct ConfigKey {
    std::string key;
    std::string default_value;
    std::string doc;
};

/// Every recognized key with its default and a one-line description.
const std::vector<ConfigKey>& config_keys();

/// Flat `key = value` run configuration. Lines starting with '#' are comments.
/// Unknown keys are rejected so typos fail loudly.
class RunConfig {
public:
    /// All keys at their defaults.
    RunConfig();

    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    /// Applies the keys set in `text` on top of this config.
    void merge(const std::string& text, const std::string& origin);
    void set(const std::string& key, const std::string& value);
    /// Parses "key=value".
    void set_assignment(const std::string& assignment);

    const std::string& get(const std::string& key) const;
    double number(const std::string& key) const;
    int integer(const std::string& key) const;
    std::uint64_t u64(const std::string& key) const;
    bool flag(const std::string& key) const;
    /// Comma-separated list with blanks dropped.
    std::vector<std::string> list(const std::string& key) const;
    std::filesystem::path path(const std::string& key) const { return get(key); }

    /// Seed for a named stage, derived from the master seed.
    std::uint64_t stage_seed(const std::string& stage) const;

    /// Deterministic text form with documentation comments; parse(dump()) round-trips.
    std::string dump() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace tailaug::cli
