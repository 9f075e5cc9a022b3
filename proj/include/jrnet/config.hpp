#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace jrnet {

/// Flat key = value configuration, used for session manifests, pipeline
/// configs and output metadata sidecars. Lines starting with '#' are
/// comments. Keys are dotted paths ("trial.T1.rate.ecg").
class Config {
public:
    Config() = default;

    static Config parse_file(const std::filesystem::path& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int_or(const std::string& key, long fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;
    /// Whitespace- or comma-separated list value.
    std::vector<std::string> get_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, long value);
    void set_bool(const std::string& key, bool value);

    /// Keys in sorted order (canonical form for snapshots and hashing).
    std::vector<std::string> keys() const;
    /// Canonical "key = value" text, keys sorted.
    std::string serialize() const;
    /// FNV-1a hash of the canonical serialization, as 16 hex digits.
    std::string hash() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& data);
std::string to_hex(std::uint64_t value);

/// Locale-independent round-trippable double formatting (%.17g).
std::string format_double(double v);

} // namespace jrnet
