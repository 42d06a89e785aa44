#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace crownfill {

inline constexpr const char* kToolVersion = "0.1.0";

// Plain-text "key = value" configuration, '#' comments. Unknown keys are
// rejected so typos fail loudly.
class KeyValueConfig {
public:
    static KeyValueConfig from_file(const std::string& path);
    static KeyValueConfig from_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    uint64_t get_uint(const std::string& key, uint64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key) const;  // comma separated
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    // Throws ConfigError when a key outside `allowed` is present.
    void restrict_keys(const std::set<std::string>& allowed) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace crownfill
