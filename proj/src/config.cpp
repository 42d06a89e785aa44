#include "crownfill/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "crownfill/error.hpp"

namespace crownfill {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return from_string(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

std::string KeyValueConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key \"" + key + "\"");
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int64_t KeyValueConfig::get_int(const std::string& key) const {
    try {
        return std::stoll(get_string(key));
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        throw ConfigError("key \"" + key + "\" is not an integer");
    }
}

int64_t KeyValueConfig::get_int(const std::string& key, int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

uint64_t KeyValueConfig::get_uint(const std::string& key, uint64_t fallback) const {
    if (!has(key)) return fallback;
    try {
        return std::stoull(get_string(key));
    } catch (...) {
        throw ConfigError("key \"" + key + "\" is not an unsigned integer");
    }
}

double KeyValueConfig::get_double(const std::string& key) const {
    try {
        return std::stod(get_string(key));
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        throw ConfigError("key \"" + key + "\" is not a number");
    }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key \"" + key + "\" is not a boolean");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    std::istringstream ss(get_string(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key,
                                              const std::vector<int>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    for (const std::string& s : get_list(key)) {
        try {
            out.push_back(std::stoi(s));
        } catch (...) {
            throw ConfigError("key \"" + key + "\" has a non-integer element");
        }
    }
    return out;
}

void KeyValueConfig::restrict_keys(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values_)
        if (allowed.find(key) == allowed.end())
            throw ConfigError("unknown key \"" + key + "\"");
}

}  // namespace crownfill
