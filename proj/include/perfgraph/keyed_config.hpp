#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "perfgraph/error.hpp"
#include "perfgraph/rng.hpp"

namespace perfgraph {

/// Flat `key = value` text config. A `[section]` line prefixes the keys that
/// follow with `section.`; `#` starts a comment.
class KeyedConfig {
public:
    KeyedConfig() = default;

    static KeyedConfig parse(const std::string& text, const std::string& origin = "<text>") {
        KeyedConfig cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') fail(ErrorKind::ConfigError, origin + ":" + std::to_string(lineno) + ": bad section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) fail(ErrorKind::ConfigError, origin + ":" + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            if (!section.empty()) key = section + "." + key;
            cfg.values_[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    static KeyedConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorKind::ConfigError, "cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const std::string& str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) fail(ErrorKind::ConfigError, "missing config key '" + key + "'");
        return it->second;
    }
    std::string str(const std::string& key, const std::string& fallback) const { return has(key) ? str(key) : fallback; }

    double num(const std::string& key) const {
        const std::string& v = str(key);
        try {
            std::size_t used = 0;
            const double x = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            fail(ErrorKind::ConfigError, "config key '" + key + "' is not a number: '" + v + "'");
        }
    }
    double num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }

    std::vector<double> nums(const std::string& key) const {
        std::vector<double> out;
        for (const auto& part : split(str(key), ',')) {
            try {
                out.push_back(std::stod(part));
            } catch (const std::exception&) {
                fail(ErrorKind::ConfigError, "config key '" + key + "' has a non-numeric entry '" + part + "'");
            }
        }
        return out;
    }

    std::vector<std::string> strs(const std::string& key) const { return split(str(key), ','); }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    /// Canonical `key = value` listing, sorted by key.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

    std::uint64_t hash() const { return fnv1a(canonical()); }

    const std::map<std::string, std::string>& values() const { return values_; }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static std::vector<std::string> split(const std::string& s, char sep) {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream in(s);
        while (std::getline(in, cur, sep)) {
            cur = trim(cur);
            if (!cur.empty()) out.push_back(cur);
        }
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

inline std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xF];
    return s;
}

} // namespace perfgraph
