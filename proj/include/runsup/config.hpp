#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace runsup {

// Plain-text key/value configuration with [section] headers, `key = value`
// lines and '#' / ';' comments. Keys are addressed as "section.key".
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;  // comma separated

    const std::string& raw_text() const { return raw_; }
    // Keys in file order, for canonical dumps.
    const std::vector<std::string>& keys() const { return order_; }

private:
    std::string require(const std::string& key) const;
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
    std::string raw_;
};

}  // namespace runsup
