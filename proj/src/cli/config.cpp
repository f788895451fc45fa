#include <charconv>
#include <fstream>
#include <sstream>

#include "dronenet/cli.hpp"

namespace dronenet::cli {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw UsageError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

} // namespace

FlatConfig::FlatConfig(std::map<std::string, std::string> defaults) : values_(std::move(defaults)) {}

void FlatConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw UsageError("unknown config key '" + key + "'");
    }
    it->second = value;
}

void FlatConfig::merge_text(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(source + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        try {
            set(key, trim(line.substr(eq + 1)));
        } catch (const UsageError& e) {
            throw UsageError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void FlatConfig::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot read config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path.string());
}

const std::string& FlatConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw UsageError("unknown config key '" + key + "'");
    }
    return it->second;
}

double FlatConfig::real(const std::string& key) const {
    const std::string& v = str(key);
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        bad_value(key, v, "a number");
    }
    if (used != v.size()) {
        bad_value(key, v, "a number");
    }
    return out;
}

std::uint64_t FlatConfig::u64(const std::string& key) const {
    const std::string& v = str(key);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        bad_value(key, v, "a non-negative integer");
    }
    return out;
}

bool FlatConfig::flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "1" || v == "true" || v == "on" || v == "yes") {
        return true;
    }
    if (v == "0" || v == "false" || v == "off" || v == "no") {
        return false;
    }
    bad_value(key, v, "a boolean");
}

std::vector<std::size_t> FlatConfig::list(const std::string& key) const {
    const std::string& v = str(key);
    std::vector<std::size_t> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        std::size_t n = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
        if (ec != std::errc() || ptr != item.data() + item.size() || item.empty() || n == 0) {
            bad_value(key, v, "a comma-separated list of positive integers");
        }
        out.push_back(n);
    }
    if (out.empty()) {
        bad_value(key, v, "a comma-separated list of positive integers");
    }
    return out;
}

} // namespace dronenet::cli
