#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dronenet::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitNumerical = 3,
    kExitGradcheck = 4,
};

/// Bad command line or config; the message names the offending key.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat key=value settings. '#' starts a comment; blank lines are ignored; later
/// assignments win. Only keys declared up front are accepted.
class FlatConfig {
public:
    explicit FlatConfig(std::map<std::string, std::string> defaults);

    void set(const std::string& key, const std::string& value);
    void merge_text(const std::string& text, const std::string& source);
    void merge_file(const std::filesystem::path& path);

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
    [[nodiscard]] const std::string& str(const std::string& key) const;
    [[nodiscard]] double real(const std::string& key) const;
    [[nodiscard]] std::uint64_t u64(const std::string& key) const;
    [[nodiscard]] bool flag(const std::string& key) const;
    /// Comma-separated positive integers.
    [[nodiscard]] std::vector<std::size_t> list(const std::string& key) const;

    [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string started_at;
    std::string finished_at;
    /// "ok", or the error that ended the run.
    std::string status = "ok";
    /// CRC-32 (hex) of each deterministic output, keyed by file name.
    std::map<std::string, std::string> checksums;

    void add_output(const std::filesystem::path& path, bool deterministic = true);
    [[nodiscard]] std::string to_json() const;
    void write(const std::filesystem::path& path) const;
};

/// UTC timestamp, ISO 8601 with seconds.
std::string utc_now();
std::string file_crc32_hex(const std::filesystem::path& path);

/// Entry point shared by the executable and the tests: args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dronenet::cli
