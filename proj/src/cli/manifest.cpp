#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "dronenet/cli.hpp"
#include "dronenet/errors.hpp"
#include "dronenet/model_io.hpp"

namespace dronenet::cli {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string file_crc32_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string() + " for checksumming");
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc32(bytes));
    return buf;
}

void RunManifest::add_output(const std::filesystem::path& path, bool deterministic) {
    outputs.push_back(path.string());
    if (deterministic) {
        checksums[path.filename().string()] = file_crc32_hex(path);
    }
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json doc;
    doc["command"] = command;
    doc["config"] = config;
    doc["seed"] = seed;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    doc["started_at"] = started_at;
    doc["finished_at"] = finished_at;
    doc["status"] = status;
    doc["checksums"] = checksums;
    return doc.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write manifest " + path.string());
    }
    out << to_json();
}

} // namespace dronenet::cli
