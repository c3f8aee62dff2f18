#include "manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

#include <alc/version.hpp>

namespace alc::tools {

bool prepare_out_dir(const std::filesystem::path& dir, bool no_clobber) {
    std::error_code ec;
    if (std::filesystem::exists(dir, ec) && !std::filesystem::is_empty(dir, ec)) {
        if (no_clobber) {
            std::cerr << "error: output directory " << dir.string()
                      << " is not empty (--no-clobber)\n";
            return false;
        }
        std::cerr << "warning: overwriting contents of " << dir.string() << "\n";
    }
    std::filesystem::create_directories(dir);
    return true;
}

void write_run_manifest(const std::filesystem::path& dir, const std::string& command_line,
                        const nlohmann::json& config,
                        const std::string& dataset_fingerprint) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::tm tm_utc{};
    gmtime_r(&tt, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);

    nlohmann::json j;
    j["command"] = command_line;
    j["config"] = config;
    j["dataset_fingerprint"] = dataset_fingerprint;
    j["tool_version"] = kVersion;
    j["created_utc"] = stamp;
    std::ofstream f(dir / "run_manifest.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write run manifest in " + dir.string());
    f << j.dump(2) << '\n';
}

nlohmann::json read_run_manifest(const std::filesystem::path& dir) {
    std::ifstream f(dir / "run_manifest.json");
    if (!f) throw std::runtime_error("no run_manifest.json in " + dir.string());
    return nlohmann::json::parse(f);
}

std::string fingerprint_hex(std::uint64_t fp) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
    return buf;
}

std::string command_line_string(int argc, char** argv) {
    std::string out;
    for (int i = 0; i < argc; ++i) {
        if (i) out += ' ';
        out += argv[i];
    }
    return out;
}

}  // namespace alc::tools
