#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace alc::tools {

// Creates the directory; refuses (returns false) when it already holds
// files and no_clobber is set, warns on stderr when overwriting.
bool prepare_out_dir(const std::filesystem::path& dir, bool no_clobber);

// run_manifest.json: command line, config snapshot, dataset fingerprint,
// tool version and a creation timestamp. Written before any compute.
void write_run_manifest(const std::filesystem::path& dir, const std::string& command_line,
                        const nlohmann::json& config, const std::string& dataset_fingerprint);

nlohmann::json read_run_manifest(const std::filesystem::path& dir);

std::string fingerprint_hex(std::uint64_t fp);

std::string command_line_string(int argc, char** argv);

}  // namespace alc::tools
