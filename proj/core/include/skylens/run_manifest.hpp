#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace skylens::harness {

inline constexpr const char* kToolVersion = "0.1.0";

// Reproducibility record written by every CLI run: the configuration
// snapshot plus a combined content hash of the outputs.
struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string command;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string content_hash;  // FNV-1a 64 over the output files, in order
};

std::uint64_t fnv1a_file(const std::string& path);
std::string hash_outputs(const std::vector<std::string>& paths);

void write_run_manifest(RunManifest manifest, const std::string& path);
RunManifest read_run_manifest(const std::string& path);

}  // namespace skylens::harness
