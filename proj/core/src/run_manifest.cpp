#include "skylens/run_manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "skylens/errors.hpp"

namespace skylens::harness {

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("open for read: " + path);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[65536];
    while (f) {
        f.read(buf, sizeof(buf));
        const std::streamsize n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

std::string hash_outputs(const std::vector<std::string>& paths) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& p : paths) {
        const std::uint64_t fh = fnv1a_file(p);
        for (int b = 0; b < 8; ++b) {
            h ^= (fh >> (8 * b)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void write_run_manifest(RunManifest manifest, const std::string& path) {
    if (manifest.content_hash.empty()) manifest.content_hash = hash_outputs(manifest.outputs);
    nlohmann::json j;
    j["tool_version"] = manifest.tool_version;
    j["command"] = manifest.command;
    j["seed"] = manifest.seed;
    j["config"] = manifest.config;
    j["inputs"] = manifest.inputs;
    j["outputs"] = manifest.outputs;
    j["content_hash"] = manifest.content_hash;
    std::ofstream f(path);
    if (!f) throw IoError("open for write: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw IoError("write: " + path);
}

RunManifest read_run_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("open for read: " + path);
    nlohmann::json j;
    f >> j;
    RunManifest m;
    m.tool_version = j.value("tool_version", "");
    m.command = j.value("command", "");
    m.seed = j.value("seed", 0ULL);
    if (j.contains("config"))
        for (const auto& [k, v] : j["config"].items()) m.config[k] = v.get<std::string>();
    if (j.contains("inputs")) m.inputs = j["inputs"].get<std::vector<std::string>>();
    if (j.contains("outputs")) m.outputs = j["outputs"].get<std::vector<std::string>>();
    m.content_hash = j.value("content_hash", "");
    return m;
}

}  // namespace skylens::harness
