#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tablere/binio.hpp"
#include "tablere/errors.hpp"
#include "tablere/version.hpp"

namespace tablere {

/// CRC-32 of a file's bytes, hex-encoded. Used as the input digest in run
/// manifests: it changes whenever the input file changes.
inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("digest: cannot open '" + path + "'");
    }
    binio::Crc32 crc;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        crc.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    char hex[16];
    std::snprintf(hex, sizeof hex, "%08x", crc.value());
    return hex;
}

/// Resolved run configuration plus input digests, written before training
/// starts and never touched afterwards.
struct RunManifest {
    nlohmann::json config;
    std::map<std::string, std::string> input_digests;
    std::vector<std::string> artifacts;

    void write(const std::string& path) const {
        nlohmann::json j;
        j["tool_version"] = kVersion;
        j["config"] = config;
        j["input_digests"] = input_digests;
        j["artifacts"] = artifacts;
        std::ofstream out(path);
        if (!out) {
            throw DataError("manifest: cannot write '" + path + "'");
        }
        out << j.dump(2) << '\n';
    }
};

} // namespace tablere
