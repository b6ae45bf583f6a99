#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omt/io/hash.hpp"

namespace omt {

// Every CLI run writes a manifest: the resolved config plus content hashes of
// input and output files. `omt rerun <manifest>` re-executes the run and
// checks the fresh outputs hash identically, which pins bit-reproducibility.

struct FileStamp {
    std::string path;
    std::string sha256;
};

struct Manifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    int workers = 1;
    std::vector<FileStamp> inputs;
    std::vector<FileStamp> outputs;
};

inline FileStamp stamp_file(const std::string& path) {
    return FileStamp{path, sha256_file(path)};
}

inline void write_manifest(const std::string& path, const Manifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["seed"] = m.seed;
    j["workers"] = m.workers;
    auto stamp_list = [](const std::vector<FileStamp>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& s : v) a.push_back({{"path", s.path}, {"sha256", s.sha256}});
        return a;
    };
    j["inputs"] = stamp_list(m.inputs);
    j["outputs"] = stamp_list(m.outputs);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << "\n";
}

inline Manifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    f >> j;
    Manifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.workers = j.at("workers").get<int>();
    auto read_list = [](const nlohmann::json& a, std::vector<FileStamp>& out) {
        for (const auto& e : a)
            out.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
    };
    read_list(j.at("inputs"), m.inputs);
    read_list(j.at("outputs"), m.outputs);
    return m;
}

} // namespace omt
