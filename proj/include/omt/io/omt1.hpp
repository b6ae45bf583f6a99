#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omt/core/tensor.hpp"

namespace omt {

// OMT1 binary tensor container. Layout, all little-endian:
//   magic "OMT1" | version u32 | dtype u32 (0 = f64, 1 = c128) | rank u32
//   | extents u64[rank] | payload (row-major)
// A JSON sidecar at <path>.json carries grid metadata (n, frequency ranges,
// noise level, seeds) so artifacts stay self-describing.

inline constexpr std::uint32_t omt1_version = 1;

namespace omt1_detail {

template <typename T>
void put(std::ofstream& f, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!f) throw std::runtime_error("truncated OMT1 file: " + path);
    return v;
}

inline void write_header(std::ofstream& f, std::uint32_t dtype,
                         const std::vector<std::size_t>& shape) {
    f.write("OMT1", 4);
    put(f, omt1_version);
    put(f, dtype);
    put(f, std::uint32_t(shape.size()));
    for (std::size_t e : shape) put(f, std::uint64_t(e));
}

struct Header {
    std::uint32_t dtype = 0;
    std::vector<std::size_t> shape;
    std::size_t count = 1;
};

inline Header read_header(std::ifstream& f, const std::string& path) {
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "OMT1", 4) != 0)
        throw std::runtime_error("not an OMT1 file: " + path);
    auto version = get<std::uint32_t>(f, path);
    if (version != omt1_version)
        throw std::runtime_error("unsupported OMT1 version in " + path);
    Header h;
    h.dtype = get<std::uint32_t>(f, path);
    if (h.dtype > 1) throw std::runtime_error("unknown OMT1 dtype in " + path);
    auto rank = get<std::uint32_t>(f, path);
    if (rank > 16) throw std::runtime_error("implausible OMT1 rank in " + path);
    h.shape.resize(rank);
    for (auto& e : h.shape) {
        e = std::size_t(get<std::uint64_t>(f, path));
        h.count *= e;
    }
    return h;
}

} // namespace omt1_detail

inline void write_sidecar(const std::string& path, const nlohmann::json& meta) {
    std::ofstream side(path + ".json");
    if (!side) throw std::runtime_error("cannot write sidecar for " + path);
    side << meta.dump(2) << "\n";
}

inline void write_omt1(const std::string& path, const RTensor& t,
                       const nlohmann::json& meta = nlohmann::json::object()) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    omt1_detail::write_header(f, 0, t.shape());
    f.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.size() * sizeof(double)));
    if (!f) throw std::runtime_error("short write: " + path);
    write_sidecar(path, meta);
}

inline void write_omt1(const std::string& path, const CTensor& t,
                       const nlohmann::json& meta = nlohmann::json::object()) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    omt1_detail::write_header(f, 1, t.shape());
    f.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.size() * sizeof(cdouble)));
    if (!f) throw std::runtime_error("short write: " + path);
    write_sidecar(path, meta);
}

/// dtype code without reading the payload: 0 real, 1 complex.
inline std::uint32_t omt1_dtype(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return omt1_detail::read_header(f, path).dtype;
}

inline RTensor read_omt1_real(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    auto h = omt1_detail::read_header(f, path);
    if (h.dtype != 0) throw std::runtime_error("expected real tensor in " + path);
    std::vector<double> data(h.count);
    f.read(reinterpret_cast<char*>(data.data()), std::streamsize(h.count * sizeof(double)));
    if (!f) throw std::runtime_error("truncated OMT1 payload: " + path);
    return RTensor(h.shape, std::move(data));
}

inline CTensor read_omt1_complex(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    auto h = omt1_detail::read_header(f, path);
    if (h.dtype != 1) throw std::runtime_error("expected complex tensor in " + path);
    std::vector<cdouble> data(h.count);
    f.read(reinterpret_cast<char*>(data.data()), std::streamsize(h.count * sizeof(cdouble)));
    if (!f) throw std::runtime_error("truncated OMT1 payload: " + path);
    return CTensor(h.shape, std::move(data));
}

/// Reads a complex tensor, promoting a real payload when found.
inline CTensor read_omt1_any_complex(const std::string& path) {
    if (omt1_dtype(path) == 0) return to_complex(read_omt1_real(path));
    return read_omt1_complex(path);
}

inline nlohmann::json read_sidecar(const std::string& path) {
    std::ifstream side(path + ".json");
    if (!side) return nlohmann::json::object();
    nlohmann::json j;
    side >> j;
    return j;
}

} // namespace omt
