#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omt/io/hash.hpp"
#include "omt/nn/layers.hpp"

namespace omt {

// Network parameter container, one file per parameter set:
//   magic "OMTP" | version u32 (= 1) | header length u64 | header JSON bytes
//   | tensor count u32 | tensors
// Each tensor: rank u32 | extents u64[rank] | float64 payload, row major,
// little endian. The header JSON carries the architecture description and
// the init seed, so a file is self-describing.

namespace omtp_detail {

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& off) {
    if (off + sizeof(T) > in.size()) throw std::runtime_error("parameter file truncated");
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

} // namespace omtp_detail

/// Serialize an architecture header plus parameter tensors to bytes.
inline std::string params_to_bytes(const nlohmann::json& arch, const NetworkParams& params) {
    using omtp_detail::put;
    nlohmann::json header = arch;
    header["init_seed"] = params.init_seed;
    std::string hj = header.dump();
    std::string out;
    out.append("OMTP", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, hj.size());
    out += hj;
    put<std::uint32_t>(out, std::uint32_t(params.tensors.size()));
    for (const RTensor& t : params.tensors) {
        put<std::uint32_t>(out, std::uint32_t(t.shape().size()));
        for (std::size_t e : t.shape()) put<std::uint64_t>(out, e);
        for (double v : t.raw()) put<double>(out, v);
    }
    return out;
}

struct LoadedParams {
    nlohmann::json arch;
    NetworkParams params;
};

inline LoadedParams params_from_bytes(const std::string& in) {
    using omtp_detail::get;
    std::size_t off = 0;
    if (in.size() < 4 || in.compare(0, 4, "OMTP") != 0)
        throw std::runtime_error("not a parameter file (bad magic)");
    off = 4;
    std::uint32_t version = get<std::uint32_t>(in, off);
    if (version != 1) throw std::runtime_error("unsupported parameter file version");
    std::uint64_t hlen = get<std::uint64_t>(in, off);
    if (off + hlen > in.size()) throw std::runtime_error("parameter file truncated");
    LoadedParams lp;
    lp.arch = nlohmann::json::parse(in.substr(off, hlen));
    off += hlen;
    lp.params.init_seed = lp.arch.value("init_seed", std::uint64_t(0));
    std::uint32_t count = get<std::uint32_t>(in, off);
    for (std::uint32_t k = 0; k < count; ++k) {
        std::uint32_t rank = get<std::uint32_t>(in, off);
        if (rank > 16) throw std::runtime_error("parameter tensor rank out of range");
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = std::size_t(get<std::uint64_t>(in, off));
        RTensor t(shape);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = get<double>(in, off);
        lp.params.tensors.push_back(std::move(t));
    }
    if (off != in.size()) throw std::runtime_error("parameter file has trailing bytes");
    return lp;
}

inline void save_params(const std::string& path, const nlohmann::json& arch,
                        const NetworkParams& params) {
    std::string bytes = params_to_bytes(arch, params);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline LoadedParams load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return params_from_bytes(bytes);
}

/// Content checksum over the full serialized form (header + tensors).
inline std::string params_checksum(const nlohmann::json& arch, const NetworkParams& params) {
    return sha256_hex(params_to_bytes(arch, params));
}

inline nlohmann::json chain_arch_json(const std::vector<LayerSpec>& layers,
                                      const std::vector<std::size_t>& in_shape) {
    nlohmann::json jl = nlohmann::json::array();
    for (const auto& s : layers) jl.push_back(layer_to_json(s));
    return nlohmann::json{{"type", "chain"}, {"layers", jl}, {"in_shape", in_shape}};
}

inline void save_network(const std::string& path, const Network& net) {
    save_params(path, chain_arch_json(net.layers, net.in_shape), net.params);
}

/// Rebuild a chain network from file.
inline Network load_network(const std::string& path) {
    LoadedParams lp = load_params(path);
    if (lp.arch.value("type", "") != "chain")
        throw std::runtime_error("parameter file does not hold a chain network");
    Network net;
    for (const auto& j : lp.arch.at("layers")) net.layers.push_back(layer_from_json(j));
    net.in_shape = lp.arch.at("in_shape").get<std::vector<std::size_t>>();
    net.params = std::move(lp.params);
    // Validate tensor shapes against the declared architecture.
    std::vector<RTensor> expect;
    std::vector<std::size_t> shape = net.in_shape;
    SeededRng rng(0, "shape-check");
    std::uint64_t slot = 0;
    append_chain_params(expect, net.layers, shape, rng, slot);
    if (expect.size() != net.params.tensors.size())
        throw std::runtime_error("parameter file shape mismatch: tensor count");
    for (std::size_t k = 0; k < expect.size(); ++k)
        if (expect[k].shape() != net.params.tensors[k].shape())
            throw std::runtime_error("parameter file shape mismatch: tensor " +
                                     std::to_string(k));
    return net;
}

/// Load parameters into an existing network, requiring identical shapes.
inline void load_params_into(const std::string& path, Network& net) {
    Network loaded = load_network(path);
    if (loaded.layers.size() != net.layers.size() || loaded.in_shape != net.in_shape)
        throw std::runtime_error("parameter file shape mismatch: architecture differs");
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const LayerSpec &a = loaded.layers[k], &b = net.layers[k];
        if (a.kind != b.kind || a.window != b.window || a.channels != b.channels ||
            a.width != b.width || a.stride != b.stride)
            throw std::runtime_error("parameter file shape mismatch: layer " + std::to_string(k));
    }
    net.params = std::move(loaded.params);
}

} // namespace omt
