#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "omt/core/tensor.hpp"
#include "omt/mra/moments.hpp"
#include "omt/nn/layers.hpp"
#include "omt/nn/serialize.hpp"
#include "omt/nn/tape.hpp"

namespace omt {

// Moment-pair encoder for the circular model. Two convolutional branches
// ingest the first and second moment (complex entries as doubled real
// channels), their features are channel-stacked and merged, and a dense head
// emits either a density estimate z_rho (width n) or a spectrum estimate z_v
// (width 2n, packed re then im).
//
// Input packing:
//   m1 in C^n      -> [2, n]   channel 0 = re, channel 1 = im
//   m2 in C^{n x n}-> [2n, n]  channel a = re of row a, channel n+a = im

struct EncoderArch {
    std::vector<LayerSpec> branch_m1;
    std::vector<LayerSpec> branch_m2;
    std::vector<LayerSpec> merged;
    std::vector<LayerSpec> head;
};

struct MraEncoder {
    enum class Head { rho, v };

    std::size_t n = 0;
    Head head = Head::rho;
    EncoderArch arch;
    NetworkParams params; // branch_m1, branch_m2, merged, head tensors in order
};

inline EncoderArch default_encoder_arch(std::size_t n, MraEncoder::Head head) {
    EncoderArch a;
    a.branch_m1 = {LayerSpec::conv1d(5, 8),  LayerSpec::act_lrelu(),
                   LayerSpec::conv1d(5, 8),  LayerSpec::act_lrelu(),
                   LayerSpec::conv1d(5, 3),  LayerSpec::act_lrelu()};
    a.branch_m2 = {LayerSpec::conv1d(5, 32), LayerSpec::act_lrelu(),
                   LayerSpec::conv1d(5, 16), LayerSpec::act_lrelu(),
                   LayerSpec::conv1d(5, 3),  LayerSpec::act_lrelu()};
    a.merged = {LayerSpec::conv1d(5, 8), LayerSpec::act_lrelu(), LayerSpec::conv1d(5, 8),
                LayerSpec::act_lrelu()};
    std::size_t out = head == MraEncoder::Head::rho ? n : 2 * n;
    a.head = {LayerSpec::full(2 * n), LayerSpec::act_lrelu(), LayerSpec::full(out),
              LayerSpec::act_linear()};
    return a;
}

inline std::size_t encoder_output_width(const MraEncoder& enc) {
    return enc.head == MraEncoder::Head::rho ? enc.n : 2 * enc.n;
}

/// Validate chain compatibility and report the merged-stage channel count.
inline void validate_encoder_arch(std::size_t n, MraEncoder::Head head, const EncoderArch& a) {
    if (n < 3) throw std::invalid_argument("encoder: n must be >= 3");
    auto s1 = chain_output_shape(a.branch_m1, {2, n});
    auto s2 = chain_output_shape(a.branch_m2, {2 * n, n});
    if (s1.size() != 2 || s2.size() != 2 || s1[1] != n || s2[1] != n)
        throw std::invalid_argument("encoder: branches must keep the n-point field layout");
    std::size_t stacked = s1[0] + s2[0];
    if (stacked != 6)
        throw std::invalid_argument("encoder: branch stacking must produce 6 channels");
    auto sm = chain_output_shape(a.merged, {stacked, n});
    auto sh = chain_output_shape(a.head, sm);
    std::size_t want = head == MraEncoder::Head::rho ? n : 2 * n;
    if (sh.size() != 1 || sh[0] != want)
        throw std::invalid_argument("encoder: head output width inconsistent with head kind");
}

inline MraEncoder build_mra_encoder(std::size_t n, MraEncoder::Head head, const EncoderArch& arch,
                                    std::uint64_t init_seed) {
    validate_encoder_arch(n, head, arch);
    MraEncoder enc;
    enc.n = n;
    enc.head = head;
    enc.arch = arch;
    enc.params.init_seed = init_seed;
    SeededRng rng(init_seed, "glorot-init");
    std::uint64_t slot = 0;
    std::vector<std::size_t> shape{2, n};
    append_chain_params(enc.params.tensors, arch.branch_m1, shape, rng, slot);
    shape = {2 * n, n};
    append_chain_params(enc.params.tensors, arch.branch_m2, shape, rng, slot);
    auto s1 = chain_output_shape(arch.branch_m1, {2, n});
    auto s2 = chain_output_shape(arch.branch_m2, {2 * n, n});
    shape = {s1[0] + s2[0], n};
    append_chain_params(enc.params.tensors, arch.merged, shape, rng, slot);
    append_chain_params(enc.params.tensors, arch.head, shape, rng, slot);
    return enc;
}

inline MraEncoder build_mra_encoder(std::size_t n, MraEncoder::Head head,
                                    std::uint64_t init_seed) {
    return build_mra_encoder(n, head, default_encoder_arch(n, head), init_seed);
}

/// Batched forward: m1 is [B,2,n], m2 is [B,2n,n]; output [B, head width].
inline Var mra_encoder_forward(Tape& t, const MraEncoder& enc, Var m1, Var m2,
                               std::vector<Var>* param_vars, bool params_need_grad) {
    std::size_t cursor = 0;
    Var a = chain_forward(t, enc.arch.branch_m1, m1, enc.params.tensors, cursor, param_vars,
                          params_need_grad);
    Var b = chain_forward(t, enc.arch.branch_m2, m2, enc.params.tensors, cursor, param_vars,
                          params_need_grad);
    Var c = t.concat1({a, b});
    Var d = chain_forward(t, enc.arch.merged, c, enc.params.tensors, cursor, param_vars,
                          params_need_grad);
    Var e = chain_forward(t, enc.arch.head, d, enc.params.tensors, cursor, param_vars,
                          params_need_grad);
    if (cursor != enc.params.tensors.size())
        throw std::invalid_argument("encoder has unused parameter tensors");
    return e;
}

inline RTensor pack_m1(const CTensor& m1) {
    if (m1.shape().size() != 1) throw std::invalid_argument("pack_m1: m1 must be rank 1");
    const std::size_t n = m1.extent(0);
    RTensor out({2, n});
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = m1[i].real();
        out[n + i] = m1[i].imag();
    }
    return out;
}

inline RTensor pack_m2(const CTensor& m2) {
    if (m2.shape().size() != 2 || m2.extent(0) != m2.extent(1))
        throw std::invalid_argument("pack_m2: m2 must be square");
    const std::size_t n = m2.extent(0);
    RTensor out({2 * n, n});
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            out[a * n + b] = m2.at2(a, b).real();
            out[(n + a) * n + b] = m2.at2(a, b).imag();
        }
    return out;
}

/// Decode a v-head output row (length 2n, re then im) into a spectrum.
inline std::vector<cdouble> unpack_v(const double* row, std::size_t n) {
    std::vector<cdouble> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = cdouble(row[i], row[n + i]);
    return z;
}

/// Plain (no-gradient) batched evaluation; rows of the result are head
/// outputs. m1b is [B,2,n], m2b is [B,2n,n].
inline RTensor mra_encoder_eval(const MraEncoder& enc, const RTensor& m1b, const RTensor& m2b) {
    Tape t;
    Var x1 = t.leaf(m1b, false);
    Var x2 = t.leaf(m2b, false);
    Var y = mra_encoder_forward(t, enc, x1, x2, nullptr, false);
    RTensor out(t.shape(y));
    const auto& v = t.value(y);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i];
    return out;
}

inline nlohmann::json encoder_arch_json(const MraEncoder& enc) {
    auto chain = [](const std::vector<LayerSpec>& layers) {
        nlohmann::json jl = nlohmann::json::array();
        for (const auto& s : layers) jl.push_back(layer_to_json(s));
        return jl;
    };
    return nlohmann::json{{"type", "mra_encoder"},
                          {"n", enc.n},
                          {"head", enc.head == MraEncoder::Head::rho ? "rho" : "v"},
                          {"branch_m1", chain(enc.arch.branch_m1)},
                          {"branch_m2", chain(enc.arch.branch_m2)},
                          {"merged", chain(enc.arch.merged)},
                          {"head_chain", chain(enc.arch.head)}};
}

inline void save_mra_encoder(const std::string& path, const MraEncoder& enc) {
    save_params(path, encoder_arch_json(enc), enc.params);
}

inline MraEncoder load_mra_encoder(const std::string& path) {
    LoadedParams lp = load_params(path);
    if (lp.arch.value("type", "") != "mra_encoder")
        throw std::runtime_error("parameter file does not hold a moment encoder");
    auto chain = [](const nlohmann::json& jl) {
        std::vector<LayerSpec> layers;
        for (const auto& j : jl) layers.push_back(layer_from_json(j));
        return layers;
    };
    MraEncoder enc;
    enc.n = lp.arch.at("n").get<std::size_t>();
    enc.head = lp.arch.at("head").get<std::string>() == "rho" ? MraEncoder::Head::rho
                                                              : MraEncoder::Head::v;
    enc.arch.branch_m1 = chain(lp.arch.at("branch_m1"));
    enc.arch.branch_m2 = chain(lp.arch.at("branch_m2"));
    enc.arch.merged = chain(lp.arch.at("merged"));
    enc.arch.head = chain(lp.arch.at("head_chain"));
    validate_encoder_arch(enc.n, enc.head, enc.arch);
    // Shape-check the stored tensors against a fresh construction.
    MraEncoder fresh = build_mra_encoder(enc.n, enc.head, enc.arch, 0);
    if (fresh.params.tensors.size() != lp.params.tensors.size())
        throw std::runtime_error("parameter file shape mismatch: tensor count");
    for (std::size_t k = 0; k < fresh.params.tensors.size(); ++k)
        if (fresh.params.tensors[k].shape() != lp.params.tensors[k].shape())
            throw std::runtime_error("parameter file shape mismatch: tensor " +
                                     std::to_string(k));
    enc.params = std::move(lp.params);
    return enc;
}

} // namespace omt
