#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "omt/core/rng.hpp"
#include "omt/core/tensor.hpp"
#include "omt/cryo/moments2d.hpp"
#include "omt/cryo/quad_moments.hpp"
#include "omt/nn/layers.hpp"
#include "omt/nn/serialize.hpp"
#include "omt/nn/tape.hpp"

namespace omt {

/// Maps a pair of image moments to a density over quadrature rotations
/// (and, optionally, a latent conditioning vector). Two convolutional
/// branches read the first and second moment as two-plane (real,
/// imaginary) images; a fully connected head mixes the flattened branch
/// outputs. The softmax that turns head logits into a density lives in
/// the forward helpers, not in the layer list.
struct CryoEncoder {
    std::size_t n = 0;            // pixel grid edge
    std::size_t q = 0;            // quadrature size (density width)
    std::size_t latent_width = 0; // 0 disables the latent head
    std::vector<LayerSpec> branch_m1;
    std::vector<LayerSpec> branch_m2;
    std::vector<LayerSpec> head;
    NetworkParams params; // branch_m1, branch_m2, head tensors in order

    std::size_t head_width() const { return q + latent_width; }
};

namespace cryo_detail {

/// Smallest stride >= 2 dividing n whose quotient is at most `bound`
/// (identity when n already fits; n itself when nothing smaller divides).
inline std::size_t stride_for(std::size_t n, std::size_t bound) {
    if (n <= bound) return 1;
    for (std::size_t s = 2; s < n; ++s)
        if (n % s == 0 && n / s <= bound) return s;
    return n;
}

/// Stride plan reducing extent e to at most `bound` over `stages` strided
/// convolutions, spreading the reduction roughly evenly.
inline std::vector<std::size_t> stride_plan(std::size_t e, std::size_t stages,
                                            std::size_t bound) {
    std::vector<std::size_t> plan;
    for (std::size_t left = stages; left > 0; --left) {
        if (e <= bound) {
            plan.push_back(1);
            continue;
        }
        const double target = std::ceil(std::pow(double(e) / double(bound), 1.0 / double(left)));
        std::size_t pick = e;
        for (std::size_t s = std::size_t(target); s < e; ++s)
            if (e % s == 0) {
                pick = s;
                break;
            }
        plan.push_back(pick);
        e /= pick;
    }
    return plan;
}

} // namespace cryo_detail

inline CryoEncoder build_cryo_encoder(std::size_t n, std::size_t q, std::uint64_t seed,
                                      std::size_t latent_width = 0) {
    if (n < 5) throw std::invalid_argument("cryo encoder: grid edge must be >= 5");
    if (q < 1) throw std::invalid_argument("cryo encoder: empty quadrature");
    const std::size_t n2 = n * n;
    // documented limit: the second-moment input plane pair must stay under 2 GB
    if (2.0 * double(n2) * double(n2) * 8.0 > 2.0 * 1024.0 * 1024.0 * 1024.0)
        throw std::invalid_argument(
            "cryo encoder: second-moment branch exceeds the 2 GB activation bound");

    CryoEncoder enc;
    enc.n = n;
    enc.q = q;
    enc.latent_width = latent_width;

    const std::size_t s1 = cryo_detail::stride_for(n, 7);
    enc.branch_m1 = {LayerSpec::conv2(5, 8),     LayerSpec::act_lrelu(),
                     LayerSpec::conv2(5, 8),     LayerSpec::act_lrelu(),
                     LayerSpec::conv2(5, 8, s1), LayerSpec::act_lrelu()};

    const std::vector<std::size_t> plan = cryo_detail::stride_plan(n2, 3, 7);
    enc.branch_m2 = {LayerSpec::conv2(5, 4, plan[0]), LayerSpec::act_lrelu(),
                     LayerSpec::conv2(5, 8, plan[1]), LayerSpec::act_lrelu(),
                     LayerSpec::conv2(5, 8, plan[2]), LayerSpec::act_lrelu()};

    auto flat_width = [](const std::vector<LayerSpec>& layers, std::vector<std::size_t> s) {
        for (const auto& l : layers) s = layer_output_shape(l, s);
        std::size_t f = 1;
        for (std::size_t d : s) f *= d;
        return f;
    };
    const std::size_t f1 = flat_width(enc.branch_m1, {2, n, n});
    const std::size_t f2 = flat_width(enc.branch_m2, {2, n2, n2});
    enc.head = {LayerSpec::full(128), LayerSpec::act_lrelu(),
                LayerSpec::full(enc.head_width()), LayerSpec::act_linear()};

    enc.params.init_seed = seed;
    SeededRng rng(seed, "glorot-init");
    std::uint64_t slot = 0;
    std::vector<std::size_t> shape{2, n, n};
    append_chain_params(enc.params.tensors, enc.branch_m1, shape, rng, slot);
    shape = {2, n2, n2};
    append_chain_params(enc.params.tensors, enc.branch_m2, shape, rng, slot);
    shape = {f1 + f2};
    append_chain_params(enc.params.tensors, enc.head, shape, rng, slot);
    return enc;
}

/// Real/imaginary plane packing of a first moment into a [1,2,n,n] input.
/// When the moment was restricted to a frequency mask, pass the mask
/// indices; unlisted entries become zero.
inline RTensor pack_cryo_m1(const CTensor& m1, std::size_t n,
                            const std::vector<std::size_t>& indices = {}) {
    const std::size_t n2 = n * n;
    RTensor out({1, 2, n, n}, 0.0);
    if (indices.empty()) {
        if (m1.size() != n2) throw std::invalid_argument("pack: first moment size mismatch");
        for (std::size_t p = 0; p < n2; ++p) {
            out[p] = m1[p].real();
            out[n2 + p] = m1[p].imag();
        }
        return out;
    }
    if (m1.size() != indices.size())
        throw std::invalid_argument("pack: first moment size mismatch");
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= n2) throw std::invalid_argument("pack: index out of range");
        out[indices[i]] = m1[i].real();
        out[n2 + indices[i]] = m1[i].imag();
    }
    return out;
}

/// Same packing for a second moment, into [1,2,n^2,n^2].
inline RTensor pack_cryo_m2(const CTensor& m2, std::size_t n,
                            const std::vector<std::size_t>& indices = {}) {
    const std::size_t n2 = n * n;
    RTensor out({1, 2, n2, n2}, 0.0);
    const std::size_t plane = n2 * n2;
    if (indices.empty()) {
        if (m2.rank() != 2 || m2.extent(0) != n2 || m2.extent(1) != n2)
            throw std::invalid_argument("pack: second moment size mismatch");
        for (std::size_t p = 0; p < plane; ++p) {
            out[p] = m2[p].real();
            out[plane + p] = m2[p].imag();
        }
        return out;
    }
    if (m2.rank() != 2 || m2.extent(0) != indices.size() || m2.extent(1) != indices.size())
        throw std::invalid_argument("pack: second moment size mismatch");
    for (std::size_t r = 0; r < indices.size(); ++r)
        for (std::size_t c = 0; c < indices.size(); ++c) {
            if (indices[r] >= n2 || indices[c] >= n2)
                throw std::invalid_argument("pack: index out of range");
            const std::size_t p = indices[r] * n2 + indices[c];
            out[p] = m2.at2(r, c).real();
            out[plane + p] = m2.at2(r, c).imag();
        }
    return out;
}

struct CryoEncoderVars {
    Var z;      // [1, q] density over rotations (softmax applied)
    Var latent; // [latent_width] raw head tail; unset when disabled
};

/// Single-instance forward pass: inputs are [1,2,n,n] and [1,2,n^2,n^2].
inline CryoEncoderVars cryo_encoder_forward(Tape& t, const CryoEncoder& enc, Var m1_in,
                                            Var m2_in, std::vector<Var>* param_vars,
                                            bool params_need_grad) {
    std::size_t cursor = 0;
    Var h1 = chain_forward(t, enc.branch_m1, m1_in, enc.params.tensors, cursor, param_vars,
                           params_need_grad);
    Var h2 = chain_forward(t, enc.branch_m2, m2_in, enc.params.tensors, cursor, param_vars,
                           params_need_grad);
    const std::size_t f1 = t.value(h1).size();
    const std::size_t f2 = t.value(h2).size();
    Var cat = t.reshape(t.concat1({t.reshape(h1, {1, f1, 1}), t.reshape(h2, {1, f2, 1})}),
                        {1, f1 + f2});
    Var out = chain_forward(t, enc.head, cat, enc.params.tensors, cursor, param_vars,
                            params_need_grad);
    if (cursor != enc.params.tensors.size())
        throw std::invalid_argument("cryo encoder has unused parameter tensors");
    Var flat = t.reshape(out, {enc.head_width()});
    CryoEncoderVars res;
    res.z = t.softmax_rows(t.reshape(t.slice0(flat, 0, enc.q), {1, enc.q}));
    if (enc.latent_width > 0) res.latent = t.slice0(flat, enc.q, enc.head_width());
    return res;
}

struct CryoEncoderEval {
    QuadratureDensity z;
    std::vector<double> latent;
};

/// Tape-free convenience evaluation of one moment pair.
inline CryoEncoderEval cryo_encoder_eval(const CryoEncoder& enc, const CryoMomentPair& mp,
                                         const std::vector<std::size_t>& mask_indices = {}) {
    Tape t;
    Var m1 = t.leaf(pack_cryo_m1(mp.m1, enc.n, mask_indices), false);
    Var m2 = t.leaf(pack_cryo_m2(mp.m2, enc.n, mask_indices), false);
    CryoEncoderVars v = cryo_encoder_forward(t, enc, m1, m2, nullptr, false);
    CryoEncoderEval out;
    out.z.mass = t.value(v.z);
    if (enc.latent_width > 0) out.latent = t.value(v.latent);
    return out;
}

// ---- serialization --------------------------------------------------------

inline nlohmann::json cryo_encoder_arch_json(const CryoEncoder& enc) {
    auto chain = [](const std::vector<LayerSpec>& layers) {
        nlohmann::json jl = nlohmann::json::array();
        for (const auto& s : layers) jl.push_back(layer_to_json(s));
        return jl;
    };
    return nlohmann::json{{"type", "cryo_encoder"},
                          {"n", enc.n},
                          {"q", enc.q},
                          {"latent_width", enc.latent_width},
                          {"branch_m1", chain(enc.branch_m1)},
                          {"branch_m2", chain(enc.branch_m2)},
                          {"head", chain(enc.head)}};
}

inline void save_cryo_encoder(const std::string& path, const CryoEncoder& enc) {
    save_params(path, cryo_encoder_arch_json(enc), enc.params);
}

inline CryoEncoder load_cryo_encoder(const std::string& path) {
    LoadedParams lp = load_params(path);
    if (lp.arch.value("type", "") != "cryo_encoder")
        throw std::runtime_error("parameter file does not hold a cryo encoder");
    CryoEncoder enc;
    enc.n = lp.arch.at("n").get<std::size_t>();
    enc.q = lp.arch.at("q").get<std::size_t>();
    enc.latent_width = lp.arch.at("latent_width").get<std::size_t>();
    for (const auto& j : lp.arch.at("branch_m1")) enc.branch_m1.push_back(layer_from_json(j));
    for (const auto& j : lp.arch.at("branch_m2")) enc.branch_m2.push_back(layer_from_json(j));
    for (const auto& j : lp.arch.at("head")) enc.head.push_back(layer_from_json(j));
    std::vector<RTensor> expect;
    SeededRng rng(0, "shape-check");
    std::uint64_t slot = 0;
    std::vector<std::size_t> shape{2, enc.n, enc.n};
    append_chain_params(expect, enc.branch_m1, shape, rng, slot);
    shape = {2, enc.n * enc.n, enc.n * enc.n};
    append_chain_params(expect, enc.branch_m2, shape, rng, slot);
    std::size_t f1 = 1;
    {
        std::vector<std::size_t> s{2, enc.n, enc.n};
        for (const auto& l : enc.branch_m1) s = layer_output_shape(l, s);
        f1 = 1;
        for (std::size_t d : s) f1 *= d;
    }
    std::size_t f2 = 1;
    {
        std::vector<std::size_t> s{2, enc.n * enc.n, enc.n * enc.n};
        for (const auto& l : enc.branch_m2) s = layer_output_shape(l, s);
        f2 = 1;
        for (std::size_t d : s) f2 *= d;
    }
    shape = {f1 + f2};
    append_chain_params(expect, enc.head, shape, rng, slot);
    if (expect.size() != lp.params.tensors.size())
        throw std::runtime_error("parameter file shape mismatch: tensor count");
    for (std::size_t k = 0; k < expect.size(); ++k)
        if (expect[k].shape() != lp.params.tensors[k].shape())
            throw std::runtime_error("parameter file shape mismatch: tensor " +
                                     std::to_string(k));
    enc.params = std::move(lp.params);
    return enc;
}

} // namespace omt
