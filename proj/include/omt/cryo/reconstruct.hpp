#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "omt/core/tensor.hpp"
#include "omt/cryo/encoder2d.hpp"
#include "omt/cryo/fit_volume.hpp"
#include "omt/cryo/moments2d.hpp"
#include "omt/cryo/neural_volume.hpp"
#include "omt/cryo/quad_moments.hpp"
#include "omt/cryo/quadrature.hpp"
#include "omt/cryo/slice.hpp"
#include "omt/nn/adam.hpp"
#include "omt/nn/tape.hpp"

namespace omt {

struct CryoReconConfig {
    QuadratureSet quadrature; // rotation atoms carrying the density
    double lambda = 1.0;      // weight of the second-moment term
    // (learning rate, epochs) stages, run in order with persistent Adam state
    std::vector<std::pair<double, std::size_t>> schedule = {{1e-3, 2000}, {1e-4, 1000}};
    bool use_latent = false;        // feed an encoder latent into the volume
    std::size_t latent_width = 16;
    bool normalize_terms = false;   // divide each term by its target norm
    bool bandlimit_mask = false;    // moments restricted to the resolved disk
    std::size_t trace_every = 10;
    std::uint64_t seed = 0;         // volume init; encoder uses seed + 1
    double stagnation_tol = 1e-6;   // relative decrease per window
    std::size_t stagnation_window = 1000;
    std::size_t octaves = 8;        // neural volume hyperparameters
    std::size_t hidden = 64;
};

struct CryoReconResult {
    NeuralVolume volume;
    CryoEncoder encoder;
    QuadratureDensity z; // final density over the quadrature rotations
    std::vector<double> latent;
    double initial_loss = 0;
    double final_loss = 0;
    double m1_rel = 0; // final relative first-moment error
    double m2_rel = 0; // final relative second-moment error
    bool stagnated = false;
    std::size_t stagnation_epoch = 0;
    std::size_t epochs = 0;
    std::vector<std::array<double, 5>> trace; // epoch, lr, loss, m1_rel, m2_rel
};

namespace cryo_detail {

/// Stacked slice-grid frequencies for every quadrature rotation, optionally
/// restricted to a frequency mask, plus the row involution that negates
/// each point. Mask indices follow the layout of mask_moments.
struct ReconPoints {
    RTensor points{{1, 3}, 0.0};
    std::vector<std::size_t> neg_perm;
    std::size_t width = 0; // entries per rotation
};

inline ReconPoints recon_points(const QuadratureSet& quad, std::size_t n,
                                const std::vector<std::size_t>& mask) {
    const std::size_t n2 = n * n;
    std::vector<std::size_t> cols = mask;
    if (cols.empty()) {
        cols.resize(n2);
        for (std::size_t i = 0; i < n2; ++i) cols[i] = i;
    }
    std::unordered_map<std::size_t, std::size_t> pos;
    for (std::size_t i = 0; i < cols.size(); ++i) pos.emplace(cols[i], i);
    const std::size_t w = cols.size();
    const std::size_t J = quad.size();
    ReconPoints rp;
    rp.width = w;
    rp.points = RTensor({J * w, 3});
    rp.neg_perm.resize(J * w);
    for (std::size_t j = 0; j < J; ++j) {
        RTensor full = slice_points(quad.rotations[j], n);
        for (std::size_t i = 0; i < w; ++i) {
            const std::size_t flat = cols[i];
            for (std::size_t d = 0; d < 3; ++d)
                rp.points.at2(j * w + i, d) = full.at2(flat, d);
            const std::size_t a = flat / n;
            const std::size_t b = flat % n;
            const std::size_t neg = ((n - a) % n) * n + (n - b) % n;
            auto it = pos.find(neg);
            if (it == pos.end())
                throw std::logic_error("reconstruct: mask not closed under negation");
            rp.neg_perm[j * w + i] = j * w + it->second;
        }
    }
    return rp;
}

} // namespace cryo_detail

/// Joint moment matching: fits a neural volume and an encoder-produced
/// density over the quadrature rotations so that the model's first two
/// image moments match the given targets. The encoder always reads the
/// fixed target moments, so the density moves only through its weights.
inline CryoReconResult reconstruct(const CryoMomentPair& mhat, const CryoReconConfig& cfg,
                                   const NeuralVolume* warm_volume = nullptr,
                                   const CryoEncoder* warm_encoder = nullptr) {
    if (!(cfg.lambda >= 0))
        throw std::invalid_argument("reconstruct: lambda must be nonnegative");
    if (cfg.quadrature.size() == 0)
        throw std::invalid_argument("reconstruct: empty quadrature");
    const std::size_t n = mhat.n;
    if (n < 5) throw std::invalid_argument("reconstruct: grid edge must be >= 5");

    std::vector<std::size_t> mask;
    if (cfg.bandlimit_mask) mask = bandlimit_indices(n);
    const std::size_t w = cfg.bandlimit_mask ? mask.size() : n * n;
    if (mhat.m1.size() != w || mhat.m2.rank() != 2 || mhat.m2.extent(0) != w ||
        mhat.m2.extent(1) != w)
        throw std::invalid_argument("reconstruct: moment dimensions do not match the grid");

    const std::size_t J = cfg.quadrature.size();
    const std::size_t vol_latent = cfg.use_latent ? cfg.latent_width : 0;

    NeuralVolume vol = warm_volume
                           ? *warm_volume
                           : make_neural_volume(double(n) / 2.0, cfg.seed, vol_latent,
                                                cfg.octaves, cfg.hidden);
    if (vol.latent_width != vol_latent)
        throw std::invalid_argument("reconstruct: volume latent width does not match config");
    CryoEncoder enc =
        warm_encoder ? *warm_encoder : build_cryo_encoder(n, J, cfg.seed + 1, vol_latent);
    if (enc.n != n || enc.q != J || enc.latent_width != vol_latent)
        throw std::invalid_argument("reconstruct: encoder does not match config");

    cryo_detail::ReconPoints rp = cryo_detail::recon_points(cfg.quadrature, n, mask);
    const RTensor pe = positional_encoding(vol, rp.points);
    const std::vector<double> ballmask = bandlimit_mask_values(vol, rp.points);
    const RTensor m1_packed = pack_cryo_m1(mhat.m1, n, mask);
    const RTensor m2_packed = pack_cryo_m2(mhat.m2, n, mask);

    CTensor m1_row({1, w});
    for (std::size_t i = 0; i < w; ++i) m1_row[i] = mhat.m1[i];
    CTensor m2_conj({w, w});
    for (std::size_t i = 0; i < w * w; ++i) m2_conj[i] = std::conj(mhat.m2[i]);
    double norm1 = 0, norm2 = 0;
    for (std::size_t i = 0; i < w; ++i) norm1 += std::norm(m1_row[i]);
    for (std::size_t i = 0; i < w * w; ++i) norm2 += std::norm(m2_conj[i]);
    norm1 = std::sqrt(norm1);
    norm2 = std::sqrt(norm2);
    const double scale1 = cfg.normalize_terms && norm1 > 1e-12 ? 1.0 / norm1 : 1.0;
    const double scale2 = cfg.normalize_terms && norm2 > 1e-12 ? 1.0 / norm2 : 1.0;

    AdamState st_enc = make_adam_state(enc.params);
    AdamState st_vol = make_adam_state(vol.params);
    CryoReconResult res;

    struct PassOut {
        double loss = 0, r1 = 0, r2 = 0;
        std::vector<double> z, latent;
    };
    // one full forward pass; with train=true also applies an Adam update
    auto pass = [&](double lr, bool train) {
        Tape t;
        std::vector<Var> pv_enc, pv_vol;
        Var m1_in = t.leaf(m1_packed, false);
        Var m2_in = t.leaf(m2_packed, false);
        CryoEncoderVars ev = cryo_encoder_forward(t, enc, m1_in, m2_in,
                                                  train ? &pv_enc : nullptr, train);
        const Var* latptr = vol_latent > 0 ? &ev.latent : nullptr;
        CVar vals = neural_volume_forward(t, vol, pe, rp.neg_perm, ballmask, latptr,
                                          train ? &pv_vol : nullptr, train);
        CVar S = creshape(t, vals, {J, w});
        Var zvec = t.reshape(ev.z, {J});
        CVar m1m = {t.matmul(ev.z, S.re), t.matmul(ev.z, S.im)};
        CVar W = {t.rowscale(S.re, zvec), t.rowscale(S.im, zvec)};
        CVar m2m = cmatmul(t, ctranspose_conj(t, S), W); // holds conj(model m2)
        Var q1 = cnorm2_sq(t, csub(t, m1m, cconst(t, m1_row)));
        Var q2 = cnorm2_sq(t, csub(t, m2m, cconst(t, m2_conj)));
        Var loss = t.add(t.smul(t.sqrt_eps(q1, 1e-12), scale1),
                         t.smul(t.smul(t.sqrt_eps(q2, 1e-12), scale2), cfg.lambda));
        PassOut out;
        out.loss = t.value(loss)[0];
        out.r1 = norm1 > 1e-12 ? std::sqrt(t.value(q1)[0]) / norm1 : std::sqrt(t.value(q1)[0]);
        out.r2 = norm2 > 1e-12 ? std::sqrt(t.value(q2)[0]) / norm2 : std::sqrt(t.value(q2)[0]);
        out.z = t.value(ev.z);
        if (vol_latent > 0) out.latent = t.value(ev.latent);
        if (!std::isfinite(out.loss))
            throw std::runtime_error("reconstruct: non-finite loss at epoch " +
                                     std::to_string(res.epochs));
        if (train) {
            t.backward(loss);
            std::vector<std::vector<double>> g_enc, g_vol;
            g_enc.reserve(pv_enc.size());
            for (Var p : pv_enc) g_enc.push_back(t.grad(p));
            g_vol.reserve(pv_vol.size());
            for (Var p : pv_vol) g_vol.push_back(t.grad(p));
            adam_step(enc.params, g_enc, st_enc, lr);
            adam_step(vol.params, g_vol, st_vol, lr);
        }
        return out;
    };

    std::vector<double> history;
    bool first = true;
    for (const auto& [lr, steps] : cfg.schedule) {
        if (!(lr > 0))
            throw std::invalid_argument("reconstruct: learning rate must be positive");
        for (std::size_t s = 0; s < steps; ++s) {
            PassOut out = pass(lr, true);
            if (first) {
                res.initial_loss = out.loss;
                first = false;
            }
            if (res.epochs % cfg.trace_every == 0)
                res.trace.push_back({double(res.epochs), lr, out.loss, out.r1, out.r2});
            history.push_back(out.loss);
            if (!res.stagnated && history.size() > cfg.stagnation_window) {
                const double prev = history[history.size() - 1 - cfg.stagnation_window];
                if (prev - out.loss < cfg.stagnation_tol * std::max(std::abs(prev), 1e-30)) {
                    res.stagnated = true;
                    res.stagnation_epoch = res.epochs;
                }
            }
            res.epochs += 1;
        }
    }

    PassOut fin = pass(0.0, false);
    res.final_loss = fin.loss;
    res.m1_rel = fin.r1;
    res.m2_rel = fin.r2;
    res.z.mass = fin.z;
    res.latent = fin.latent;
    res.trace.push_back({double(res.epochs), 0.0, fin.loss, fin.r1, fin.r2});
    res.volume = std::move(vol);
    res.encoder = std::move(enc);
    return res;
}

} // namespace omt
