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
#include "omt/cryo/neural_volume.hpp"
#include "omt/cryo/volume.hpp"
#include "omt/nn/adam.hpp"
#include "omt/nn/tape.hpp"

namespace omt {

/// Grid frequencies inside the bandlimit ball of an n^3 Fourier grid,
/// listed in storage order together with the involution that negates them.
struct BallGrid {
    RTensor points{{1, 3}, 0.0};       // [P,3] grid-unit frequencies
    std::vector<std::size_t> indices;  // flattened n^3 storage index per point
    std::vector<std::size_t> neg_perm; // list position of the negated point
};

inline BallGrid ball_grid(std::size_t n, double kmax) {
    if (n < 2) throw std::invalid_argument("ball grid: n must be >= 2");
    if (!(kmax > 0)) throw std::invalid_argument("ball grid: kmax must be positive");
    const double r2 = kmax * kmax * (1.0 + 1e-12) + 1e-12;
    std::vector<std::array<long, 3>> freqs;
    std::vector<std::size_t> indices;
    std::unordered_map<std::size_t, std::size_t> pos_of_index;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c) {
                const long ka = signed_freq_index(a, n);
                const long kb = signed_freq_index(b, n);
                const long kc = signed_freq_index(c, n);
                if (double(ka * ka + kb * kb + kc * kc) > r2) continue;
                const std::size_t flat = (a * n + b) * n + c;
                pos_of_index.emplace(flat, freqs.size());
                freqs.push_back({ka, kb, kc});
                indices.push_back(flat);
            }
    BallGrid g;
    g.points = RTensor({freqs.size(), 3});
    for (std::size_t i = 0; i < freqs.size(); ++i)
        for (std::size_t d = 0; d < 3; ++d) g.points.at2(i, d) = double(freqs[i][d]);
    g.indices = std::move(indices);
    g.neg_perm.resize(freqs.size());
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const std::size_t flat = g.indices[i];
        const std::size_t a = flat / (n * n);
        const std::size_t b = (flat / n) % n;
        const std::size_t c = flat % n;
        const std::size_t neg = (((n - a) % n) * n + (n - b) % n) * n + (n - c) % n;
        auto it = pos_of_index.find(neg);
        if (it == pos_of_index.end())
            throw std::logic_error("ball grid: negation left the ball");
        g.neg_perm[i] = it->second;
    }
    return g;
}

struct FitConfig {
    // (learning rate, epochs) stages, run in order with one Adam state
    std::vector<std::pair<double, std::size_t>> schedule = {{1e-2, 300}, {3e-3, 300},
                                                            {1e-3, 400}};
    std::size_t trace_every = 25;
};

struct FitResult {
    double final_loss = 0;    // mean squared complex residual on the ball
    double fourier_rel = 0;   // relative l2 error over the ball frequencies
    double real_rel = 0;      // relative error between rasterized volumes
    std::size_t epochs = 0;
    std::vector<std::array<double, 3>> trace; // epoch, lr, loss
};

/// Least-squares fit of a neural volume to Fourier values given on the full
/// n^3 grid (storage order). Only frequencies inside the bandlimit ball are
/// fitted; the reported real-space error compares full rasterizations, so
/// it also charges whatever target mass lies outside the ball.
inline FitResult fit_neural_gt(const CTensor& target, NeuralVolume& vol, const FitConfig& cfg) {
    if (target.rank() != 3 || target.extent(0) != target.extent(1) ||
        target.extent(1) != target.extent(2))
        throw std::invalid_argument("fit: target must be a cubic Fourier grid");
    if (vol.latent_width != 0)
        throw std::invalid_argument("fit: latent-conditioned volumes are not fit directly");
    const std::size_t n = target.extent(0);
    BallGrid ball = ball_grid(n, vol.kmax);
    const std::size_t P = ball.indices.size();

    CTensor tgt({P, 1});
    double tgt_norm2 = 0;
    for (std::size_t i = 0; i < P; ++i) {
        tgt[i] = target[ball.indices[i]];
        tgt_norm2 += std::norm(tgt[i]);
    }
    if (tgt_norm2 <= 1e-24)
        throw std::invalid_argument("fit: target has zero norm on the bandlimit ball");

    RTensor pe = positional_encoding(vol, ball.points);
    AdamState st = make_adam_state(vol.params);
    FitResult res;
    std::size_t epoch = 0;
    double loss_val = 0;
    for (const auto& [lr, steps] : cfg.schedule) {
        if (!(lr > 0)) throw std::invalid_argument("fit: learning rate must be positive");
        for (std::size_t s = 0; s < steps; ++s, ++epoch) {
            Tape t;
            std::vector<Var> pvars;
            CVar f = neural_volume_forward(t, vol, pe, ball.neg_perm, {}, nullptr, &pvars, true);
            CVar d = csub(t, f, cconst(t, tgt));
            Var loss = t.smul(cnorm2_sq(t, d), 1.0 / double(P));
            loss_val = t.value(loss)[0];
            if (!std::isfinite(loss_val))
                throw std::runtime_error("fit diverged: non-finite loss at epoch " +
                                         std::to_string(epoch));
            if (epoch % cfg.trace_every == 0) res.trace.push_back({double(epoch), lr, loss_val});
            t.backward(loss);
            std::vector<std::vector<double>> grads;
            grads.reserve(pvars.size());
            for (Var p : pvars) grads.push_back(t.grad(p));
            adam_step(vol.params, grads, st, lr);
        }
    }
    res.epochs = epoch;

    // final evaluation with the updated parameters
    std::vector<cdouble> fitted = eval_neural_volume(vol, ball.points);
    double num2 = 0;
    for (std::size_t i = 0; i < P; ++i) num2 += std::norm(fitted[i] - tgt[i]);
    res.final_loss = num2 / double(P);
    res.fourier_rel = std::sqrt(num2 / tgt_norm2);
    res.trace.push_back({double(epoch), 0.0, res.final_loss});

    CTensor fit_grid({n, n, n}, cdouble(0, 0));
    for (std::size_t i = 0; i < P; ++i) fit_grid[ball.indices[i]] = fitted[i];
    RTensor v_fit = rasterize_fourier(fit_grid);
    RTensor v_tgt = rasterize_fourier(target);
    double dnum = 0;
    double dden = 0;
    for (std::size_t i = 0; i < v_tgt.size(); ++i) {
        dnum += (v_fit[i] - v_tgt[i]) * (v_fit[i] - v_tgt[i]);
        dden += v_tgt[i] * v_tgt[i];
    }
    if (dden <= 1e-24) throw std::invalid_argument("fit: target volume has zero norm");
    res.real_rel = std::sqrt(dnum / dden);
    return res;
}

} // namespace omt
