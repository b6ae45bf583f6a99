#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "omt/io/csv.hpp"
#include "omt/mra/metrics.hpp"
#include "omt/mra_enc/encoder.hpp"
#include "omt/mra_enc/latents.hpp"
#include "omt/nn/adam.hpp"

namespace omt {

// Moment-matching refinement: keep feeding the observed pair (m1, m2)
// through both encoder heads, and descend the reconstruction loss through
// the latents back into the encoder parameters. The joint-shift alignment
// between the two heads is resolved once, from the initial outputs, and the
// winning shift is kept fixed (it is a constant modulation/permutation, so
// gradients pass through unchanged).

struct ReconConfig {
    double lambda = 1.0; // second-moment weight in the loss
    std::vector<std::pair<double, std::size_t>> lr_schedule = {{1e-4, 3000}};
    bool project_density = true;
    bool align = true;
    std::size_t trace_every = 10;
};

struct RefineResult {
    std::vector<cdouble> z_v;  // final spectrum estimate (aligned frame)
    std::vector<double> z_rho; // final density estimate (projected if enabled)
    std::size_t shift = 0;     // alignment shift applied to the raw head outputs
    double initial_loss = 0;
    double final_loss = 0;
    CsvTable trace; // iteration, loss, m1/m2 rel err, signal/density rel err
};

namespace refine_detail {

struct RawLatents {
    std::vector<cdouble> z_v;
    std::vector<double> z_rho;
};

inline RawLatents eval_latents(const MraEncoder& enc_v, const MraEncoder& enc_rho,
                               const RTensor& m1b, const RTensor& m2b) {
    RTensor ov = mra_encoder_eval(enc_v, m1b, m2b);
    RTensor orho = mra_encoder_eval(enc_rho, m1b, m2b);
    const std::size_t n = enc_v.n;
    RawLatents out;
    out.z_v = unpack_v(ov.raw().data(), n);
    out.z_rho.assign(orho.raw().begin(), orho.raw().begin() + long(n));
    return out;
}

} // namespace refine_detail

/// Refine both encoder heads against one empirical moment pair. When the
/// ground truth is supplied the trace includes shift-aligned signal and
/// density errors; otherwise those columns are NaN.
inline RefineResult refine(MraEncoder& enc_v, MraEncoder& enc_rho, const MomentPair& mhat,
                           const ReconConfig& cfg, const MraSignal* truth_signal = nullptr,
                           const MraDensity* truth_density = nullptr) {
    if (enc_v.n != enc_rho.n || enc_v.n != mhat.n)
        throw std::invalid_argument("refine: grid size mismatch");
    if (cfg.lambda < 0) throw std::invalid_argument("refine: lambda must be >= 0");
    if (enc_v.head != MraEncoder::Head::v || enc_rho.head != MraEncoder::Head::rho)
        throw std::invalid_argument("refine: encoders passed in the wrong order");
    const std::size_t n = mhat.n;

    RTensor m1b({1, 2, n}), m2b({1, 2 * n, n});
    {
        RTensor p1 = pack_m1(mhat.m1), p2 = pack_m2(mhat.m2);
        std::copy(p1.raw().begin(), p1.raw().end(), m1b.raw().begin());
        std::copy(p2.raw().begin(), p2.raw().end(), m2b.raw().begin());
    }

    // Resolve the relative frame between the heads once, before descending.
    std::size_t shift = 0;
    if (cfg.align) {
        refine_detail::RawLatents raw = refine_detail::eval_latents(enc_v, enc_rho, m1b, m2b);
        shift = align_latents(raw.z_v, raw.z_rho, mhat, cfg.lambda, cfg.project_density).shift;
    }
    // Constant shift operators: phase modulation for z_v, permutation for rho.
    CTensor phase({n});
    for (std::size_t idx = 0; idx < n; ++idx)
        phase[idx] = shift_phase(signed_freq_index(idx, n), double(shift) / double(n));
    RTensor perm({n, n});
    for (std::size_t t2 = 0; t2 < n; ++t2) perm[t2 * n + (t2 + shift) % n] = 1.0;

    AdamState st_v = make_adam_state(enc_v.params);
    AdamState st_rho = make_adam_state(enc_rho.params);

    RefineResult res;
    res.shift = shift;
    res.trace.header = {"iteration", "loss", "m1_rel_err", "m2_rel_err",
                        "signal_rel_err", "density_rel_err"};

    auto push_trace = [&](std::size_t it, double lossv, const MomentPair& pred,
                          const std::vector<cdouble>& zv, const std::vector<double>& zr) {
        auto [e1, e2] = relative_error_moments(mhat, pred);
        double se = std::numeric_limits<double>::quiet_NaN();
        double de = std::numeric_limits<double>::quiet_NaN();
        if (truth_signal) se = relative_error_fourier(zv, truth_signal->values_fourier);
        if (truth_density) de = relative_error_density(zr, truth_density->mass);
        res.trace.rows.push_back({double(it), lossv, e1, e2, se, de});
    };

    std::size_t it = 0;
    bool first = true;
    for (const auto& [lr, iters] : cfg.lr_schedule) {
        if (!(lr > 0)) throw std::invalid_argument("refine: lr must be > 0");
        for (std::size_t k = 0; k < iters; ++k, ++it) {
            Tape t;
            std::vector<Var> pv_v, pv_rho;
            Var x1 = t.leaf(m1b, false);
            Var x2 = t.leaf(m2b, false);
            Var yv = mra_encoder_forward(t, enc_v, x1, x2, &pv_v, true);
            Var yr = mra_encoder_forward(t, enc_rho, x1, x2, &pv_rho, true);
            // Split the v head row into re/im halves and apply the shift.
            Var yv_flat = t.reshape(yv, {2 * n});
            CVar zv{t.slice0(yv_flat, 0, n), t.slice0(yv_flat, n, 2 * n)};
            zv = cmul(t, zv, cconst(t, phase));
            Var zr = t.matmul(t.leaf(perm, false), t.reshape(yr, {n, 1}));
            zr = t.reshape(zr, {n});
            if (cfg.project_density) zr = project_simplex_tape(t, zr);
            TapeMoments mom = latents_to_moments_tape(t, zv, zr);
            Var loss = mra_loss_tape(t, mom, mhat, cfg.lambda);
            double lossv = t.value(loss)[0];
            if (!std::isfinite(lossv))
                throw std::runtime_error("refine: loss diverged (non-finite) at iteration " +
                                         std::to_string(it));
            if (first) {
                res.initial_loss = lossv;
                first = false;
            }
            res.final_loss = lossv;

            if (it % cfg.trace_every == 0) {
                MomentPair pred;
                pred.n = n;
                pred.kind = MomentKind::analytic;
                pred.m1 = cvalue(t, mom.m1);
                pred.m2 = cvalue(t, mom.m2);
                CTensor zvt = cvalue(t, zv);
                std::vector<cdouble> zv_now(zvt.raw().begin(), zvt.raw().end());
                std::vector<double> zr_now(t.value(zr).begin(), t.value(zr).end());
                push_trace(it, lossv, pred, zv_now, zr_now);
            }

            t.backward(loss);
            std::vector<std::vector<double>> gv, gr;
            for (Var p : pv_v) gv.push_back(t.grad(p));
            for (Var p : pv_rho) gr.push_back(t.grad(p));
            adam_step(enc_v.params, gv, st_v, lr);
            adam_step(enc_rho.params, gr, st_rho, lr);
        }
    }

    // Final latents after the last update.
    {
        refine_detail::RawLatents raw = refine_detail::eval_latents(enc_v, enc_rho, m1b, m2b);
        std::vector<cdouble> zv = shift_fourier(raw.z_v, double(shift) / double(n));
        std::vector<double> zr = rotate_density(raw.z_rho, shift);
        if (cfg.project_density) zr = project_simplex(zr);
        MomentPair pred = latents_to_moments(zv, zr, false);
        double lossv = mra_loss(pred, mhat, cfg.lambda);
        res.final_loss = lossv;
        push_trace(it, lossv, pred, zv, zr);
        res.z_v = zv;
        res.z_rho = zr;
    }
    return res;
}

} // namespace omt
