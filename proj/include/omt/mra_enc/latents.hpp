#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "omt/core/grids.hpp"
#include "omt/core/tensor.hpp"
#include "omt/mra/moments.hpp"
#include "omt/nn/tape.hpp"

namespace omt {

// Latent pair (z_v, z_rho) -> moments, the reconstruction loss, and the
// joint-shift alignment between encoder output and an empirical moment pair.
// The moment formulas are the same finite sums as analytic_moments, so a
// latent pair that exactly discretizes a (signal, density) pair reproduces
// its analytic moments.

/// Clip negatives and renormalize to unit mass (eps-guarded denominator).
inline std::vector<double> project_simplex(const std::vector<double>& z_rho) {
    std::vector<double> out(z_rho.size());
    double total = 0;
    for (std::size_t i = 0; i < z_rho.size(); ++i) {
        out[i] = z_rho[i] > 0 ? z_rho[i] : 0.0;
        total += out[i];
    }
    double inv = 1.0 / (total + 1e-12);
    for (double& x : out) x *= inv;
    return out;
}

inline MomentPair latents_to_moments(const std::vector<cdouble>& z_v,
                                     const std::vector<double>& z_rho, bool project = false) {
    if (z_v.empty() || z_v.size() != z_rho.size())
        throw std::invalid_argument("latents_to_moments: shape mismatch");
    const std::size_t n = z_v.size();
    std::vector<double> rho = project ? project_simplex(z_rho) : z_rho;
    MomentPair mp;
    mp.n = n;
    mp.kind = MomentKind::analytic;
    mp.m1 = CTensor({n});
    mp.m2 = CTensor({n, n});
    std::vector<cdouble> w(n);
    for (std::size_t j = 0; j < n; ++j) {
        double rj = rho[j];
        if (rj == 0.0) continue;
        double s = double(j) / double(n);
        for (std::size_t idx = 0; idx < n; ++idx)
            w[idx] = shift_phase(signed_freq_index(idx, n), -s) * z_v[idx];
        for (std::size_t a = 0; a < n; ++a) {
            mp.m1[a] += rj * w[a];
            for (std::size_t b = 0; b < n; ++b) mp.m2[a * n + b] += rj * w[a] * std::conj(w[b]);
        }
    }
    return mp;
}

/// Reconstruction loss: smoothed Frobenius distance on both moments,
/// sqrt(x + 1e-12) keeps the gradient finite at a perfect match.
inline double mra_loss(const MomentPair& pred, const MomentPair& target, double lambda) {
    if (pred.n != target.n) throw std::invalid_argument("mra_loss: size mismatch");
    double d1 = 0, d2 = 0;
    for (std::size_t i = 0; i < pred.m1.size(); ++i) d1 += std::norm(pred.m1[i] - target.m1[i]);
    for (std::size_t i = 0; i < pred.m2.size(); ++i) d2 += std::norm(pred.m2[i] - target.m2[i]);
    return std::sqrt(d1 + 1e-12) + lambda * std::sqrt(d2 + 1e-12);
}

inline CTensor spectrum_tensor(const std::vector<cdouble>& z) {
    CTensor out({z.size()});
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i];
    return out;
}

// Tape-side counterparts used during refinement.

struct TapeMoments {
    CVar m1; // shape {n}
    CVar m2; // shape {n,n}
};

namespace latents_detail {

/// Column matrix E[a,j] = exp(-2 pi i m_a j / n): m1 phase sums over shifts.
inline void phase_matrix_m1(std::size_t n, RTensor& re, RTensor& im) {
    re = RTensor({n, n});
    im = RTensor({n, n});
    for (std::size_t a = 0; a < n; ++a) {
        long ma = signed_freq_index(a, n);
        for (std::size_t j = 0; j < n; ++j) {
            double ang = -2.0 * pi * double(ma) * double(j) / double(n);
            re[a * n + j] = std::cos(ang);
            im[a * n + j] = std::sin(ang);
        }
    }
}

/// E2[a*n+b, j] = exp(-2 pi i (m_a - m_b) j / n): m2 phase sums.
inline void phase_matrix_m2(std::size_t n, RTensor& re, RTensor& im) {
    re = RTensor({n * n, n});
    im = RTensor({n * n, n});
    for (std::size_t a = 0; a < n; ++a) {
        long ma = signed_freq_index(a, n);
        for (std::size_t b = 0; b < n; ++b) {
            long mb = signed_freq_index(b, n);
            for (std::size_t j = 0; j < n; ++j) {
                double ang = -2.0 * pi * double(ma - mb) * double(j) / double(n);
                re[(a * n + b) * n + j] = std::cos(ang);
                im[(a * n + b) * n + j] = std::sin(ang);
            }
        }
    }
}

} // namespace latents_detail

/// Simplex projection as tape ops (clip via zero-slope lrelu, renormalize).
inline Var project_simplex_tape(Tape& t, Var z_rho) {
    const std::size_t n = t.shape(z_rho)[0];
    Var clipped = t.lrelu(z_rho, 0.0);
    Var inv = t.recip_eps(t.sum(clipped), 1e-12);
    Var scaled = t.rowscale(t.reshape(clipped, {1, n}), inv);
    return t.reshape(scaled, {n});
}

/// z_v is a complex {n} pair, z_rho a real {n} node (already projected if
/// desired). Returns moment nodes built from the exact finite-sum formulas.
inline TapeMoments latents_to_moments_tape(Tape& t, CVar z_v, Var z_rho) {
    const std::size_t n = t.shape(z_rho)[0];
    if (t.shape(z_v.re)[0] != n) throw std::invalid_argument("latents tape: shape mismatch");
    RTensor e1re, e1im, e2re, e2im;
    latents_detail::phase_matrix_m1(n, e1re, e1im);
    latents_detail::phase_matrix_m2(n, e2re, e2im);
    Var rho_col = t.reshape(z_rho, {n, 1});
    // c = E1 rho: per-frequency shift-phase average.
    CVar c{t.reshape(t.matmul(t.leaf(e1re, false), rho_col), {n}),
           t.reshape(t.matmul(t.leaf(e1im, false), rho_col), {n})};
    CVar m1 = cmul(t, c, z_v);
    // G = E2 rho reshaped to {n,n}; m2 = (z_v z_v^H) .* G.
    CVar gmat{t.reshape(t.matmul(t.leaf(e2re, false), rho_col), {n, n}),
              t.reshape(t.matmul(t.leaf(e2im, false), rho_col), {n, n})};
    CVar zcol = creshape(t, z_v, {n, 1});
    CVar zrow_conj{t.reshape(z_v.re, {1, n}), t.neg(t.reshape(z_v.im, {1, n}))};
    CVar outer = cmatmul(t, zcol, zrow_conj);
    CVar m2 = cmul(t, outer, gmat);
    return {m1, m2};
}

inline Var mra_loss_tape(Tape& t, const TapeMoments& pred, const MomentPair& target,
                         double lambda) {
    CVar t1 = cconst(t, target.m1);
    CVar t2 = cconst(t, target.m2);
    Var l1 = t.sqrt_eps(cnorm2_sq(t, csub(t, pred.m1, t1)), 1e-12);
    Var l2 = t.sqrt_eps(cnorm2_sq(t, csub(t, pred.m2, t2)), 1e-12);
    return t.add(l1, t.smul(l2, lambda));
}

// Joint-shift alignment. Candidate l modulates the spectrum by
// exp(+2 pi i m l / n) and rotates the density to rho[(t + l) % n]; this
// direction changes the moments (the invariant direction pairs the same
// modulation with the opposite rotation), so the sweep locates the relative
// frame between the two heads. The identity is candidate l = 0.

struct AlignedLatents {
    std::vector<cdouble> z_v;
    std::vector<double> z_rho;
    std::size_t shift = 0;
    double loss = 0;
};

inline std::vector<double> rotate_density(const std::vector<double>& rho, std::size_t l) {
    const std::size_t n = rho.size();
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) out[t] = rho[(t + l) % n];
    return out;
}

inline AlignedLatents align_latents(const std::vector<cdouble>& z_v,
                                    const std::vector<double>& z_rho, const MomentPair& mhat,
                                    double lambda, bool project = true) {
    const std::size_t n = z_v.size();
    AlignedLatents best;
    bool have = false;
    for (std::size_t l = 0; l < n; ++l) {
        std::vector<cdouble> zv = shift_fourier(z_v, double(l) / double(n));
        std::vector<double> zr = rotate_density(z_rho, l);
        double loss = mra_loss(latents_to_moments(zv, zr, project), mhat, lambda);
        if (!have || loss < best.loss) {
            have = true;
            best.z_v = zv;
            best.z_rho = zr;
            best.shift = l;
            best.loss = loss;
        }
    }
    return best;
}

} // namespace omt
