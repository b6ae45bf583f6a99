#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/core/reduce.hpp"
#include "omt/core/rng.hpp"
#include "omt/core/tensor.hpp"
#include "omt/mra/mixture.hpp"

namespace omt {

// MRA forward model and its first two Fourier-domain moments.
//
// Shifts are measured as fractions of the period: shifting by s multiplies
// the unitary-DFT coefficient at signed frequency m by exp(2*pi*i*m*s), and
// the j-th grid point corresponds to s = j/n. A draw from the shift density
// rotates the signal right by j grid steps, whose coefficient picks up
// exp(-2*pi*i*m*j/n); the analytic moments below use the same phase, so
// empirical and analytic moments agree without any frame fixup.

struct MraSignal {
    std::size_t n = 0;
    std::vector<double> values_real;
    std::vector<cdouble> values_fourier;

    static MraSignal from_real(std::vector<double> v) {
        MraSignal s;
        s.n = v.size();
        s.values_fourier = fft_real_vec(v);
        s.values_real = std::move(v);
        s.check();
        return s;
    }

    /// Keeps the real part of the inverse DFT, then re-derives the Fourier
    /// side from it so the stored pair stays consistent.
    static MraSignal from_fourier(const std::vector<cdouble>& vhat) {
        std::vector<cdouble> tmp = vhat;
        fft_inplace(tmp, true);
        std::vector<double> v(tmp.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = tmp[i].real();
        return from_real(std::move(v));
    }

    void check() const {
        if (n == 0) throw std::invalid_argument("signal: empty");
        for (double x : values_real)
            if (!std::isfinite(x)) throw std::invalid_argument("signal: non-finite value");
    }
};

struct MraDensity {
    std::size_t n = 0;
    std::vector<double> mass;

    static MraDensity normalized(std::vector<double> m) {
        MraDensity d;
        d.n = m.size();
        double s = 0;
        for (double x : m) {
            if (x < 0) throw std::invalid_argument("density: negative mass");
            s += x;
        }
        if (s <= 0) throw std::invalid_argument("density: zero mass");
        for (double& x : m) x /= s;
        d.mass = std::move(m);
        return d;
    }

    static MraDensity delta(std::size_t n, std::size_t at) {
        std::vector<double> m(n, 0.0);
        m.at(at) = 1.0;
        return normalized(std::move(m));
    }

    void check() const {
        if (n == 0 || mass.size() != n) throw std::invalid_argument("density: bad size");
        double s = 0;
        for (double x : mass) {
            if (x < -1e-12) throw std::invalid_argument("density: negative mass");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-10) throw std::invalid_argument("density: mass must sum to 1");
    }
};

inline MraSignal mixture_signal(const MixtureSpec1D& spec, std::size_t n) {
    return MraSignal::from_real(mixture_values(spec, n));
}

inline MraDensity mixture_density(const MixtureSpec1D& spec, std::size_t n) {
    return MraDensity::normalized(mixture_mass(spec, n));
}

enum class MomentKind { analytic, empirical };

struct MomentPair {
    std::size_t n = 0;
    CTensor m1{{1}, cdouble(0, 0)};
    CTensor m2{{1, 1}, cdouble(0, 0)};
    MomentKind kind = MomentKind::analytic;
    double sigma = 0.0;      // empirical only: noise level used for the correction
    std::size_t count = 0;   // empirical only: N
};

/// Phase picked up at signed frequency m by a shift of s periods.
inline cdouble shift_phase(long m, double s) {
    double ang = 2.0 * pi * double(m) * s;
    return cdouble(std::cos(ang), std::sin(ang));
}

/// Shift a Fourier-domain signal by s (fraction of the period, mod 1).
inline std::vector<cdouble> shift_fourier(const std::vector<cdouble>& vhat, double s) {
    const std::size_t n = vhat.size();
    std::vector<cdouble> out(n);
    for (std::size_t idx = 0; idx < n; ++idx)
        out[idx] = shift_phase(signed_freq_index(idx, n), s) * vhat[idx];
    return out;
}

namespace mra_detail {

/// Row i of the observation batch: a rho-distributed right rotation of v
/// plus gaussian noise, driven entirely by counters so any worker layout
/// produces the same rows.
inline void observation_row(const MraSignal& v, const MraDensity& rho, double sigma,
                            const SeededRng& shifts, const SeededRng& noise, std::size_t i,
                            double* out) {
    const std::size_t n = v.n;
    double u = shifts.uniform_at(i);
    std::size_t j = 0;
    double acc = 0;
    for (; j + 1 < n; ++j) {
        acc += rho.mass[j];
        if (u < acc) break;
    }
    for (std::size_t t = 0; t < n; ++t) {
        double noise_term = sigma > 0 ? sigma * noise.gaussian_at(i * n + t) : 0.0;
        out[t] = v.values_real[(t + n - j) % n] + noise_term;
    }
}

} // namespace mra_detail

/// N observation rows, each a random rotation of v plus N(0, sigma^2) noise.
inline RTensor simulate_observations(const MraSignal& v, const MraDensity& rho, std::size_t N,
                                     double sigma, const SeededRng& rng) {
    if (N < 1) throw std::invalid_argument("simulate: N must be positive");
    if (sigma < 0) throw std::invalid_argument("simulate: sigma must be nonnegative");
    rho.check();
    if (rho.n != v.n) throw std::invalid_argument("simulate: size mismatch");
    SeededRng shifts = rng.substream(1);
    SeededRng noise = rng.substream(2);
    RTensor batch({N, v.n}, 0.0);
    parallel_blocks(N, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            mra_detail::observation_row(v, rho, sigma, shifts, noise, i, batch.data() + i * v.n);
    });
    return batch;
}

/// First two analytic moments of the Fourier-domain observation model.
inline MomentPair analytic_moments(const MraSignal& v, const MraDensity& rho) {
    rho.check();
    if (rho.n != v.n) throw std::invalid_argument("moments: size mismatch");
    const std::size_t n = v.n;
    MomentPair out;
    out.n = n;
    out.kind = MomentKind::analytic;
    out.m1 = CTensor({n});
    out.m2 = CTensor({n, n});
    std::vector<cdouble> w(n);
    for (std::size_t j = 0; j < n; ++j) {
        double rj = rho.mass[j];
        if (rj == 0) continue;
        for (std::size_t idx = 0; idx < n; ++idx) {
            long m = signed_freq_index(idx, n);
            w[idx] = shift_phase(m, -double(j) / double(n)) * v.values_fourier[idx];
        }
        for (std::size_t a = 0; a < n; ++a) {
            out.m1[a] += rj * w[a];
            for (std::size_t b = 0; b < n; ++b)
                out.m2.at2(a, b) += rj * w[a] * std::conj(w[b]);
        }
    }
    return out;
}

namespace mra_detail {

template <typename RowFn>
MomentPair moments_over_rows(std::size_t N, std::size_t n, double sigma, RowFn&& fill_row) {
    // single accumulator: n entries of m1 then n^2 entries of m2
    CTensor acc = reduce_sum_terms<cdouble>(N, {n + n * n}, [&](std::size_t i, CTensor& a) {
        std::vector<double> row(n);
        fill_row(i, row.data());
        std::vector<cdouble> f(n);
        for (std::size_t t = 0; t < n; ++t) f[t] = cdouble(row[t], 0.0);
        fft_inplace(f, false);
        for (std::size_t t = 0; t < n; ++t) a[t] += f[t];
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) a[n + r * n + c] += f[r] * std::conj(f[c]);
    });

    MomentPair out;
    out.n = n;
    out.kind = MomentKind::empirical;
    out.sigma = sigma;
    out.count = N;
    out.m1 = CTensor({n});
    out.m2 = CTensor({n, n});
    const double inv = 1.0 / double(N);
    for (std::size_t t = 0; t < n; ++t) out.m1[t] = acc[t] * inv;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) out.m2.at2(r, c) = acc[n + r * n + c] * inv;
    for (std::size_t t = 0; t < n; ++t) out.m2.at2(t, t) -= sigma * sigma;
    return out;
}

} // namespace mra_detail

/// Unbiased empirical moments of a batch: mean of F(row) and mean of the
/// outer products with sigma^2 I subtracted (F unitary keeps the noise
/// covariance white, so the diagonal correction is exact).
inline MomentPair empirical_moments(const RTensor& batch, double sigma) {
    if (batch.rank() != 2 || batch.extent(0) == 0)
        throw std::invalid_argument("moments: empty batch");
    const std::size_t N = batch.extent(0);
    const std::size_t n = batch.extent(1);
    return mra_detail::moments_over_rows(N, n, sigma, [&](std::size_t i, double* out) {
        const double* src = batch.data() + i * n;
        std::copy(src, src + n, out);
    });
}

/// simulate_observations + empirical_moments without materializing the
/// batch; same counters and reduction order, so results match the two-step
/// path bit for bit.
inline MomentPair simulate_and_moments(const MraSignal& v, const MraDensity& rho, std::size_t N,
                                       double sigma, const SeededRng& rng) {
    if (N < 1) throw std::invalid_argument("simulate: N must be positive");
    if (sigma < 0) throw std::invalid_argument("simulate: sigma must be nonnegative");
    rho.check();
    if (rho.n != v.n) throw std::invalid_argument("simulate: size mismatch");
    SeededRng shifts = rng.substream(1);
    SeededRng noise = rng.substream(2);
    return mra_detail::moments_over_rows(N, v.n, sigma, [&](std::size_t i, double* out) {
        mra_detail::observation_row(v, rho, sigma, shifts, noise, i, out);
    });
}

} // namespace omt
