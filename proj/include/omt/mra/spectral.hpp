#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/core/tensor.hpp"
#include "omt/mra/moments.hpp"

namespace omt {

// Spectral inversion of the second moment. When |vhat(k)| = 1 for all k, the
// second moment is diagonalized by the shifted copies of vhat: eigenvalues
// are n * rho(j) and each eigenvector, divided entrywise by the recovered
// vhat, is exactly a discrete Fourier column whose index is that
// eigenvalue's grid position. Recovery is exact up to the global shift
// ambiguity; we pin the leftover global phase by making the recovered
// zero-frequency coefficient real and nonnegative (that mode is
// shift-invariant, so nothing observable depends on the choice).

struct SpectralResult {
    std::vector<cdouble> vhat;     // recovered signal spectrum
    MraDensity rho;                // recovered shift density
    bool degenerate = false;       // eigenvalue gap too small for safe matching
    double min_gap = 0.0;          // smallest gap between sorted eigenvalues
};

struct SpectralOptions {
    bool assume_unit_modulus = true;
    double degenerate_gap = 1e-8;  // relative to the largest eigenvalue
    bool use_power_iteration = false;
    std::size_t power_iters = 200;
};

namespace spectral_detail {

inline void check_hermitian(const CTensor& m2) {
    if (m2.rank() != 2 || m2.extent(0) != m2.extent(1))
        throw std::invalid_argument("spectral: m2 must be square");
    const std::size_t n = m2.extent(0);
    double scale = 0;
    for (std::size_t i = 0; i < m2.size(); ++i) scale = std::max(scale, std::abs(m2[i]));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b)
            if (std::abs(m2.at2(a, b) - std::conj(m2.at2(b, a))) > 1e-8 * std::max(1.0, scale))
                throw std::invalid_argument("spectral: m2 is not Hermitian");
}

/// Eigenpairs sorted by descending eigenvalue.
inline void dense_eigen(const CTensor& m2, std::vector<double>& vals,
                        std::vector<std::vector<cdouble>>& vecs) {
    const std::size_t n = m2.extent(0);
    Eigen::MatrixXcd M(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) M(long(a), long(b)) = m2.at2(a, b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectral: eigensolver failed");
    vals.resize(n);
    vecs.assign(n, std::vector<cdouble>(n));
    for (std::size_t l = 0; l < n; ++l) {
        std::size_t src = n - 1 - l; // Eigen sorts ascending
        vals[l] = es.eigenvalues()(long(src));
        for (std::size_t a = 0; a < n; ++a) vecs[l][a] = es.eigenvectors()(long(a), long(src));
    }
}

/// Power iteration with deflation: repeatedly normalize M u, read the
/// Rayleigh quotient off as the eigenvalue, subtract the found component.
inline void power_eigen(const CTensor& m2, std::size_t iters, std::vector<double>& vals,
                        std::vector<std::vector<cdouble>>& vecs) {
    const std::size_t n = m2.extent(0);
    std::vector<std::vector<cdouble>> M(n, std::vector<cdouble>(n));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) M[a][b] = m2.at2(a, b);
    vals.assign(n, 0.0);
    vecs.assign(n, std::vector<cdouble>(n));

    auto apply = [&](const std::vector<cdouble>& x) {
        std::vector<cdouble> y(n, cdouble(0, 0));
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) y[a] += M[a][b] * x[b];
        return y;
    };

    for (std::size_t l = 0; l < n; ++l) {
        std::vector<cdouble> u(n);
        // deterministic start vector biased away from symmetry axes
        for (std::size_t a = 0; a < n; ++a)
            u[a] = cdouble(std::cos(0.7 * double(a + 1) + double(l)),
                           std::sin(1.3 * double(a + 1) - 0.5 * double(l)));
        double nu = norm2(u);
        for (auto& x : u) x /= nu;
        for (std::size_t it = 0; it < iters; ++it) {
            u = apply(u);
            nu = norm2(u);
            if (nu == 0) break;
            for (auto& x : u) x /= nu;
        }
        auto mu = apply(u);
        cdouble lam(0, 0);
        for (std::size_t a = 0; a < n; ++a) lam += std::conj(u[a]) * mu[a];
        vals[l] = lam.real();
        vecs[l] = u;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) M[a][b] -= vals[l] * u[a] * std::conj(u[b]);
    }

    // deflation order is magnitude order; re-sort to descending value
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    std::vector<double> v2(n);
    std::vector<std::vector<cdouble>> e2(n);
    for (std::size_t i = 0; i < n; ++i) {
        v2[i] = vals[order[i]];
        e2[i] = vecs[order[i]];
    }
    vals = std::move(v2);
    vecs = std::move(e2);
}

/// Global phase that makes x as conjugate-symmetric as possible, preferring
/// a nonnegative real zero-frequency coefficient.
inline std::vector<cdouble> canonical_phase(const std::vector<cdouble>& x) {
    const std::size_t n = x.size();
    // sum over m of x(m) * x(-m) equals exp(2 i phi') * sum |true|^2 when x is
    // a true spectrum rotated by phi'; halving the angle recovers phi' up to pi.
    cdouble q(0, 0);
    for (std::size_t idx = 0; idx < n; ++idx) {
        std::size_t nidx = storage_index(-signed_freq_index(idx, n), n);
        q += x[idx] * x[nidx];
    }
    double phi = 0.5 * std::arg(q);
    std::vector<cdouble> best;
    double best_score = -1;
    for (int s = 0; s < 2; ++s) {
        double ang = -phi + (s ? pi : 0.0);
        cdouble rot(std::cos(ang), std::sin(ang));
        std::vector<cdouble> cand(n);
        for (std::size_t idx = 0; idx < n; ++idx) cand[idx] = rot * x[idx];
        double score = cand[0].real();
        if (score > best_score) {
            best_score = score;
            best = std::move(cand);
        }
    }
    return best;
}

} // namespace spectral_detail

inline SpectralResult spectral_invert(const CTensor& m2, const SpectralOptions& opt = {}) {
    using namespace spectral_detail;
    check_hermitian(m2);
    const std::size_t n = m2.extent(0);

    std::vector<double> vals;
    std::vector<std::vector<cdouble>> vecs;
    if (opt.use_power_iteration)
        power_eigen(m2, opt.power_iters, vals, vecs);
    else
        dense_eigen(m2, vals, vecs);

    SpectralResult res;
    res.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < n; ++l)
        res.min_gap = std::min(res.min_gap, std::abs(vals[l] - vals[l + 1]));
    double vmax = std::max(std::abs(vals.front()), std::abs(vals.back()));
    if (vmax <= 0) throw std::runtime_error("spectral: zero moment matrix");
    res.degenerate = res.min_gap < opt.degenerate_gap * vmax;

    // top eigenvector carries the signal spectrum (scaled to unit modulus)
    std::vector<cdouble> v0(n);
    double sn = std::sqrt(double(n));
    for (std::size_t a = 0; a < n; ++a) v0[a] = vecs[0][a] * sn;
    res.vhat = canonical_phase(v0);

    // remaining eigenvectors, divided by the recovered spectrum, are Fourier
    // columns; the inverse transform localizes each to its grid index
    std::vector<double> rho(n, 0.0);
    std::vector<bool> taken(n, false);
    for (std::size_t l = 0; l < n; ++l) {
        std::vector<cdouble> w(n);
        for (std::size_t a = 0; a < n; ++a) {
            cdouble d = res.vhat[a];
            double mag = std::abs(d);
            if (mag < 1e-9) {
                if (opt.assume_unit_modulus)
                    throw std::runtime_error("spectral: recovered spectrum has a near-zero entry");
                d = cdouble(1e-9, 0);
            }
            w[a] = vecs[l][a] * sn / d;
        }
        fft_inplace(w, true);
        std::size_t best = 0;
        double best_mag = -1;
        for (std::size_t d = 0; d < n; ++d) {
            double mag = std::abs(w[d]);
            if (mag > best_mag + 1e-15) {
                best_mag = mag;
                best = d;
            }
        }
        if (taken[best]) {
            res.degenerate = true;
            // fall back to the best untaken column
            double second = -1;
            std::size_t alt = n;
            for (std::size_t d = 0; d < n; ++d) {
                if (taken[d]) continue;
                double mag = std::abs(w[d]);
                if (mag > second) {
                    second = mag;
                    alt = d;
                }
            }
            best = alt == n ? best : alt;
        }
        taken[best] = true;
        rho[best] = std::max(0.0, vals[l] / double(n));
    }

    res.rho = MraDensity::normalized(std::move(rho));
    return res;
}

} // namespace omt
