#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/mra/moments.hpp"

namespace omt {

// Error metrics that quotient out the shift ambiguity: reconstructions are
// compared against every candidate alignment and the best one scores.

/// Shift grid used by the alignment search: all n grid shifts refined with
/// 10 fractional subdivisions each.
inline std::vector<double> alignment_shifts(std::size_t n, std::size_t refine = 10) {
    std::vector<double> s;
    s.reserve(n * refine);
    for (std::size_t j = 0; j < n * refine; ++j)
        s.push_back(double(j) / double(n * refine));
    return s;
}

/// min over shifts of |shift(v) - u| / |v|, evaluated in the Fourier domain
/// where a shift is a pure phase (Parseval makes the norms equal).
inline double relative_error_signal(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw std::invalid_argument("error: length mismatch");
    const std::size_t n = v.size();
    double nv = norm2(v);
    if (nv == 0) throw std::invalid_argument("error: reference signal is zero");
    auto uh = fft_real_vec(u);
    auto vh = fft_real_vec(v);
    double best = std::numeric_limits<double>::infinity();
    for (double s : alignment_shifts(n)) {
        double acc = 0;
        for (std::size_t idx = 0; idx < n; ++idx) {
            cdouble d = shift_phase(signed_freq_index(idx, n), s) * vh[idx] - uh[idx];
            acc += std::norm(d);
        }
        best = std::min(best, std::sqrt(acc));
    }
    return best / nv;
}

/// Same alignment search for complex spectra compared directly in Fourier
/// domain; used for recovered vhat.
inline double relative_error_fourier(const std::vector<cdouble>& uh,
                                     const std::vector<cdouble>& vh) {
    if (uh.size() != vh.size()) throw std::invalid_argument("error: length mismatch");
    const std::size_t n = vh.size();
    double nv = norm2(vh);
    if (nv == 0) throw std::invalid_argument("error: reference signal is zero");
    double best = std::numeric_limits<double>::infinity();
    for (double s : alignment_shifts(n)) {
        double acc = 0;
        for (std::size_t idx = 0; idx < n; ++idx) {
            cdouble d = shift_phase(signed_freq_index(idx, n), s) * vh[idx] - uh[idx];
            acc += std::norm(d);
        }
        best = std::min(best, std::sqrt(acc));
    }
    return best / nv;
}

/// Density error: min over grid rotations of |rot(q) - p| / |q|. Densities
/// live on the grid, so only the n integer rotations are candidates.
inline double relative_error_density(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("error: length mismatch");
    const std::size_t n = q.size();
    double nq = norm2(q);
    if (nq == 0) throw std::invalid_argument("error: reference density is zero");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = q[(j + r) % n] - p[j];
            acc += d * d;
        }
        best = std::min(best, std::sqrt(acc));
    }
    return best / nq;
}

/// Joint alignment of a recovered (vhat, rho) pair against the truth: one
/// shared grid shift must explain both, so score shifts jointly and return
/// the pair of errors at the best one.
struct JointAlignment {
    double signal_err = 0;
    double density_err = 0;
    std::size_t shift = 0;
};

inline JointAlignment align_joint(const std::vector<cdouble>& vhat_rec,
                                  const std::vector<double>& rho_rec,
                                  const std::vector<cdouble>& vhat_true,
                                  const std::vector<double>& rho_true) {
    const std::size_t n = rho_true.size();
    if (vhat_rec.size() != n || vhat_true.size() != n || rho_rec.size() != n)
        throw std::invalid_argument("align: length mismatch");
    double nv = norm2(vhat_true), nr = norm2(rho_true);
    if (nv == 0 || nr == 0) throw std::invalid_argument("align: zero reference");
    JointAlignment best;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        // candidate: truth shifted right by j matches the reconstruction
        double accv = 0;
        for (std::size_t idx = 0; idx < n; ++idx) {
            cdouble d = shift_phase(signed_freq_index(idx, n), -double(j) / double(n)) *
                            vhat_true[idx] -
                        vhat_rec[idx];
            accv += std::norm(d);
        }
        double accr = 0;
        for (std::size_t t = 0; t < n; ++t) {
            double d = rho_true[(t + j) % n] - rho_rec[t];
            accr += d * d;
        }
        double sv = std::sqrt(accv) / nv, sr = std::sqrt(accr) / nr;
        if (sv + sr < best_score) {
            best_score = sv + sr;
            best = {sv, sr, j};
        }
    }
    return best;
}

/// Relative moment errors (m1, m2); the first argument supplies the
/// normalization, so errors of an estimate vs a reference are
/// relative_error_moments(reference, estimate).
inline std::pair<double, double> relative_error_moments(const MomentPair& pair,
                                                        const MomentPair& ref) {
    if (pair.n != ref.n) throw std::invalid_argument("error: moment size mismatch");
    double d1 = 0, d2 = 0, n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < pair.m1.size(); ++i) {
        d1 += std::norm(ref.m1[i] - pair.m1[i]);
        n1 += std::norm(pair.m1[i]);
    }
    for (std::size_t i = 0; i < pair.m2.size(); ++i) {
        d2 += std::norm(ref.m2[i] - pair.m2[i]);
        n2 += std::norm(pair.m2[i]);
    }
    if (n1 == 0 || n2 == 0) throw std::invalid_argument("error: zero-norm reference moments");
    return {std::sqrt(d1 / n1), std::sqrt(d2 / n2)};
}

} // namespace omt
