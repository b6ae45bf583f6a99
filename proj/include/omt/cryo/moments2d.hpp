#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/core/reduce.hpp"
#include "omt/core/rng.hpp"
#include "omt/core/tensor.hpp"
#include "omt/cryo/slice.hpp"
#include "omt/mra/moments.hpp"

namespace omt {

/// First two moments of the 2D Fourier transforms of an image batch. Entries
/// are indexed by the flattened pixel grid a*n + b, so m1 has n^2 entries and
/// m2 is n^2 by n^2.
struct CryoMomentPair {
    std::size_t n = 0; // pixel grid edge
    CTensor m1{{1}, cdouble(0, 0)};
    CTensor m2{{1, 1}, cdouble(0, 0)};
    MomentKind kind = MomentKind::analytic;
    double sigma = 0.0;    // empirical only: noise level used for the correction
    std::size_t count = 0; // empirical only: N
};

namespace cryo_detail {

template <typename ImageFn>
CryoMomentPair moments_over_images(std::size_t N, std::size_t n, double sigma,
                                   ImageFn&& fill_image) {
    const std::size_t n2 = n * n;
    // single accumulator: n^2 entries of m1 then n^4 entries of m2
    CTensor acc = reduce_sum_terms<cdouble>(N, {n2 + n2 * n2}, [&](std::size_t i, CTensor& a) {
        std::vector<double> img(n2);
        fill_image(i, img.data());
        std::vector<cdouble> f = fft2_real(img, n);
        for (std::size_t t = 0; t < n2; ++t) a[t] += f[t];
        cdouble* m2 = a.data() + n2;
        for (std::size_t r = 0; r < n2; ++r) {
            const cdouble fr = f[r];
            cdouble* row = m2 + r * n2;
            for (std::size_t c = 0; c < n2; ++c) row[c] += fr * std::conj(f[c]);
        }
    });

    CryoMomentPair out;
    out.n = n;
    out.kind = MomentKind::empirical;
    out.sigma = sigma;
    out.count = N;
    out.m1 = CTensor({n2});
    out.m2 = CTensor({n2, n2});
    const double inv = 1.0 / double(N);
    for (std::size_t t = 0; t < n2; ++t) out.m1[t] = acc[t] * inv;
    const cdouble* src = acc.data() + n2;
    for (std::size_t t = 0; t < n2 * n2; ++t) out.m2[t] = src[t] * inv;
    for (std::size_t t = 0; t < n2; ++t) out.m2.at2(t, t) -= sigma * sigma;
    return out;
}

} // namespace cryo_detail

/// Unbiased empirical moments of an image batch: mean of F2(image) and mean
/// of the outer products with sigma^2 I subtracted (F2 unitary keeps the
/// pixel noise covariance white, so the diagonal correction is exact).
inline CryoMomentPair empirical_moments_2d(const RTensor& images, double sigma) {
    if (images.rank() != 3 || images.extent(0) == 0)
        throw std::invalid_argument("moments: empty batch");
    if (images.extent(1) != images.extent(2))
        throw std::invalid_argument("moments: images must be square");
    const std::size_t N = images.extent(0);
    const std::size_t n = images.extent(1);
    return cryo_detail::moments_over_images(N, n, sigma, [&](std::size_t i, double* out) {
        const double* src = images.data() + i * n * n;
        std::copy(src, src + n * n, out);
    });
}

/// simulate_images + empirical_moments_2d without materializing the batch;
/// same counters and reduction order, so results match the two-step path bit
/// for bit.
inline CryoMomentPair simulate_and_moments_2d(const FourierFn& fn,
                                              const std::vector<Rotation>& rotations,
                                              double sigma, const SeededRng& rng, std::size_t n) {
    if (rotations.empty()) throw std::invalid_argument("simulate: no rotations");
    if (sigma < 0) throw std::invalid_argument("simulate: sigma must be nonnegative");
    if (n == 0) throw std::invalid_argument("simulate: empty grid");
    SeededRng noise = rng.substream(1);
    return cryo_detail::moments_over_images(
        rotations.size(), n, sigma, [&](std::size_t i, double* out) {
            cryo_detail::image_pixels(fn, rotations[i], sigma, noise, i, n, out);
        });
}

/// Flattened grid indices whose signed frequency lies inside the bandlimit
/// disk ||kappa|| <= n/2, in row-major order. Restricting moments to these
/// entries drops the grid corners that fall outside the resolved ball.
inline std::vector<std::size_t> bandlimit_indices(std::size_t n) {
    if (n == 0) throw std::invalid_argument("bandlimit: empty grid");
    std::vector<std::size_t> idx;
    const double r2 = 0.25 * double(n) * double(n) + 1e-12;
    for (std::size_t a = 0; a < n; ++a) {
        double ka = double(signed_freq_index(a, n));
        for (std::size_t b = 0; b < n; ++b) {
            double kb = double(signed_freq_index(b, n));
            if (ka * ka + kb * kb <= r2) idx.push_back(a * n + b);
        }
    }
    return idx;
}

/// Restrict a moment pair to a subset of flattened grid entries.
inline CryoMomentPair mask_moments(const CryoMomentPair& p, const std::vector<std::size_t>& idx) {
    const std::size_t full = p.m1.size();
    if (idx.empty()) throw std::invalid_argument("mask: empty index set");
    for (std::size_t t : idx)
        if (t >= full) throw std::invalid_argument("mask: index out of range");
    const std::size_t m = idx.size();
    CryoMomentPair out;
    out.n = p.n;
    out.kind = p.kind;
    out.sigma = p.sigma;
    out.count = p.count;
    out.m1 = CTensor({m});
    out.m2 = CTensor({m, m});
    for (std::size_t r = 0; r < m; ++r) {
        out.m1[r] = p.m1[idx[r]];
        for (std::size_t c = 0; c < m; ++c) out.m2.at2(r, c) = p.m2.at2(idx[r], idx[c]);
    }
    return out;
}

} // namespace omt
