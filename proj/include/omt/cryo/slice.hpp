#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/core/parallel.hpp"
#include "omt/core/rng.hpp"
#include "omt/core/tensor.hpp"
#include "omt/cryo/rotation.hpp"
#include "omt/cryo/volume.hpp"

namespace omt {

/// Central-slice extraction and image simulation.
///
/// A slice samples a volume transform on the plane through the origin that is
/// perpendicular to the viewing axis: S[a, b] = fn(R^T (kappa_a, kappa_b, 0))
/// with kappa the signed grid frequency of each storage index. By the
/// projection-slice identity this is the 2D transform of the tomographic
/// projection of the rotated volume along z, so the unitary inverse 2D DFT of
/// a slice is that projection sampled on the wrapped pixel grid: pixel at
/// storage index (p, q) sits at position (signed(p), signed(q)) / n in the
/// unit box and carries the projection value divided by n.

/// Fourier-plane sample points of the slice for rotation R, one row per
/// flattened grid entry a*n + b: row = R^T (kappa_a, kappa_b, 0).
inline RTensor slice_points(const Rotation& R, std::size_t n) {
    if (n == 0) throw std::invalid_argument("slice: empty grid");
    RTensor pts({n * n, 3});
    for (std::size_t a = 0; a < n; ++a) {
        double ka = double(signed_freq_index(a, n));
        for (std::size_t b = 0; b < n; ++b) {
            double kb = double(signed_freq_index(b, n));
            Vec3 k = R.apply_transpose({ka, kb, 0.0});
            double* row = pts.data() + (a * n + b) * 3;
            row[0] = k[0];
            row[1] = k[1];
            row[2] = k[2];
        }
    }
    return pts;
}

/// Evaluate a volume transform on the slice grid for rotation R.
inline CTensor slice_eval(const FourierFn& fn, const Rotation& R, std::size_t n) {
    if (n == 0) throw std::invalid_argument("slice: empty grid");
    CTensor out({n, n});
    for (std::size_t a = 0; a < n; ++a) {
        double ka = double(signed_freq_index(a, n));
        for (std::size_t b = 0; b < n; ++b) {
            double kb = double(signed_freq_index(b, n));
            Vec3 k = R.apply_transpose({ka, kb, 0.0});
            out.at2(a, b) = fn(k[0], k[1], k[2]);
        }
    }
    return out;
}

/// Noiseless projection image of a slice: real part of the unitary inverse
/// 2D DFT, wrapped layout (origin at storage index 0).
inline RTensor image_from_slice(const CTensor& slice) {
    if (slice.rank() != 2 || slice.extent(0) != slice.extent(1))
        throw std::invalid_argument("image_from_slice: slice must be square");
    const std::size_t n = slice.extent(0);
    CTensor img = ifft(slice, {0, 1});
    RTensor out({n, n});
    for (std::size_t i = 0; i < n * n; ++i) out[i] = img[i].real();
    return out;
}

namespace cryo_detail {

/// Image i of the batch: projection for rotations[i] plus gaussian pixel
/// noise, driven entirely by counters so any worker layout produces the
/// same pixels.
inline void image_pixels(const FourierFn& fn, const Rotation& R, double sigma,
                         const SeededRng& noise, std::size_t i, std::size_t n, double* out) {
    RTensor img = image_from_slice(slice_eval(fn, R, n));
    const std::size_t n2 = n * n;
    for (std::size_t p = 0; p < n2; ++p) {
        double noise_term = sigma > 0 ? sigma * noise.gaussian_at(i * n2 + p) : 0.0;
        out[p] = img[p] + noise_term;
    }
}

} // namespace cryo_detail

/// N projection images on the n-by-n pixel grid, one per rotation, each plus
/// i.i.d. N(0, sigma^2) pixel noise.
inline RTensor simulate_images(const FourierFn& fn, const std::vector<Rotation>& rotations,
                               double sigma, const SeededRng& rng, std::size_t n) {
    if (rotations.empty()) throw std::invalid_argument("simulate: no rotations");
    if (sigma < 0) throw std::invalid_argument("simulate: sigma must be nonnegative");
    if (n == 0) throw std::invalid_argument("simulate: empty grid");
    SeededRng noise = rng.substream(1);
    const std::size_t N = rotations.size();
    RTensor batch({N, n, n}, 0.0);
    parallel_blocks(N, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            cryo_detail::image_pixels(fn, rotations[i], sigma, noise, i, n,
                                      batch.data() + i * n * n);
    });
    return batch;
}

} // namespace omt
