#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/core/tensor.hpp"
#include "omt/cryo/rotation.hpp"

namespace omt {

// Volume conventions. Real space is the centered unit box [-1/2, 1/2]^3
// sampled at x_j = -1/2 + j/n (box layout, matching MRC ordering). Fourier
// evaluators take frequencies in grid units: the value at integer kappa is
// the continuous transform integral v(x) exp(-i 2*pi*kappa.x) dx, so DFT
// bin m corresponds to kappa = m exactly.

/// Batched or pointwise Fourier-domain volume evaluator (grid units).
using FourierFn = std::function<cdouble(double kx, double ky, double kz)>;

struct GaussianComponent {
    double weight = 1.0;
    Vec3 center{0, 0, 0};
    double stddev = 0.1;
};

/// Mixture of isotropic spatial Gaussians w * exp(-|x-c|^2 / (2 s^2)).
struct GaussianVolumeSpec {
    std::vector<GaussianComponent> components;
};

inline void validate_gaussian_volume(const GaussianVolumeSpec& spec) {
    if (spec.components.empty())
        throw std::invalid_argument("gaussian volume: empty mixture");
    for (const auto& c : spec.components)
        if (!(c.stddev > 0))
            throw std::invalid_argument("gaussian volume: stddev must be > 0");
}

/// Closed-form transform of the mixture at grid-unit frequency k:
/// sum_i w_i (2 pi)^{3/2} s_i^3 exp(-i xi.c_i) exp(-s_i^2 |xi|^2 / 2)
/// with xi = 2*pi*k.
inline cdouble gaussian_volume_fourier(const GaussianVolumeSpec& spec, double kx, double ky,
                                       double kz) {
    const double xix = 2.0 * pi * kx, xiy = 2.0 * pi * ky, xiz = 2.0 * pi * kz;
    const double xi2 = xix * xix + xiy * xiy + xiz * xiz;
    cdouble acc(0, 0);
    for (const auto& c : spec.components) {
        const double s2 = c.stddev * c.stddev;
        const double amp = c.weight * std::pow(2.0 * pi, 1.5) * s2 * c.stddev *
                           std::exp(-0.5 * s2 * xi2);
        const double phase = -(xix * c.center[0] + xiy * c.center[1] + xiz * c.center[2]);
        acc += amp * cdouble(std::cos(phase), std::sin(phase));
    }
    return acc;
}

inline FourierFn gaussian_fourier_fn(GaussianVolumeSpec spec) {
    validate_gaussian_volume(spec);
    return [spec = std::move(spec)](double kx, double ky, double kz) {
        return gaussian_volume_fourier(spec, kx, ky, kz);
    };
}

/// Spatial value of the periodized mixture (nearest wrap copies included so
/// the direct rasterization matches the Fourier-side one).
inline double gaussian_volume_value(const GaussianVolumeSpec& spec, double x, double y,
                                    double z) {
    double acc = 0;
    for (const auto& c : spec.components) {
        const double inv = 1.0 / (2.0 * c.stddev * c.stddev);
        for (int wx = -1; wx <= 1; ++wx)
            for (int wy = -1; wy <= 1; ++wy)
                for (int wz = -1; wz <= 1; ++wz) {
                    const double dx = x + wx - c.center[0];
                    const double dy = y + wy - c.center[1];
                    const double dz = z + wz - c.center[2];
                    const double q = (dx * dx + dy * dy + dz * dz) * inv;
                    if (q < 60.0) acc += c.weight * std::exp(-q);
                }
    }
    return acc;
}

/// Direct spatial rasterization on the box grid, [n,n,n] row-major over
/// (j1, j2, j3) with x_j = -1/2 + j/n.
inline RTensor rasterize_real(const GaussianVolumeSpec& spec, std::size_t n) {
    validate_gaussian_volume(spec);
    if (n < 2) throw std::invalid_argument("rasterize_real: n must be >= 2");
    RTensor out({n, n, n});
    auto x = space_grid(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c)
                out[(a * n + b) * n + c] = gaussian_volume_value(spec, x[a], x[b], x[c]);
    return out;
}

/// Fourier values on the n^3 DFT grid, storage order, kappa = signed index.
inline CTensor volume_fourier_grid(const FourierFn& fn, std::size_t n) {
    if (n < 2) throw std::invalid_argument("volume_fourier_grid: n must be >= 2");
    CTensor out({n, n, n});
    for (std::size_t a = 0; a < n; ++a) {
        const double ka = static_cast<double>(signed_freq_index(a, n));
        for (std::size_t b = 0; b < n; ++b) {
            const double kb = static_cast<double>(signed_freq_index(b, n));
            for (std::size_t c = 0; c < n; ++c)
                out[(a * n + b) * n + c] =
                    fn(ka, kb, static_cast<double>(signed_freq_index(c, n)));
        }
    }
    return out;
}

/// Box-layout rasterization from Fourier samples: the grid samples of the
/// periodized volume are n^{3/2} * ifft3 of the center-sign-weighted grid
/// values.
inline RTensor rasterize_fourier(const CTensor& grid_values) {
    if (grid_values.rank() != 3 || grid_values.extent(0) != grid_values.extent(1) ||
        grid_values.extent(0) != grid_values.extent(2))
        throw std::invalid_argument("rasterize_fourier: need cubic rank-3 values");
    const std::size_t n = grid_values.extent(0);
    CTensor w({n, n, n});
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c) {
                long m = signed_freq_index(a, n) + signed_freq_index(b, n) +
                         signed_freq_index(c, n);
                w[(a * n + b) * n + c] = center_sign(m) * grid_values[(a * n + b) * n + c];
            }
    CTensor v = ifft(w, {0, 1, 2});
    RTensor out({n, n, n});
    const double scale = std::pow(static_cast<double>(n), 1.5);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * v[i].real();
    return out;
}

inline RTensor rasterize_fourier(const FourierFn& fn, std::size_t n) {
    return rasterize_fourier(volume_fourier_grid(fn, n));
}

/// Desk-scale ground truth: four Gaussians on a scaled tetrahedron (never
/// coplanar), distinct widths, mass large enough that sigma = 0.5 pixel
/// noise leaves usable moments at n = 15.
inline GaussianVolumeSpec default_gaussian_volume() {
    GaussianVolumeSpec spec;
    const double r = 0.15 / std::sqrt(3.0);
    spec.components = {
        {50.0, {+r, +r, +r}, 0.070},
        {50.0, {+r, -r, -r}, 0.080},
        {50.0, {-r, +r, -r}, 0.090},
        {50.0, {-r, -r, +r}, 0.100},
    };
    return spec;
}

} // namespace omt
