#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace omt {

// Grid conventions used throughout.
//
// Space grid X on the unit interval I = [-1/2, 1/2]: x_j = -1/2 + j/n,
// j = 0..n-1. Frequency grid K: the n equispaced points k_m = 2*pi*m/n with
// m the signed DFT index (m = j for j <= n/2, else j - n), so K lies inside
// [-pi, pi]. Shifts are measured in grid steps: shifting by s steps moves a
// sample from x_j to x_{j+s} and multiplies the unitary-DFT coefficient at
// k by exp(-i k s).

inline constexpr double pi = std::numbers::pi_v<double>;

/// Signed DFT index of storage slot j for length n (0,1,..,n/2,-n/2+1,..,-1).
inline long signed_freq_index(std::size_t j, std::size_t n) {
    return (j <= n / 2) ? static_cast<long>(j)
                        : static_cast<long>(j) - static_cast<long>(n);
}

/// Storage slot of signed DFT index m for length n.
inline std::size_t storage_index(long m, std::size_t n) {
    long r = m % static_cast<long>(n);
    if (r < 0) r += static_cast<long>(n);
    return static_cast<std::size_t>(r);
}

/// K1: frequency values 2*pi*m/n in storage order.
inline std::vector<double> freq_grid(std::size_t n) {
    std::vector<double> k(n);
    for (std::size_t j = 0; j < n; ++j)
        k[j] = 2.0 * pi * static_cast<double>(signed_freq_index(j, n)) / static_cast<double>(n);
    return k;
}

/// X1: sample positions -1/2 + j/n.
inline std::vector<double> space_grid(std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j)
        x[j] = -0.5 + static_cast<double>(j) / static_cast<double>(n);
    return x;
}

/// K2: n^2 frequency pairs (k_x, k_y), row-major over (jx, jy) storage slots.
inline std::vector<std::array<double, 2>> freq_grid_2d(std::size_t n) {
    auto k = freq_grid(n);
    std::vector<std::array<double, 2>> out;
    out.reserve(n * n);
    for (std::size_t jx = 0; jx < n; ++jx)
        for (std::size_t jy = 0; jy < n; ++jy) out.push_back({k[jx], k[jy]});
    return out;
}

/// K3 frequency triple at storage slot (jx, jy, jz).
inline std::array<double, 3> freq3(std::size_t jx, std::size_t jy, std::size_t jz, std::size_t n) {
    const double f = 2.0 * pi / static_cast<double>(n);
    return {f * static_cast<double>(signed_freq_index(jx, n)),
            f * static_cast<double>(signed_freq_index(jy, n)),
            f * static_cast<double>(signed_freq_index(jz, n))};
}

/// Centering phase for sampling grids with origin at x = -1/2: the DFT of
/// centered samples carries (-1)^(m1+..+md) relative to the continuous
/// transform. Valid at integer frequency indices.
inline double center_sign(long m) { return (m % 2 == 0) ? 1.0 : -1.0; }

inline double center_sign2(long m1, long m2) { return center_sign(m1 + m2); }

inline double center_sign3(long m1, long m2, long m3) { return center_sign(m1 + m2 + m3); }

} // namespace omt
