#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "omt/core/grids.hpp"
#include "omt/core/tensor.hpp"

namespace omt {

// Unitary FFT along arbitrary axes. Power-of-two lengths use iterative
// Cooley-Tukey; everything else goes through Bluestein's chirp-z identity so
// any length is supported. Each 1D pass is scaled by n^(-1/2) in both
// directions, so fft and ifft are exact inverses and Parseval holds.

namespace fft_detail {

inline void fft_pow2(std::vector<cdouble>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n < 2) return;
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * pi / static_cast<double>(len);
        const cdouble wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                cdouble u = a[i + j];
                cdouble v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

struct Plan {
    std::size_t n = 0;
    bool pow2 = false;
    std::size_t m = 0;                 // padded length for Bluestein
    std::vector<cdouble> chirp;        // exp(-i*pi*j^2/n), j = 0..n-1
    std::vector<cdouble> bhat_fwd;     // FFT of Bluestein kernel (forward sign)
    std::vector<cdouble> bhat_inv;     // FFT of Bluestein kernel (inverse sign)

    explicit Plan(std::size_t len) : n(len) {
        pow2 = (n & (n - 1)) == 0;
        if (pow2 || n < 2) return;
        m = 1;
        while (m < 2 * n - 1) m <<= 1;
        chirp.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            // j^2 mod 2n keeps the chirp angle well conditioned
            std::size_t q = (j * j) % (2 * n);
            double ang = -pi * static_cast<double>(q) / static_cast<double>(n);
            chirp[j] = cdouble(std::cos(ang), std::sin(ang));
        }
        bhat_fwd = kernel_fft(false);
        bhat_inv = kernel_fft(true);
    }

    std::vector<cdouble> kernel_fft(bool inverse) const {
        std::vector<cdouble> b(m, cdouble(0, 0));
        for (std::size_t j = 0; j < n; ++j) {
            cdouble c = inverse ? chirp[j] : std::conj(chirp[j]);
            b[j] = c;
            if (j > 0) b[m - j] = c;
        }
        fft_pow2(b, false);
        return b;
    }

    // Unnormalized DFT of length n (sign per `inverse`).
    void transform(cdouble* x, bool inverse) const {
        if (n < 2) return;
        if (pow2) {
            std::vector<cdouble> buf(x, x + n);
            fft_pow2(buf, inverse);
            std::copy(buf.begin(), buf.end(), x);
            return;
        }
        const auto& bhat = inverse ? bhat_inv : bhat_fwd;
        std::vector<cdouble> a(m, cdouble(0, 0));
        for (std::size_t j = 0; j < n; ++j) {
            cdouble c = inverse ? std::conj(chirp[j]) : chirp[j];
            a[j] = x[j] * c;
        }
        fft_pow2(a, false);
        for (std::size_t j = 0; j < m; ++j) a[j] *= bhat[j];
        fft_pow2(a, true);
        const double scale = 1.0 / static_cast<double>(m);
        for (std::size_t k = 0; k < n; ++k) {
            cdouble c = inverse ? std::conj(chirp[k]) : chirp[k];
            x[k] = a[k] * c * scale;
        }
    }
};

inline std::shared_ptr<const Plan> plan_for(std::size_t n) {
    static std::mutex mu;
    static std::unordered_map<std::size_t, std::shared_ptr<const Plan>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto p = std::make_shared<const Plan>(n);
    cache.emplace(n, p);
    return p;
}

} // namespace fft_detail

/// Unitary 1D transform in place.
inline void fft_inplace(std::vector<cdouble>& x, bool inverse = false) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("fft: empty input");
    fft_detail::plan_for(n)->transform(x.data(), inverse);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : x) v *= s;
}

/// Unitary DFT along the given axes (row-major layout).
inline CTensor fft(const CTensor& x, const std::vector<std::size_t>& dims, bool inverse = false) {
    if (!all_finite(x)) throw std::invalid_argument("fft: non-finite input");
    CTensor out = x;
    for (std::size_t axis : dims) {
        if (axis >= out.rank()) throw std::invalid_argument("fft: axis out of range");
        const std::size_t n = out.extent(axis);
        if (n < 1) throw std::invalid_argument("fft: empty axis");
        auto plan = fft_detail::plan_for(n);
        const double s = 1.0 / std::sqrt(static_cast<double>(n));

        std::size_t inner = 1;
        for (std::size_t a = axis + 1; a < out.rank(); ++a) inner *= out.extent(a);
        std::size_t outer = out.size() / (n * inner);

        std::vector<cdouble> line(n);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) {
                cdouble* base = out.data() + o * n * inner + i;
                for (std::size_t j = 0; j < n; ++j) line[j] = base[j * inner];
                plan->transform(line.data(), inverse);
                for (std::size_t j = 0; j < n; ++j) base[j * inner] = line[j] * s;
            }
        }
    }
    return out;
}

inline CTensor ifft(const CTensor& x, const std::vector<std::size_t>& dims) {
    return fft(x, dims, true);
}

/// Unitary DFT of a real vector.
inline std::vector<cdouble> fft_real_vec(const std::vector<double>& x) {
    std::vector<cdouble> c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c[i] = cdouble(x[i], 0.0);
    fft_inplace(c, false);
    return c;
}

/// Unitary 2D DFT of an n-by-n real image, flattened row-major.
inline std::vector<cdouble> fft2_real(const std::vector<double>& img, std::size_t n) {
    CTensor t({n, n});
    for (std::size_t i = 0; i < n * n; ++i) t[i] = cdouble(img[i], 0.0);
    CTensor f = fft(t, {0, 1}, false);
    return f.raw();
}

} // namespace omt
