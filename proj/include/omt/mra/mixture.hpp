#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "omt/core/grids.hpp"
#include "omt/core/rng.hpp"

namespace omt {

// Wrapped Gaussian mixtures on the periodic interval [-1/2, 1/2). Used both
// as signals (raw pdf values on the grid) and as shift densities (values
// normalized to unit total mass).

struct MixtureComponent {
    double weight = 1.0;
    double mean = 0.0;   // in [-1/2, 1/2)
    double stddev = 0.1;
};

struct MixtureSpec1D {
    std::vector<MixtureComponent> components;
    bool wrap = true;

    void validate() const {
        if (components.empty()) throw std::invalid_argument("mixture: no components");
        double wsum = 0;
        for (const auto& c : components) {
            if (c.stddev <= 0) throw std::invalid_argument("mixture: stddev must be positive");
            if (c.weight < 0) throw std::invalid_argument("mixture: negative weight");
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-9) throw std::invalid_argument("mixture: weights must sum to 1");
    }
};

inline constexpr int mixture_wrap_terms = 5; // period images on each side

/// Mixture pdf at a point, wrapping each Gaussian over +-5 period images.
inline double mixture_pdf(const MixtureSpec1D& spec, double x) {
    double acc = 0;
    const int R = spec.wrap ? mixture_wrap_terms : 0;
    for (const auto& c : spec.components) {
        double comp = 0;
        for (int r = -R; r <= R; ++r) {
            double d = x - c.mean + double(r);
            comp += std::exp(-0.5 * d * d / (c.stddev * c.stddev));
        }
        acc += c.weight * comp / (c.stddev * std::sqrt(2.0 * pi));
    }
    return acc;
}

/// Pdf values on the n-point grid of [-1/2, 1/2).
inline std::vector<double> mixture_values(const MixtureSpec1D& spec, std::size_t n) {
    spec.validate();
    auto xs = space_grid(n);
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = mixture_pdf(spec, xs[j]);
    return out;
}

/// Grid values normalized to sum to 1, for use as a shift density.
inline std::vector<double> mixture_mass(const MixtureSpec1D& spec, std::size_t n) {
    auto v = mixture_values(spec, n);
    double s = 0;
    for (double x : v) s += x;
    if (s <= 0) throw std::invalid_argument("mixture: zero total mass on grid");
    for (double& x : v) x /= s;
    return v;
}

/// Random mixture spec: weights uniform then normalized, means uniform over
/// the interval, stddevs uniform in [lo, hi] (defaults cover visually sharp
/// through broad bumps at typical grid sizes).
inline MixtureSpec1D draw_mixture_spec(RngCursor& cur, std::size_t ncomp,
                                       double stddev_lo = 0.05, double stddev_hi = 0.2) {
    if (ncomp == 0) throw std::invalid_argument("mixture: ncomp must be positive");
    if (stddev_lo <= 0 || stddev_hi < stddev_lo)
        throw std::invalid_argument("mixture: bad stddev range");
    MixtureSpec1D spec;
    spec.components.resize(ncomp);
    double wsum = 0;
    for (auto& c : spec.components) {
        c.weight = 0.2 + cur.uniform(); // bounded away from 0 so no component vanishes
        wsum += c.weight;
        c.mean = cur.uniform(-0.5, 0.5);
        c.stddev = cur.uniform(stddev_lo, stddev_hi);
    }
    for (auto& c : spec.components) c.weight /= wsum;
    return spec;
}

} // namespace omt
