#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "omt/core/parallel.hpp"
#include "omt/core/rng.hpp"
#include "omt/core/tensor.hpp"
#include "omt/mra/mixture.hpp"
#include "omt/mra/moments.hpp"
#include "omt/mra_enc/encoder.hpp"

namespace omt {

// Supervised pairs for the moment encoder: inputs are the noise-free
// moments of a randomly drawn (signal, density) pair from a mixture family;
// targets are the density grid and the signal spectrum themselves.

struct DatasetFamily {
    std::size_t signal_components = 1;
    std::size_t density_components = 1;
    double stddev_lo = 0.05;
    double stddev_hi = 0.2;
};

struct MraDataset {
    std::size_t n = 0;
    std::size_t count = 0;
    RTensor inputs_m1;   // [count, 2, n]
    RTensor inputs_m2;   // [count, 2n, n]
    RTensor targets_rho; // [count, n]
    RTensor targets_v;   // [count, 2n]  (re then im of the spectrum)
};

/// Draw `count` pairs; generation is counter-addressed per index, so the
/// result is independent of the worker count.
inline MraDataset make_dataset(const DatasetFamily& family, std::size_t count, std::size_t n,
                               std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("make_dataset: count must be >= 1");
    if (n < 3) throw std::invalid_argument("make_dataset: n must be >= 3");
    MraDataset ds;
    ds.n = n;
    ds.count = count;
    ds.inputs_m1 = RTensor({count, 2, n});
    ds.inputs_m2 = RTensor({count, 2 * n, n});
    ds.targets_rho = RTensor({count, n});
    ds.targets_v = RTensor({count, 2 * n});
    SeededRng rng(seed, "mra-dataset");
    parallel_blocks(count, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            RngCursor sc{rng.substream(2 * i)};
            RngCursor dc{rng.substream(2 * i + 1)};
            MixtureSpec1D vs = draw_mixture_spec(sc, family.signal_components, family.stddev_lo,
                                                 family.stddev_hi);
            MixtureSpec1D rs = draw_mixture_spec(dc, family.density_components, family.stddev_lo,
                                                 family.stddev_hi);
            // translating the density by delta and the signal by -delta
            // leaves the moments unchanged, so without a fixed frame the
            // moment-to-target map is many-to-one; pin it by centering the
            // heaviest density component (a property of the density itself,
            // not of the component order)
            std::size_t heavy = 0;
            for (std::size_t c = 1; c < rs.components.size(); ++c)
                if (rs.components[c].weight > rs.components[heavy].weight) heavy = c;
            const double delta = rs.components[heavy].mean;
            auto wrap_half = [](double x) { return x - std::floor(x + 0.5); };
            for (auto& c : rs.components) c.mean = wrap_half(c.mean - delta);
            for (auto& c : vs.components) c.mean = wrap_half(c.mean + delta);
            MraSignal v = mixture_signal(vs, n);
            MraDensity rho = mixture_density(rs, n);
            MomentPair mom = analytic_moments(v, rho);
            RTensor p1 = pack_m1(mom.m1);
            RTensor p2 = pack_m2(mom.m2);
            std::copy(p1.raw().begin(), p1.raw().end(),
                      ds.inputs_m1.raw().begin() + long(i * 2 * n));
            std::copy(p2.raw().begin(), p2.raw().end(),
                      ds.inputs_m2.raw().begin() + long(i * 2 * n * n));
            for (std::size_t j = 0; j < n; ++j) {
                ds.targets_rho[i * n + j] = rho.mass[j];
                ds.targets_v[i * 2 * n + j] = v.values_fourier[j].real();
                ds.targets_v[i * 2 * n + n + j] = v.values_fourier[j].imag();
            }
        }
    });
    return ds;
}

/// Reassemble the stored complex moments for row i.
inline MomentPair dataset_moments(const MraDataset& ds, std::size_t i) {
    const std::size_t n = ds.n;
    MomentPair mp;
    mp.n = n;
    mp.kind = MomentKind::analytic;
    mp.m1 = CTensor({n});
    mp.m2 = CTensor({n, n});
    const double* r1 = ds.inputs_m1.raw().data() + i * 2 * n;
    for (std::size_t j = 0; j < n; ++j) mp.m1[j] = cdouble(r1[j], r1[n + j]);
    const double* r2 = ds.inputs_m2.raw().data() + i * 2 * n * n;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            mp.m2[a * n + b] = cdouble(r2[a * n + b], r2[(n + a) * n + b]);
    return mp;
}

inline std::vector<double> dataset_target_rho(const MraDataset& ds, std::size_t i) {
    std::vector<double> out(ds.n);
    for (std::size_t j = 0; j < ds.n; ++j) out[j] = ds.targets_rho[i * ds.n + j];
    return out;
}

inline std::vector<cdouble> dataset_target_v(const MraDataset& ds, std::size_t i) {
    return unpack_v(ds.targets_v.raw().data() + i * 2 * ds.n, ds.n);
}

} // namespace omt
