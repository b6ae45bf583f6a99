#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "omt/core/parallel.hpp"
#include "omt/core/tensor.hpp"
#include "omt/cryo/moments2d.hpp"
#include "omt/cryo/neural_volume.hpp"
#include "omt/cryo/quadrature.hpp"
#include "omt/cryo/slice.hpp"
#include "omt/cryo/vmf.hpp"
#include "omt/cryo/volume.hpp"

namespace omt {

/// Probability mass over the rotations of a quadrature set.
struct QuadratureDensity {
    std::vector<double> mass;

    std::size_t size() const { return mass.size(); }

    void check() const {
        if (mass.empty()) throw std::invalid_argument("quadrature density: empty");
        double sum = 0;
        for (double m : mass) {
            if (!(m >= 0)) throw std::invalid_argument("quadrature density: negative mass");
            sum += m;
        }
        if (std::abs(sum - 1.0) > 1e-10)
            throw std::invalid_argument("quadrature density: masses must sum to 1");
    }

    static QuadratureDensity uniform(std::size_t count) {
        if (count == 0) throw std::invalid_argument("quadrature density: empty");
        QuadratureDensity z;
        z.mass.assign(count, 1.0 / double(count));
        return z;
    }
};

/// Evaluates a von Mises-Fisher mixture over viewing directions on the
/// atoms of a quadrature set and normalizes the result into a density.
/// In-plane angles are weighted uniformly, matching the sampler.
inline QuadratureDensity project_vmf_density(const VmfMixtureSpec& spec,
                                             const QuadratureSet& quad) {
    validate_vmf(spec);
    QuadratureDensity z;
    z.mass.resize(quad.size());
    double sum = 0;
    for (std::size_t j = 0; j < quad.size(); ++j) {
        const Rotation& R = quad.rotations[j];
        // viewing direction is the image of the pole, i.e. the third column
        const Vec3 d{R.at(0, 2), R.at(1, 2), R.at(2, 2)};
        double val = 0;
        for (const auto& c : spec.components) {
            if (c.kappa < 1e-12) {
                val += c.weight / (4.0 * pi);
            } else {
                // kappa e^{kappa (mu.d - 1)} / (2 pi (1 - e^{-2 kappa})),
                // the density written without overflowing sinh
                double norm = c.kappa / (2.0 * pi * (1.0 - std::exp(-2.0 * c.kappa)));
                val += c.weight * norm * std::exp(c.kappa * (dot3(c.mu, d) - 1.0));
            }
        }
        z.mass[j] = val;
        sum += val;
    }
    if (!(sum > 0)) throw std::invalid_argument("quadrature density: zero total mass");
    for (double& m : z.mass) m /= sum;
    return z;
}

/// Slice stack S[j] = flattened central slice of rotation j, shape [|Q|, n^2].
inline CTensor slice_matrix(const FourierFn& fn, const QuadratureSet& quad, std::size_t n) {
    if (quad.size() == 0) throw std::invalid_argument("slice matrix: empty quadrature");
    if (n == 0) throw std::invalid_argument("slice matrix: empty grid");
    const std::size_t n2 = n * n;
    CTensor S({quad.size(), n2});
    parallel_blocks(quad.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) {
            CTensor s = slice_eval(fn, quad.rotations[j], n);
            for (std::size_t p = 0; p < n2; ++p) S.at2(j, p) = s[p];
        }
    });
    return S;
}

/// Slice stack of a neural volume, evaluated as one batched point list.
inline CTensor slice_matrix(const NeuralVolume& vol, const QuadratureSet& quad, std::size_t n,
                            const std::vector<double>& latent = {}) {
    if (quad.size() == 0) throw std::invalid_argument("slice matrix: empty quadrature");
    if (n == 0) throw std::invalid_argument("slice matrix: empty grid");
    const std::size_t n2 = n * n;
    RTensor pts({quad.size() * n2, 3});
    for (std::size_t j = 0; j < quad.size(); ++j) {
        RTensor p = slice_points(quad.rotations[j], n);
        for (std::size_t i = 0; i < n2; ++i)
            for (std::size_t d = 0; d < 3; ++d) pts.at2(j * n2 + i, d) = p.at2(i, d);
    }
    std::vector<cdouble> vals = eval_neural_volume(vol, pts, latent);
    CTensor S({quad.size(), n2});
    for (std::size_t i = 0; i < vals.size(); ++i) S[i] = vals[i];
    return S;
}

/// First two image moments of the discrete mixture (Q, z) in the unitary
/// 2D Fourier basis: m1 = sum_j z_j S_j and m2 = sum_j z_j S_j S_j^H.
/// Accumulation order is fixed (ascending j), so results do not depend on
/// the worker count. `n` records the pixel grid edge; the slice width may
/// be smaller than n^2 when the stack was restricted to a frequency mask.
inline CryoMomentPair quadrature_moments(const CTensor& S, const QuadratureDensity& z,
                                         std::size_t n) {
    if (S.rank() != 2) throw std::invalid_argument("quadrature moments: slice stack rank");
    if (S.extent(0) != z.size())
        throw std::invalid_argument("quadrature moments: dimension mismatch");
    if (n == 0) throw std::invalid_argument("quadrature moments: empty grid");
    z.check();
    const std::size_t J = S.extent(0);
    const std::size_t w = S.extent(1);
    CryoMomentPair out;
    out.n = n;
    out.kind = MomentKind::analytic;
    out.sigma = 0.0;
    out.count = 0;
    out.m1 = CTensor({w}, cdouble(0, 0));
    out.m2 = CTensor({w, w}, cdouble(0, 0));
    for (std::size_t j = 0; j < J; ++j) {
        const double zj = z.mass[j];
        if (zj == 0) continue;
        const cdouble* row = S.data() + j * w;
        for (std::size_t a = 0; a < w; ++a) {
            out.m1[a] += zj * row[a];
            const cdouble za = zj * row[a];
            cdouble* m2row = out.m2.data() + a * w;
            for (std::size_t b = 0; b < w; ++b) m2row[b] += za * std::conj(row[b]);
        }
    }
    return out;
}

inline CryoMomentPair quadrature_moments(const FourierFn& fn, const QuadratureDensity& z,
                                         const QuadratureSet& quad, std::size_t n) {
    return quadrature_moments(slice_matrix(fn, quad, n), z, n);
}

} // namespace omt
