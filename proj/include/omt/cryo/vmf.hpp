#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "omt/core/parallel.hpp"
#include "omt/core/rng.hpp"
#include "omt/cryo/rotation.hpp"

namespace omt {

struct VmfComponent {
    double weight = 1.0;
    Vec3 mu{0, 0, 1};
    double kappa = 0.0;
};

/// Mixture of von Mises-Fisher distributions on S^2. Weights are
/// nonnegative and sum to 1; mean directions are unit vectors.
struct VmfMixtureSpec {
    std::vector<VmfComponent> components;
};

inline void validate_vmf(const VmfMixtureSpec& spec) {
    if (spec.components.empty()) throw std::invalid_argument("vmf: empty mixture");
    double total = 0;
    for (const auto& c : spec.components) {
        if (c.weight < 0) throw std::invalid_argument("vmf: negative weight");
        if (c.kappa < 0) throw std::invalid_argument("vmf: negative concentration");
        if (std::abs(norm3(c.mu) - 1.0) > 1e-9)
            throw std::invalid_argument("vmf: mean direction must be unit length");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("vmf: weights must sum to 1");
}

/// Default rotation distribution: 8 equal-weight components with means at
/// the normalized cube corners, concentration 20.
inline VmfMixtureSpec default_vmf_mixture(double kappa = 20.0) {
    VmfMixtureSpec spec;
    const double s = 1.0 / std::sqrt(3.0);
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int sz : {-1, 1})
                spec.components.push_back({0.125, {sx * s, sy * s, sz * s}, kappa});
    return spec;
}

namespace vmf_detail {

/// Inverse CDF of cos(theta) for a single vMF component: the polar density
/// is proportional to exp(kappa*cos) on [-1, 1]. kappa = 0 is uniform.
inline double sample_cos(double kappa, double u) {
    if (kappa < 1e-12) return 2.0 * u - 1.0;
    double inner = u + (1.0 - u) * std::exp(-2.0 * kappa);
    double w = 1.0 + std::log(std::max(inner, 1e-300)) / kappa;
    return std::clamp(w, -1.0, 1.0);
}

inline Vec3 sample_direction(const VmfMixtureSpec& spec, double u_comp, double u_cos,
                             double u_azim) {
    std::size_t pick = spec.components.size() - 1;
    double acc = 0;
    for (std::size_t c = 0; c < spec.components.size(); ++c) {
        acc += spec.components[c].weight;
        if (u_comp < acc) {
            pick = c;
            break;
        }
    }
    const VmfComponent& comp = spec.components[pick];
    const double w = sample_cos(comp.kappa, u_cos);
    const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
    const double beta = 2.0 * pi * u_azim;
    // Tangent frame at mu: columns of the twist-free frame transport.
    Rotation frame = rotation_from_z(comp.mu);
    Vec3 t1{frame.at(0, 0), frame.at(1, 0), frame.at(2, 0)};
    Vec3 t2{frame.at(0, 1), frame.at(1, 1), frame.at(2, 1)};
    const double cb = std::cos(beta), sb = std::sin(beta);
    return {w * comp.mu[0] + r * (cb * t1[0] + sb * t2[0]),
            w * comp.mu[1] + r * (cb * t1[1] + sb * t2[1]),
            w * comp.mu[2] + r * (cb * t1[2] + sb * t2[2])};
}

} // namespace vmf_detail

/// N viewing directions from the mixture; draw i is addressed by counter so
/// the output is independent of evaluation order.
inline std::vector<Vec3> sample_directions(const VmfMixtureSpec& spec, std::size_t count,
                                           const SeededRng& rng) {
    validate_vmf(spec);
    std::vector<Vec3> out(count);
    parallel_blocks(count, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            out[i] = vmf_detail::sample_direction(spec, rng.uniform_at(4 * i),
                                                  rng.uniform_at(4 * i + 1),
                                                  rng.uniform_at(4 * i + 2));
    });
    return out;
}

/// Full rotations: vMF viewing direction composed with an independent
/// uniform in-plane angle.
inline std::vector<Rotation> sample_rotations(const VmfMixtureSpec& spec, std::size_t count,
                                              const SeededRng& rng) {
    validate_vmf(spec);
    std::vector<Rotation> out(count);
    parallel_blocks(count, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Vec3 d = vmf_detail::sample_direction(spec, rng.uniform_at(4 * i),
                                                  rng.uniform_at(4 * i + 1),
                                                  rng.uniform_at(4 * i + 2));
            double alpha = 2.0 * pi * rng.uniform_at(4 * i + 3);
            out[i] = rotation_from_z(d) * rotation_z(alpha);
        }
    });
    return out;
}

} // namespace omt
