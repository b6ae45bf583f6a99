#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/core/tensor.hpp"

namespace omt {

/// Fourier shell correlation of two volumes over integer-radius shells.
struct FscCurve {
    std::size_t n = 0;                // grid edge
    double voxel = 1.0;               // edge length of one voxel, Angstrom
    std::vector<double> shell_radius; // bin centers 0, 1, ... in grid units
    std::vector<double> correlation;  // clamped to [-1, 1]
};

inline FscCurve fsc(const RTensor& u, const RTensor& v, double voxel = 1.0) {
    if (u.rank() != 3 || u.extent(0) != u.extent(1) || u.extent(1) != u.extent(2))
        throw std::invalid_argument("fsc: volumes must be cubic");
    u.require_same_shape(v);
    if (!(voxel > 0)) throw std::invalid_argument("fsc: voxel size must be positive");
    const std::size_t n = u.extent(0);
    if (n < 2) throw std::invalid_argument("fsc: grid too small");

    auto to_fourier = [n](const RTensor& x) {
        CTensor c({n, n, n});
        for (std::size_t i = 0; i < x.size(); ++i) c[i] = cdouble(x[i], 0.0);
        return fft(c, {0, 1, 2});
    };
    const CTensor fu = to_fourier(u);
    const CTensor fv = to_fourier(v);

    const std::size_t shells = n / 2 + 1;
    std::vector<double> cross(shells, 0.0), pu(shells, 0.0), pv(shells, 0.0);
    std::vector<std::size_t> members(shells, 0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c) {
                const double ka = double(signed_freq_index(a, n));
                const double kb = double(signed_freq_index(b, n));
                const double kc = double(signed_freq_index(c, n));
                const double r = std::sqrt(ka * ka + kb * kb + kc * kc);
                const std::size_t shell = std::size_t(std::llround(r));
                if (shell >= shells) continue;
                const cdouble x = fu[(a * n + b) * n + c];
                const cdouble y = fv[(a * n + b) * n + c];
                cross[shell] += (x * std::conj(y)).real();
                pu[shell] += std::norm(x);
                pv[shell] += std::norm(y);
                members[shell] += 1;
            }

    FscCurve curve;
    curve.n = n;
    curve.voxel = voxel;
    curve.shell_radius.resize(shells);
    curve.correlation.resize(shells);
    for (std::size_t s = 0; s < shells; ++s) {
        if (members[s] == 0) throw std::runtime_error("fsc: empty shell");
        curve.shell_radius[s] = double(s);
        const double den = std::sqrt(pu[s] * pv[s]);
        double corr = den > 1e-300 ? cross[s] / den : 0.0;
        curve.correlation[s] = std::clamp(corr, -1.0, 1.0);
    }
    return curve;
}

/// Resolution in Angstrom at the given correlation threshold: n*voxel / r*
/// where r* is the first crossing (linear interpolation between shells).
/// Curves that never drop below the threshold report the Nyquist value
/// 2*voxel; a curve already below it at the zero shell is unresolved and
/// reports infinity.
inline double fsc_resolution(const FscCurve& curve, double threshold = 0.5) {
    if (curve.correlation.empty() || curve.n == 0)
        throw std::invalid_argument("fsc resolution: empty curve");
    if (curve.correlation[0] < threshold) return std::numeric_limits<double>::infinity();
    for (std::size_t s = 1; s < curve.correlation.size(); ++s) {
        if (curve.correlation[s] < threshold) {
            const double c0 = curve.correlation[s - 1];
            const double c1 = curve.correlation[s];
            const double rstar = curve.shell_radius[s - 1] +
                                 (c0 - threshold) / (c0 - c1) *
                                     (curve.shell_radius[s] - curve.shell_radius[s - 1]);
            return double(curve.n) * curve.voxel / rstar;
        }
    }
    return 2.0 * curve.voxel;
}

} // namespace omt
