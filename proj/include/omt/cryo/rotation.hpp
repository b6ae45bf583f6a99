#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "omt/core/grids.hpp"

namespace omt {

using Vec3 = std::array<double, 3>;

inline double dot3(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Vec3 cross3(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }

/// Proper rotation of R^3, stored row-major. Members keep RᵀR = I and
/// det = +1 to 1e-12; `valid` audits both.
struct Rotation {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double at(std::size_t r, std::size_t c) const { return m[3 * r + c]; }
    double& at(std::size_t r, std::size_t c) { return m[3 * r + c]; }

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
                m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
                m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
    }

    /// Rᵀ v (the inverse rotation for a valid member).
    Vec3 apply_transpose(const Vec3& v) const {
        return {m[0] * v[0] + m[3] * v[1] + m[6] * v[2],
                m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
                m[2] * v[0] + m[5] * v[1] + m[8] * v[2]};
    }

    Rotation transpose() const {
        Rotation r;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
        return r;
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    /// Max deviation of RᵀR from I plus |det - 1|.
    double orthogonality_defect() const {
        double worst = 0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double s = 0;
                for (std::size_t k = 0; k < 3; ++k) s += at(k, i) * at(k, j);
                worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
            }
        return std::max(worst, std::abs(det() - 1.0));
    }

    bool valid(double tol = 1e-12) const { return orthogonality_defect() <= tol; }
};

inline Rotation operator*(const Rotation& a, const Rotation& b) {
    Rotation r;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 3; ++k) s += a.at(i, k) * b.at(k, j);
            r.at(i, j) = s;
        }
    return r;
}

/// Rotation about the z axis by `alpha` radians.
inline Rotation rotation_z(double alpha) {
    Rotation r;
    const double c = std::cos(alpha), s = std::sin(alpha);
    r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return r;
}

/// Rodrigues rotation about a unit axis.
inline Rotation rotation_axis_angle(const Vec3& axis, double angle) {
    const double nrm = norm3(axis);
    if (!(nrm > 0)) throw std::invalid_argument("rotation_axis_angle: zero axis");
    const double ux = axis[0] / nrm, uy = axis[1] / nrm, uz = axis[2] / nrm;
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Rotation r;
    r.m = {c + ux * ux * t,      ux * uy * t - uz * s, ux * uz * t + uy * s,
           uy * ux * t + uz * s, c + uy * uy * t,      uy * uz * t - ux * s,
           uz * ux * t - uy * s, uz * uy * t + ux * s, c + uz * uz * t};
    return r;
}

/// The rotation taking the +z axis to the unit direction d, with no
/// in-plane twist (geodesic transport). Stable at both poles.
inline Rotation rotation_from_z(const Vec3& d) {
    const double nrm = norm3(d);
    if (std::abs(nrm - 1.0) > 1e-9)
        throw std::invalid_argument("rotation_from_z: direction must be unit length");
    const Vec3 u{d[0] / nrm, d[1] / nrm, d[2] / nrm};
    if (u[2] > 1.0 - 1e-14) return Rotation{};
    if (u[2] < -1.0 + 1e-14) return rotation_axis_angle({1, 0, 0}, pi);
    const Vec3 axis = cross3({0, 0, 1}, u);
    const double angle = std::acos(std::clamp(u[2], -1.0, 1.0));
    return rotation_axis_angle(axis, angle);
}

} // namespace omt
