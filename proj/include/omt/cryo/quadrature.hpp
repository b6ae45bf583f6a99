#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "omt/core/grids.hpp"
#include "omt/cryo/design_tables.hpp"
#include "omt/cryo/rotation.hpp"

namespace omt {

/// A deterministic rotation set: q1 viewing directions, each combined with
/// q2 equispaced in-plane angles. design_degree records the exactness degree
/// of the direction set (0 for the Fibonacci fallback, which loses the
/// harmonic-integration guarantee).
struct QuadratureSet {
    std::vector<Rotation> rotations;
    std::size_t q1 = 0;
    std::size_t q2 = 0;
    int design_degree = 0;

    std::size_t size() const { return rotations.size(); }
};

/// Viewing-direction set of q1 points: a shipped spherical design when one
/// exists for q1, otherwise a Fibonacci lattice. Returns the exactness
/// degree through `degree` (0 for the fallback).
inline std::vector<Vec3> direction_set(std::size_t q1, int* degree = nullptr) {
    std::vector<Vec3> pts;
    pts.reserve(q1);
    int deg = 0;
    if (q1 == design_tables::design36_count) {
        for (std::size_t i = 0; i < q1; ++i)
            pts.push_back({design_tables::design36[i][0], design_tables::design36[i][1],
                           design_tables::design36[i][2]});
        deg = design_tables::design36_degree;
    } else if (q1 == design_tables::design100_count) {
        for (std::size_t i = 0; i < q1; ++i)
            pts.push_back({design_tables::design100[i][0], design_tables::design100[i][1],
                           design_tables::design100[i][2]});
        deg = design_tables::design100_degree;
    } else {
        if (q1 == 0) throw std::invalid_argument("direction_set: q1 must be >= 1");
        const double golden = pi * (3.0 - std::sqrt(5.0));
        for (std::size_t i = 0; i < q1; ++i) {
            double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(q1);
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            double phi = golden * static_cast<double>(i);
            pts.push_back({r * std::cos(phi), r * std::sin(phi), z});
        }
    }
    if (degree) *degree = deg;
    return pts;
}

/// Rotations R = R_dir(d) * R_z(2*pi*a/q2) for every direction d and
/// in-plane index a; each maps +z to d.
inline QuadratureSet build_quadrature(const std::vector<Vec3>& directions, std::size_t q2,
                                      int design_degree = 0) {
    if (directions.empty()) throw std::invalid_argument("build_quadrature: no directions");
    if (q2 < 1) throw std::invalid_argument("build_quadrature: q2 must be >= 1");
    QuadratureSet qs;
    qs.q1 = directions.size();
    qs.q2 = q2;
    qs.design_degree = design_degree;
    qs.rotations.reserve(qs.q1 * q2);
    for (const Vec3& d : directions) {
        if (std::abs(norm3(d) - 1.0) > 1e-9)
            throw std::invalid_argument("build_quadrature: non-unit design point");
        Rotation rd = rotation_from_z(d);
        for (std::size_t a = 0; a < q2; ++a) {
            double alpha = 2.0 * pi * static_cast<double>(a) / static_cast<double>(q2);
            qs.rotations.push_back(rd * rotation_z(alpha));
        }
    }
    return qs;
}

inline QuadratureSet build_quadrature(std::size_t q1, std::size_t q2) {
    int deg = 0;
    auto dirs = direction_set(q1, &deg);
    return build_quadrature(dirs, q2, deg);
}

/// Desk-scale default: 36 directions x 8 in-plane angles = 288 rotations.
inline QuadratureSet desk_quadrature() { return build_quadrature(36, 8); }

/// Dense set: 100 directions x 12 in-plane angles = 1200 rotations.
inline QuadratureSet dense_quadrature() { return build_quadrature(100, 12); }

} // namespace omt
