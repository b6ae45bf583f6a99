#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "omt/core/grids.hpp"
#include "omt/core/parallel.hpp"
#include "omt/core/tensor.hpp"
#include "omt/cryo/quadrature.hpp"
#include "omt/cryo/rotation.hpp"

namespace omt {

/// Resamples a cubic volume rotated by R: the output voxel at position x
/// holds v(R^T x), trilinear over the box [-1/2,1/2]^3 and zero outside.
inline RTensor rotate_volume(const RTensor& v, const Rotation& R) {
    if (v.rank() != 3 || v.extent(0) != v.extent(1) || v.extent(1) != v.extent(2))
        throw std::invalid_argument("rotate: volume must be cubic");
    const std::size_t n = v.extent(0);
    RTensor out({n, n, n}, 0.0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c) {
                const Vec3 x{-0.5 + double(a) / double(n), -0.5 + double(b) / double(n),
                             -0.5 + double(c) / double(n)};
                const Vec3 y = R.apply_transpose(x);
                // fractional grid coordinates of the source point
                const double g[3] = {(y[0] + 0.5) * double(n), (y[1] + 0.5) * double(n),
                                     (y[2] + 0.5) * double(n)};
                double w[3][2];
                long base[3];
                bool inside = true;
                for (int d = 0; d < 3; ++d) {
                    const double f = std::floor(g[d]);
                    base[d] = long(f);
                    w[d][1] = g[d] - f;
                    w[d][0] = 1.0 - w[d][1];
                    if (base[d] < -1 || base[d] > long(n) - 1) inside = false;
                }
                if (!inside) continue;
                double acc = 0;
                for (int da = 0; da < 2; ++da)
                    for (int db = 0; db < 2; ++db)
                        for (int dc = 0; dc < 2; ++dc) {
                            const long ia = base[0] + da;
                            const long ib = base[1] + db;
                            const long ic = base[2] + dc;
                            if (ia < 0 || ib < 0 || ic < 0 || ia >= long(n) || ib >= long(n) ||
                                ic >= long(n))
                                continue;
                            acc += w[0][da] * w[1][db] * w[2][dc] *
                                   v.at3(std::size_t(ia), std::size_t(ib), std::size_t(ic));
                        }
                out.at3(a, b, c) = acc;
            }
    return out;
}

struct Alignment {
    Rotation rotation;      // applied to the second volume
    double rel_error = 0;   // ||R(v) - u||_F / ||v||_F after alignment
    std::size_t grid_index = 0;
};

namespace eval_detail {

inline double sq_distance(const RTensor& a, const RTensor& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

} // namespace eval_detail

/// Finds the rotation of v best matching u: brute force over the search
/// grid, then one refinement sweep over a 3x3x3 axis-angle cube (half step
/// 0.15 rad) around the winner. Ties keep the lowest grid index.
inline Alignment align_volumes(const RTensor& u, const RTensor& v,
                               const std::vector<Rotation>& grid) {
    if (grid.empty()) throw std::invalid_argument("align: empty search grid");
    if (u.rank() != 3 || v.rank() != 3)
        throw std::invalid_argument("align: volumes must be rank 3");
    u.require_same_shape(v);
    double vnorm2 = 0;
    for (std::size_t i = 0; i < v.size(); ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 <= 1e-300) throw std::invalid_argument("align: zero reference norm");

    std::vector<double> errs(grid.size());
    parallel_blocks(grid.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j)
            errs[j] = eval_detail::sq_distance(rotate_volume(v, grid[j]), u);
    });
    std::size_t best = 0;
    for (std::size_t j = 1; j < grid.size(); ++j)
        if (errs[j] < errs[best]) best = j;

    Rotation best_rot = grid[best];
    double best_err = errs[best];
    const double h = 0.15; // refinement half step, radians
    for (int da = -1; da <= 1; ++da)
        for (int db = -1; db <= 1; ++db)
            for (int dc = -1; dc <= 1; ++dc) {
                if (da == 0 && db == 0 && dc == 0) continue;
                const Vec3 axis{h * da, h * db, h * dc};
                const double angle = norm3(axis);
                const Rotation cand =
                    rotation_axis_angle({axis[0] / angle, axis[1] / angle, axis[2] / angle},
                                        angle) *
                    grid[best];
                const double e = eval_detail::sq_distance(rotate_volume(v, cand), u);
                if (e < best_err) {
                    best_err = e;
                    best_rot = cand;
                }
            }

    Alignment out;
    out.rotation = best_rot;
    out.rel_error = std::sqrt(best_err / vnorm2);
    out.grid_index = best;
    return out;
}

inline Alignment align_volumes(const RTensor& u, const RTensor& v) {
    return align_volumes(u, v, dense_quadrature().rotations);
}

/// Rotation-invariant relative error: min_R ||R(v) - u||_F / ||v||_F over
/// the search grid (plus local refinement).
inline double relative_error_volume(const RTensor& u, const RTensor& v,
                                    const std::vector<Rotation>& grid) {
    return align_volumes(u, v, grid).rel_error;
}

inline double relative_error_volume(const RTensor& u, const RTensor& v) {
    return align_volumes(u, v).rel_error;
}

} // namespace omt
