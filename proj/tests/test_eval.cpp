// Volume alignment and shell-correlation evaluation tools.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "omt/core/rng.hpp"
#include "omt/cryo/quadrature.hpp"
#include "omt/cryo/rotation.hpp"
#include "omt/cryo/volume.hpp"
#include "omt/eval/align3d.hpp"
#include "omt/eval/fsc.hpp"

using namespace omt;

namespace {

double max_abs(const RTensor& t) {
    double m = 0;
    for (std::size_t i = 0; i < t.size(); ++i) m = std::max(m, std::abs(t[i]));
    return m;
}

double rel_l2(const RTensor& a, const RTensor& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

// Asymmetric compact three-blob mixture, well inside the box so the
// zero-outside resampling convention and the wrap-around rasterization
// agree to high accuracy.
GaussianVolumeSpec three_blobs() {
    GaussianVolumeSpec spec;
    spec.components = {{1.0, {0.12, 0.0, -0.05}, 0.08},
                       {0.7, {-0.10, 0.09, 0.04}, 0.09},
                       {0.5, {0.02, -0.13, 0.08}, 0.10}};
    return spec;
}

} // namespace

TEST_CASE("rotating a volume resamples it on the fixed box grid") {
    SECTION("the identity rotation is a no-op") {
        const std::size_t n = 9;
        RTensor v = rng_draw(SeededRng(3, "rotate-id"), Dist::gaussian, {n, n, n});
        RTensor out = rotate_volume(v, Rotation{});
        for (std::size_t i = 0; i < v.size(); ++i)
            REQUIRE(out[i] == Catch::Approx(v[i]).margin(1e-12));
    }

    SECTION("a quarter turn about z permutes the grid") {
        // R^T maps (x, y, z) to (y, -x, z) and the box grid x_j = -1/2 + j/n
        // satisfies -x_a = x_{n-a}, so rotated voxels are exact grid reads
        const std::size_t n = 9;
        RTensor v = rng_draw(SeededRng(4, "rotate-quarter"), Dist::gaussian, {n, n, n});
        Rotation R = rotation_axis_angle({0, 0, 1}, M_PI / 2.0);
        RTensor out = rotate_volume(v, R);
        const double big = max_abs(v);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t c = 0; c < n; ++c) {
                    if (a == 0) {
                        // -x_0 = +1/2 lies on the far open boundary
                        REQUIRE(std::abs(out.at3(a, b, c)) <= 1e-12 * big);
                    } else {
                        REQUIRE(out.at3(a, b, c) ==
                                Catch::Approx(v.at3(b, n - a, c)).margin(1e-12 * big));
                    }
                }
    }

    SECTION("rotating a rasterized mixture matches rasterizing the rotated mixture") {
        const std::size_t n = 25;
        GaussianVolumeSpec spec = three_blobs();
        Rotation R = rotation_axis_angle({0.48, -0.60, 0.64}, 0.9);

        GaussianVolumeSpec turned = spec;
        for (auto& c : turned.components) c.center = R.apply(c.center);

        RTensor a = rotate_volume(rasterize_real(spec, n), R);
        RTensor b = rasterize_real(turned, n);
        REQUIRE(rel_l2(a, b) <= 0.05);
    }

    SECTION("a centered ball is rotation invariant up to resampling error") {
        const std::size_t n = 21;
        GaussianVolumeSpec ball;
        ball.components = {{1.0, {0.0, 0.0, 0.0}, 0.15}};
        RTensor v = rasterize_real(ball, n);
        RTensor out = rotate_volume(v, rotation_axis_angle({0.6, 0.64, 0.48}, 1.2));
        REQUIRE(rel_l2(out, v) <= 0.02);
    }

    SECTION("non-cubic input is rejected") {
        RTensor bad({3, 3, 4}, 1.0);
        REQUIRE_THROWS_AS(rotate_volume(bad, Rotation{}), std::invalid_argument);
        RTensor flat({4, 4}, 1.0);
        REQUIRE_THROWS_AS(rotate_volume(flat, Rotation{}), std::invalid_argument);
    }
}

TEST_CASE("alignment searches rotations for the best volume overlay") {
    const std::size_t n = 15;
    RTensor v = rasterize_real(three_blobs(), n);

    SECTION("a rotation taken from the search grid is recovered exactly") {
        const std::vector<Rotation>& grid = dense_quadrature().rotations;
        const std::size_t pick = 17;
        RTensor u = rotate_volume(v, grid[pick]);
        Alignment best = align_volumes(u, v);
        REQUIRE(best.grid_index == pick);
        REQUIRE(best.rel_error <= 1e-12);
        // zero residual cannot be improved, so refinement keeps the winner
        for (std::size_t i = 0; i < 9; ++i) REQUIRE(best.rotation.m[i] == grid[pick].m[i]);
    }

    SECTION("an off-grid rotation still aligns to a small residual") {
        Rotation R = rotation_axis_angle({0.28, 0.8, -0.53}, 0.77);
        RTensor u = rotate_volume(v, R);
        double rel = relative_error_volume(u, v);
        REQUIRE(rel <= 0.35);
    }

    SECTION("amplitude mismatch is not absorbed by the rotation search") {
        RTensor u = v;
        for (std::size_t i = 0; i < u.size(); ++i) u[i] *= 2.0;
        std::vector<Rotation> grid = {Rotation{}};
        double rel = relative_error_volume(u, v, grid);
        REQUIRE(rel == Catch::Approx(1.0).margin(1e-9));
    }

    SECTION("degenerate inputs are rejected") {
        RTensor z({n, n, n}, 0.0);
        REQUIRE_THROWS_AS(align_volumes(v, z), std::invalid_argument);
        REQUIRE_THROWS_AS(align_volumes(v, v, {}), std::invalid_argument);
        RTensor flat({n, n}, 1.0);
        REQUIRE_THROWS_AS(align_volumes(flat, flat, {Rotation{}}), std::invalid_argument);
        RTensor other({n + 2, n + 2, n + 2}, 1.0);
        REQUIRE_THROWS_AS(align_volumes(other, v, {Rotation{}}), std::invalid_argument);
    }
}

TEST_CASE("shell correlation compares volumes frequency band by band") {
    SECTION("a volume correlates perfectly with itself") {
        const std::size_t n = 8;
        RTensor u = rng_draw(SeededRng(6, "fsc-self"), Dist::gaussian, {n, n, n});
        FscCurve curve = fsc(u, u, 1.25);
        REQUIRE(curve.n == n);
        REQUIRE(curve.voxel == 1.25);
        REQUIRE(curve.shell_radius.size() == n / 2 + 1);
        for (std::size_t s = 0; s < curve.correlation.size(); ++s) {
            REQUIRE(curve.shell_radius[s] == double(s));
            REQUIRE(curve.correlation[s] == Catch::Approx(1.0).margin(1e-12));
        }
        REQUIRE(fsc_resolution(curve) == 2.0 * 1.25);
    }

    SECTION("the curve is symmetric in its arguments") {
        const std::size_t n = 8;
        RTensor u = rng_draw(SeededRng(7, "fsc-u"), Dist::gaussian, {n, n, n});
        RTensor v = rng_draw(SeededRng(8, "fsc-v"), Dist::gaussian, {n, n, n});
        FscCurve ab = fsc(u, v);
        FscCurve ba = fsc(v, u);
        for (std::size_t s = 0; s < ab.correlation.size(); ++s)
            REQUIRE(ab.correlation[s] == Catch::Approx(ba.correlation[s]).margin(1e-12));
    }

    SECTION("independent noise decorrelates away from the lowest shells") {
        const std::size_t n = 32;
        RTensor u = rng_draw(SeededRng(9, "fsc-noise-a"), Dist::gaussian, {n, n, n});
        RTensor v = rng_draw(SeededRng(10, "fsc-noise-b"), Dist::gaussian, {n, n, n});
        FscCurve curve = fsc(u, v);
        for (std::size_t s = 4; s < curve.correlation.size(); ++s)
            REQUIRE(std::abs(curve.correlation[s]) <= 0.2);
    }

    SECTION("low shells survive rotation while resampling damps the top end") {
        const std::size_t n = 25;
        RTensor v = rasterize_real(three_blobs(), n);
        RTensor u = rotate_volume(v, rotation_axis_angle({0, 0, 1}, M_PI / 2.0));
        // a quarter turn is an exact grid permutation, so only the
        // radially-binned phases move, not the shell power
        FscCurve self = fsc(rotate_volume(v, Rotation{}), v);
        for (std::size_t s = 0; s + 1 < self.correlation.size(); ++s)
            REQUIRE(self.correlation[s] >= 0.999);
        FscCurve curve = fsc(u, rotate_volume(u, Rotation{}));
        for (std::size_t s = 0; s + 1 < curve.correlation.size(); ++s)
            REQUIRE(curve.correlation[s] >= 0.999);
    }

    SECTION("an anti-correlated pair is unresolved") {
        const std::size_t n = 8;
        RTensor u = rng_draw(SeededRng(11, "fsc-anti"), Dist::gaussian, {n, n, n});
        RTensor w = u;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = -w[i];
        FscCurve curve = fsc(u, w);
        for (double c : curve.correlation) REQUIRE(c == Catch::Approx(-1.0).margin(1e-12));
        REQUIRE(fsc_resolution(curve) == std::numeric_limits<double>::infinity());
    }

    SECTION("the threshold crossing interpolates linearly between shells") {
        FscCurve curve;
        curve.n = 10;
        curve.voxel = 0.1;
        curve.shell_radius = {0.0, 1.0, 2.0, 3.0};
        curve.correlation = {1.0, 0.9, 0.75, 0.25};
        // crossing halfway between shells 2 and 3: r* = 2.5
        REQUIRE(fsc_resolution(curve) == Catch::Approx(10 * 0.1 / 2.5).margin(1e-12));
        // at a 0.8 threshold the crossing lands at r* = 5/3
        REQUIRE(fsc_resolution(curve, 0.8) == Catch::Approx(1.0 / (5.0 / 3.0)).margin(1e-12));
    }

    SECTION("malformed inputs are rejected") {
        RTensor bad({3, 3, 4}, 1.0);
        REQUIRE_THROWS_AS(fsc(bad, bad), std::invalid_argument);
        RTensor a({4, 4, 4}, 1.0);
        RTensor b({5, 5, 5}, 1.0);
        REQUIRE_THROWS_AS(fsc(a, b), std::invalid_argument);
        REQUIRE_THROWS_AS(fsc(a, a, 0.0), std::invalid_argument);
        REQUIRE_THROWS_AS(fsc(a, a, -1.0), std::invalid_argument);
        RTensor tiny({1, 1, 1}, 1.0);
        REQUIRE_THROWS_AS(fsc(tiny, tiny), std::invalid_argument);
        REQUIRE_THROWS_AS(fsc_resolution(FscCurve{}), std::invalid_argument);
    }
}
