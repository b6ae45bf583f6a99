#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstring>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/core/parallel.hpp"
#include "omt/core/rng.hpp"
#include "omt/cryo/moments2d.hpp"
#include "omt/cryo/quadrature.hpp"
#include "omt/cryo/rotation.hpp"
#include "omt/cryo/slice.hpp"
#include "omt/cryo/vmf.hpp"
#include "omt/cryo/volume.hpp"

using namespace omt;

namespace {

// ---- independent spherical-harmonic oracle -------------------------------

/// Associated Legendre P_l^m via the standard three-term recurrence,
/// Condon-Shortley phase included.
double assoc_legendre(int l, int m, double x) {
    double pmm = 1.0;
    if (m > 0) {
        double somx2 = std::sqrt((1.0 - x) * (1.0 + x));
        double fact = 1.0;
        for (int i = 1; i <= m; ++i) {
            pmm *= -fact * somx2;
            fact += 2.0;
        }
    }
    if (l == m) return pmm;
    double pmmp1 = x * (2.0 * m + 1.0) * pmm;
    if (l == m + 1) return pmmp1;
    double pll = 0.0;
    for (int ll = m + 2; ll <= l; ++ll) {
        pll = ((2.0 * ll - 1.0) * x * pmmp1 - double(ll + m - 1) * pmm) / double(ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    return pll;
}

/// Real orthonormal spherical harmonic of degree l and order m at a unit
/// direction: cosine branch for m > 0, sine branch for m < 0.
double real_sh(int l, int m, const Vec3& u) {
    const int am = std::abs(m);
    double norm = (2.0 * l + 1.0) / (4.0 * pi);
    for (int i = l - am + 1; i <= l + am; ++i) norm /= double(i);
    norm = std::sqrt(norm);
    const double p = assoc_legendre(l, am, u[2]);
    if (m == 0) return norm * p;
    const double phi = std::atan2(u[1], u[0]);
    const double sq2 = std::sqrt(2.0);
    return m > 0 ? sq2 * norm * p * std::cos(am * phi) : sq2 * norm * p * std::sin(am * phi);
}

/// Legendre polynomial by the Bonnet recurrence (used to cross-check the
/// harmonic oracle through the addition theorem).
double legendre_p(int l, double x) {
    if (l == 0) return 1.0;
    double pm1 = 1.0, p = x;
    for (int k = 2; k <= l; ++k) {
        double next = ((2.0 * k - 1.0) * x * p - double(k - 1) * pm1) / double(k);
        pm1 = p;
        p = next;
    }
    return p;
}

Vec3 random_unit(RngCursor& cur) {
    double z = cur.uniform(-1.0, 1.0);
    double phi = cur.uniform(0.0, 2.0 * pi);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

VmfMixtureSpec uniform_sphere() {
    VmfMixtureSpec spec;
    spec.components = {VmfComponent{1.0, {0, 0, 1}, 0.0}};
    return spec;
}

double rel_err_vec(const std::vector<cdouble>& est, const std::vector<cdouble>& ref) {
    REQUIRE(est.size() == ref.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        num += std::norm(est[i] - ref[i]);
        den += std::norm(ref[i]);
    }
    return std::sqrt(num / den);
}

double rel_err_tensor(const CTensor& est, const CTensor& ref) {
    return rel_err_vec(est.raw(), ref.raw());
}

/// Tomographic oracle for one viewing rotation: the analytic projection of
/// the rotated mixture along z (a 2D mixture at the rotated centers with
/// amplitude w*s*sqrt(2*pi)), periodized, sampled on the wrapped pixel grid
/// and scaled by 1/n.
std::vector<double> projection_image_oracle(const GaussianVolumeSpec& spec, const Rotation& R,
                                            std::size_t n) {
    std::vector<double> img(n * n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        double x = double(signed_freq_index(p, n)) / double(n);
        for (std::size_t q = 0; q < n; ++q) {
            double y = double(signed_freq_index(q, n)) / double(n);
            double acc = 0;
            for (const auto& c : spec.components) {
                Vec3 rc = R.apply(c.center);
                double amp = c.weight * c.stddev * std::sqrt(2.0 * pi);
                double inv = 1.0 / (2.0 * c.stddev * c.stddev);
                for (int wx = -1; wx <= 1; ++wx)
                    for (int wy = -1; wy <= 1; ++wy) {
                        double dx = x + wx - rc[0];
                        double dy = y + wy - rc[1];
                        double e = (dx * dx + dy * dy) * inv;
                        if (e < 60.0) acc += amp * std::exp(-e);
                    }
            }
            img[p * n + q] = acc / double(n);
        }
    }
    return img;
}

} // namespace

TEST_CASE("harmonic oracle satisfies the addition theorem") {
    SeededRng rng(91, "sh-oracle");
    RngCursor cur(rng);
    for (int l : {1, 2, 5, 9, 13}) {
        for (int trial = 0; trial < 4; ++trial) {
            Vec3 u = random_unit(cur);
            Vec3 w = random_unit(cur);
            double lhs = 0;
            for (int m = -l; m <= l; ++m) lhs += real_sh(l, m, u) * real_sh(l, m, w);
            double rhs = (2.0 * l + 1.0) / (4.0 * pi) * legendre_p(l, dot3(u, w));
            CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
        }
    }
}

TEST_CASE("shipped direction sets integrate low-degree harmonics exactly") {
    struct Case {
        std::size_t q1;
        int want_degree;
    };
    for (Case c : {Case{36, 7}, Case{100, 13}}) {
        int degree = -1;
        auto pts = direction_set(c.q1, &degree);
        REQUIRE(degree == c.want_degree);
        REQUIRE(pts.size() == c.q1);
        for (const Vec3& p : pts) CHECK(std::abs(norm3(p) - 1.0) <= 1e-12);
        for (int l = 1; l <= degree; ++l) {
            for (int m = -l; m <= l; ++m) {
                double avg = 0;
                for (const Vec3& p : pts) avg += real_sh(l, m, p);
                avg /= double(pts.size());
                CHECK(std::abs(avg) <= 1e-10);
            }
        }
    }
}

TEST_CASE("fibonacci fallback covers unlisted direction counts") {
    int degree = -1;
    auto pts = direction_set(48, &degree);
    CHECK(degree == 0);
    REQUIRE(pts.size() == 48);
    Vec3 mean{0, 0, 0};
    for (const Vec3& p : pts) {
        CHECK(std::abs(norm3(p) - 1.0) <= 1e-12);
        for (int d = 0; d < 3; ++d) mean[d] += p[d] / 48.0;
    }
    CHECK(norm3(mean) <= 0.05); // roughly balanced over the sphere
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        CHECK(dot3(pts[i], pts[i + 1]) < 1.0 - 1e-6); // consecutive points distinct
    REQUIRE_THROWS_AS(direction_set(0), std::invalid_argument);
}

TEST_CASE("rotation primitives satisfy group identities") {
    Rotation rz = rotation_z(0.3);
    CHECK(rz.at(0, 0) == Catch::Approx(std::cos(0.3)));
    CHECK(rz.at(0, 1) == Catch::Approx(-std::sin(0.3)));
    CHECK(rz.at(2, 2) == 1.0);
    CHECK(rz.valid(1e-15));

    // compose two z rotations: angles add
    Rotation sum = rotation_z(0.3) * rotation_z(0.5);
    Rotation want = rotation_z(0.8);
    for (std::size_t i = 0; i < 9; ++i) CHECK(sum.m[i] == Catch::Approx(want.m[i]).margin(1e-14));

    Vec3 axis{1, 2, 3};
    Rotation r = rotation_axis_angle(axis, 0.8);
    CHECK(r.valid(1e-14));
    CHECK(r.det() == Catch::Approx(1.0).margin(1e-14));
    // the axis is fixed
    Vec3 fixed = r.apply(axis);
    for (int d = 0; d < 3; ++d) CHECK(fixed[d] == Catch::Approx(axis[d]).margin(1e-13));
    // trace identity: tr R = 1 + 2 cos(angle)
    double tr = r.at(0, 0) + r.at(1, 1) + r.at(2, 2);
    CHECK(tr == Catch::Approx(1.0 + 2.0 * std::cos(0.8)).margin(1e-13));

    // transpose is the inverse, and apply_transpose matches it
    Rotation rt = r.transpose();
    Rotation prod = r * rt;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(prod.at(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-14));
    Vec3 v{0.4, -1.1, 0.7};
    Vec3 a = r.apply_transpose(v);
    Vec3 b = rt.apply(v);
    for (int d = 0; d < 3; ++d) CHECK(a[d] == b[d]);

    REQUIRE_THROWS_AS(rotation_axis_angle({0, 0, 0}, 1.0), std::invalid_argument);
}

TEST_CASE("rotation_from_z maps the pole onto the target direction") {
    SeededRng rng(17, "fromz");
    RngCursor cur(rng);
    for (int trial = 0; trial < 25; ++trial) {
        Vec3 d = random_unit(cur);
        Rotation r = rotation_from_z(d);
        CHECK(r.valid(1e-12));
        Vec3 img = r.apply({0, 0, 1});
        for (int k = 0; k < 3; ++k) CHECK(img[k] == Catch::Approx(d[k]).margin(1e-13));
    }
    // poles
    Rotation north = rotation_from_z({0, 0, 1});
    for (std::size_t i = 0; i < 9; ++i) CHECK(north.m[i] == (i % 4 == 0 ? 1.0 : 0.0));
    Rotation south = rotation_from_z({0, 0, -1});
    CHECK(south.valid(1e-12));
    Vec3 flipped = south.apply({0, 0, 1});
    CHECK(flipped[2] == Catch::Approx(-1.0).margin(1e-14));
    REQUIRE_THROWS_AS(rotation_from_z({0.9, 0, 0}), std::invalid_argument);
}

TEST_CASE("quadrature sets enumerate direction-major in-plane grids") {
    QuadratureSet desk = desk_quadrature();
    CHECK(desk.size() == 288);
    CHECK(desk.q1 == 36);
    CHECK(desk.q2 == 8);
    CHECK(desk.design_degree == 7);

    QuadratureSet dense = dense_quadrature();
    CHECK(dense.size() == 1200);
    CHECK(dense.design_degree == 13);

    auto dirs = direction_set(36);
    for (std::size_t d = 0; d < desk.q1; ++d) {
        for (std::size_t a = 0; a < desk.q2; ++a) {
            const Rotation& r = desk.rotations[d * desk.q2 + a];
            CHECK(r.valid(1e-12));
            // every in-plane member maps +z to the same direction
            Vec3 axis = r.apply({0, 0, 1});
            for (int k = 0; k < 3; ++k) CHECK(axis[k] == Catch::Approx(dirs[d][k]).margin(1e-13));
            // equispaced in-plane composition
            Rotation want = desk.rotations[d * desk.q2] * rotation_z(2.0 * pi * double(a) / 8.0);
            for (std::size_t i = 0; i < 9; ++i)
                CHECK(r.m[i] == Catch::Approx(want.m[i]).margin(1e-14));
        }
    }

    QuadratureSet fib = build_quadrature(48, 4);
    CHECK(fib.size() == 192);
    CHECK(fib.design_degree == 0);

    REQUIRE_THROWS_AS(build_quadrature(std::vector<Vec3>{}, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(build_quadrature(std::vector<Vec3>{{0.5, 0, 0}}, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(build_quadrature(direction_set(36), 0), std::invalid_argument);
}

TEST_CASE("vmf validation rejects malformed mixtures") {
    REQUIRE_THROWS_AS(validate_vmf(VmfMixtureSpec{}), std::invalid_argument);
    VmfMixtureSpec neg;
    neg.components = {{-0.2, {0, 0, 1}, 1.0}, {1.2, {0, 0, 1}, 1.0}};
    REQUIRE_THROWS_AS(validate_vmf(neg), std::invalid_argument);
    VmfMixtureSpec negk;
    negk.components = {{1.0, {0, 0, 1}, -1.0}};
    REQUIRE_THROWS_AS(validate_vmf(negk), std::invalid_argument);
    VmfMixtureSpec longmu;
    longmu.components = {{1.0, {0, 0, 2}, 1.0}};
    REQUIRE_THROWS_AS(validate_vmf(longmu), std::invalid_argument);
    VmfMixtureSpec unbalanced;
    unbalanced.components = {{0.6, {0, 0, 1}, 1.0}, {0.6, {1, 0, 0}, 1.0}};
    REQUIRE_THROWS_AS(validate_vmf(unbalanced), std::invalid_argument);
    CHECK_NOTHROW(validate_vmf(default_vmf_mixture()));
    CHECK(default_vmf_mixture().components.size() == 8);
}

TEST_CASE("vmf sampling matches spherical statistics") {
    SECTION("zero concentration is uniform") {
        const std::size_t N = 100000;
        auto dirs = sample_directions(uniform_sphere(), N, SeededRng(41, "vmf-uniform"));
        REQUIRE(dirs.size() == N);
        Vec3 mean{0, 0, 0};
        double z2 = 0;
        for (const Vec3& d : dirs) {
            for (int k = 0; k < 3; ++k) mean[k] += d[k] / double(N);
            z2 += d[2] * d[2] / double(N);
        }
        for (std::size_t i = 0; i < N; i += 997) CHECK(std::abs(norm3(dirs[i]) - 1.0) <= 1e-12);
        // Rayleigh statistic 3N|mean|^2 is chi-square(3) under uniformity
        double rayleigh = 3.0 * double(N) * dot3(mean, mean);
        CHECK(rayleigh < 16.27); // 99.9th percentile
        CHECK(z2 == Catch::Approx(1.0 / 3.0).margin(0.01));
    }

    SECTION("high concentration pins samples to the mean") {
        VmfMixtureSpec spec;
        spec.components = {{1.0, {0, 0, 1}, 1e4}};
        auto dirs = sample_directions(spec, 2000, SeededRng(42, "vmf-tight"));
        double mean_dot = 0;
        for (const Vec3& d : dirs) mean_dot += d[2] / 2000.0;
        CHECK(mean_dot >= 0.999);
    }

    SECTION("resultant length matches coth(kappa) - 1/kappa") {
        const double kappa = 5.0;
        VmfMixtureSpec spec;
        spec.components = {{1.0, {0, 0, 1}, kappa}};
        const std::size_t N = 100000;
        auto dirs = sample_directions(spec, N, SeededRng(43, "vmf-resultant"));
        Vec3 mean{0, 0, 0};
        for (const Vec3& d : dirs)
            for (int k = 0; k < 3; ++k) mean[k] += d[k] / double(N);
        double want = 1.0 / std::tanh(kappa) - 1.0 / kappa;
        CHECK(norm3(mean) == Catch::Approx(want).epsilon(0.01));
    }

    SECTION("mixture picks components by weight") {
        VmfMixtureSpec spec = default_vmf_mixture(20.0);
        const std::size_t N = 8000;
        auto dirs = sample_directions(spec, N, SeededRng(44, "vmf-mixture"));
        std::array<std::size_t, 8> counts{};
        for (const Vec3& d : dirs) {
            std::size_t best = 0;
            double best_dot = -2;
            for (std::size_t c = 0; c < 8; ++c) {
                double dd = dot3(d, spec.components[c].mu);
                if (dd > best_dot) {
                    best_dot = dd;
                    best = c;
                }
            }
            ++counts[best];
        }
        for (std::size_t c = 0; c < 8; ++c) {
            CHECK(counts[c] > 850);
            CHECK(counts[c] < 1150);
        }
    }
}

TEST_CASE("sampled rotations compose vmf directions with uniform twists") {
    VmfMixtureSpec spec = default_vmf_mixture();
    SeededRng rng(45, "vmf-rotations");
    const std::size_t N = 10000;
    auto rots = sample_rotations(spec, N, rng);
    auto dirs = sample_directions(spec, N, rng);
    REQUIRE(rots.size() == N);
    double mc = 0, ms = 0, corr = 0;
    for (std::size_t i = 0; i < N; ++i) {
        CHECK(rots[i].valid(1e-12));
        Vec3 axis = rots[i].apply({0, 0, 1});
        // direction part shares counters with sample_directions
        for (int k = 0; k < 3; ++k) REQUIRE(axis[k] == Catch::Approx(dirs[i][k]).margin(1e-13));
        // recover the in-plane angle and accumulate circular statistics
        Rotation twist = rotation_from_z(dirs[i]).transpose() * rots[i];
        double alpha = std::atan2(twist.at(1, 0), twist.at(0, 0));
        mc += std::cos(alpha) / double(N);
        ms += std::sin(alpha) / double(N);
        corr += std::cos(alpha) * dirs[i][2] / double(N);
    }
    // circular Rayleigh statistic 2N|mean|^2 is chi-square(2) for uniform angles
    CHECK(2.0 * double(N) * (mc * mc + ms * ms) < 13.8);
    CHECK(std::abs(corr) < 0.04); // twist independent of viewing direction

    // worker count changes the thread layout, never the draws
    int saved = worker_count();
    set_worker_count(4);
    auto rots4 = sample_rotations(spec, 64, SeededRng(46, "vmf-workers"));
    set_worker_count(1);
    auto rots1 = sample_rotations(spec, 64, SeededRng(46, "vmf-workers"));
    set_worker_count(saved);
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t k = 0; k < 9; ++k) REQUIRE(rots4[i].m[k] == rots1[i].m[k]);
}

TEST_CASE("gaussian volume transform matches closed form and FFT oracle") {
    SECTION("zero frequency carries the total mass") {
        GaussianVolumeSpec spec = default_gaussian_volume();
        double mass = 0;
        for (const auto& c : spec.components)
            mass += c.weight * std::pow(2.0 * pi, 1.5) * std::pow(c.stddev, 3.0);
        cdouble v0 = gaussian_volume_fourier(spec, 0, 0, 0);
        CHECK(v0.real() == Catch::Approx(mass).epsilon(1e-12));
        CHECK(v0.imag() == 0.0);
    }

    SECTION("single centered component is a real positive radial profile") {
        GaussianVolumeSpec spec;
        spec.components = {{2.0, {0, 0, 0}, 0.12}};
        auto fn = gaussian_fourier_fn(spec);
        double prev = fn(0, 0, 0).real();
        for (int k = 1; k <= 6; ++k) {
            cdouble v = fn(double(k), 0, 0);
            CHECK(v.imag() == 0.0);
            CHECK(v.real() > 0.0);
            CHECK(v.real() < prev);
            prev = v.real();
        }
        // isotropy: same radius, different axis
        CHECK(fn(3, 0, 0).real() == Catch::Approx(fn(0, 0, 3).real()).epsilon(1e-12));
    }

    SECTION("conjugate symmetry at negated frequencies") {
        auto fn = gaussian_fourier_fn(default_gaussian_volume());
        SeededRng rng(47, "vol-conj");
        RngCursor cur(rng);
        for (int trial = 0; trial < 10; ++trial) {
            double kx = cur.uniform(-7, 7), ky = cur.uniform(-7, 7), kz = cur.uniform(-7, 7);
            cdouble a = fn(kx, ky, kz);
            cdouble b = fn(-kx, -ky, -kz);
            CHECK(std::abs(b - std::conj(a)) <= 1e-13);
        }
    }

    SECTION("rasterizations from both domains agree at n = 25") {
        GaussianVolumeSpec spec = default_gaussian_volume();
        const std::size_t n = 25;
        RTensor direct = rasterize_real(spec, n);
        RTensor viafft = rasterize_fourier(gaussian_fourier_fn(spec), n);
        double num = 0, den = 0;
        for (std::size_t i = 0; i < direct.size(); ++i) {
            num += (viafft[i] - direct[i]) * (viafft[i] - direct[i]);
            den += direct[i] * direct[i];
        }
        CHECK(std::sqrt(num / den) <= 1e-3);

        // forward direction: the DFT of the spatial rasterization returns
        // the closed-form grid values
        CTensor spatial({n, n, n});
        for (std::size_t i = 0; i < direct.size(); ++i) spatial[i] = cdouble(direct[i], 0.0);
        CTensor hat = fft(spatial, {0, 1, 2});
        CTensor want = volume_fourier_grid(gaussian_fourier_fn(spec), n);
        const double scale = 1.0 / std::pow(double(n), 1.5);
        double num2 = 0, den2 = 0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t c = 0; c < n; ++c) {
                    long m = signed_freq_index(a, n) + signed_freq_index(b, n) +
                             signed_freq_index(c, n);
                    cdouble got = hat[(a * n + b) * n + c] * center_sign(m) * scale;
                    num2 += std::norm(got - want[(a * n + b) * n + c]);
                    den2 += std::norm(want[(a * n + b) * n + c]);
                }
        CHECK(std::sqrt(num2 / den2) <= 1e-3);
    }

    SECTION("validation rejects malformed mixtures") {
        REQUIRE_THROWS_AS(validate_gaussian_volume(GaussianVolumeSpec{}), std::invalid_argument);
        GaussianVolumeSpec flat;
        flat.components = {{1.0, {0, 0, 0}, 0.0}};
        REQUIRE_THROWS_AS(validate_gaussian_volume(flat), std::invalid_argument);
        CHECK_NOTHROW(validate_gaussian_volume(default_gaussian_volume()));
    }
}

TEST_CASE("slices sample the rotated central plane") {
    auto fn = gaussian_fourier_fn(default_gaussian_volume());
    const std::size_t n = 15;

    SECTION("identity rotation reads the equatorial plane") {
        CTensor s = slice_eval(fn, Rotation{}, n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                cdouble want = fn(double(signed_freq_index(a, n)),
                                  double(signed_freq_index(b, n)), 0.0);
                CHECK(std::abs(s.at2(a, b) - want) <= 1e-15);
            }
    }

    SECTION("zero frequency is rotation invariant") {
        auto rots = sample_rotations(uniform_sphere(), 5, SeededRng(48, "slice-zero"));
        cdouble want = fn(0, 0, 0);
        for (const Rotation& r : rots) {
            CTensor s = slice_eval(fn, r, n);
            CHECK(std::abs(s[0] - want) <= 1e-15);
        }
    }

    SECTION("in-plane rotation leaves an axially symmetric volume fixed") {
        GaussianVolumeSpec axial;
        axial.components = {{1.5, {0, 0, 0.2}, 0.11}};
        auto axfn = gaussian_fourier_fn(axial);
        CTensor base = slice_eval(axfn, Rotation{}, n);
        CTensor turned = slice_eval(axfn, rotation_z(0.7), n);
        for (std::size_t i = 0; i < base.size(); ++i)
            CHECK(std::abs(turned[i] - base[i]) <= 1e-10);
    }

    SECTION("slices of a real volume are Hermitian") {
        auto rots = sample_rotations(uniform_sphere(), 3, SeededRng(49, "slice-herm"));
        for (const Rotation& r : rots) {
            CTensor s = slice_eval(fn, r, n);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b) {
                    cdouble mirrored = s.at2((n - a) % n, (n - b) % n);
                    CHECK(std::abs(mirrored - std::conj(s.at2(a, b))) <= 1e-13);
                }
        }
    }

    SECTION("slice_points lists exactly the frequencies the evaluator sees") {
        Rotation r = rotation_axis_angle({0.3, -1.0, 0.5}, 1.1);
        RTensor pts = slice_points(r, n);
        REQUIRE(pts.extent(0) == n * n);
        REQUIRE(pts.extent(1) == 3);
        std::vector<std::array<double, 3>> seen;
        FourierFn capture = [&](double kx, double ky, double kz) {
            seen.push_back({kx, ky, kz});
            return cdouble(0, 0);
        };
        slice_eval(capture, r, n);
        REQUIRE(seen.size() == n * n);
        for (std::size_t i = 0; i < seen.size(); ++i)
            for (std::size_t d = 0; d < 3; ++d) REQUIRE(pts.at2(i, d) == seen[i][d]);
        // rotations preserve the in-plane radius
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                double ka = double(signed_freq_index(a, n));
                double kb = double(signed_freq_index(b, n));
                const double* row = pts.data() + (a * n + b) * 3;
                double r2 = row[0] * row[0] + row[1] * row[1] + row[2] * row[2];
                CHECK(r2 == Catch::Approx(ka * ka + kb * kb).margin(1e-10));
            }
    }
}

TEST_CASE("projection images match the tomographic oracle") {
    GaussianVolumeSpec spec = default_gaussian_volume();
    auto fn = gaussian_fourier_fn(spec);
    const std::size_t n = 25;
    auto rots = sample_rotations(uniform_sphere(), 10, SeededRng(50, "slice-proj"));
    for (const Rotation& r : rots) {
        std::vector<double> img = projection_image_oracle(spec, r, n);
        std::vector<cdouble> hat = fft2_real(img, n);
        CTensor s = slice_eval(fn, r, n);
        CHECK(rel_err_vec(hat, s.raw()) <= 1e-3);
    }
}

TEST_CASE("simulate_images forms noisy projections") {
    GaussianVolumeSpec spec = default_gaussian_volume();
    auto fn = gaussian_fourier_fn(spec);
    const std::size_t n = 15;

    SECTION("noiseless batch equals the slice projections") {
        auto rots = sample_rotations(uniform_sphere(), 3, SeededRng(51, "img-clean"));
        RTensor batch = simulate_images(fn, rots, 0.0, SeededRng(52, "img-noise"), n);
        REQUIRE(batch.rank() == 3);
        REQUIRE(batch.extent(0) == 3);
        REQUIRE(batch.extent(1) == n);
        REQUIRE(batch.extent(2) == n);
        for (std::size_t i = 0; i < rots.size(); ++i) {
            RTensor want = image_from_slice(slice_eval(fn, rots[i], n));
            for (std::size_t p = 0; p < n * n; ++p)
                REQUIRE(batch[i * n * n + p] == want[p]);
            // mean pixel carries the zero-frequency value regardless of view
            double mean = 0;
            for (std::size_t p = 0; p < n * n; ++p) mean += batch[i * n * n + p];
            mean /= double(n * n);
            CHECK(mean == Catch::Approx(fn(0, 0, 0).real() / double(n)).margin(1e-12));
        }
    }

    SECTION("noise is additive gaussian with the requested variance") {
        auto rots = std::vector<Rotation>(200, rotation_axis_angle({1, 1, 0}, 0.9));
        RTensor clean = simulate_images(fn, rots, 0.0, SeededRng(53, "img-var"), n);
        RTensor noisy = simulate_images(fn, rots, 0.5, SeededRng(53, "img-var"), n);
        double mean = 0, var = 0;
        const std::size_t total = noisy.size();
        for (std::size_t i = 0; i < total; ++i) mean += (noisy[i] - clean[i]) / double(total);
        for (std::size_t i = 0; i < total; ++i) {
            double d = noisy[i] - clean[i] - mean;
            var += d * d / double(total - 1);
        }
        CHECK(std::abs(mean) <= 0.01);
        CHECK(var == Catch::Approx(0.25).epsilon(0.03));
    }

    SECTION("draws are worker-count independent") {
        auto rots = sample_rotations(uniform_sphere(), 40, SeededRng(54, "img-det"));
        int saved = worker_count();
        set_worker_count(4);
        RTensor four = simulate_images(fn, rots, 0.3, SeededRng(55, "img-det"), n);
        set_worker_count(1);
        RTensor one = simulate_images(fn, rots, 0.3, SeededRng(55, "img-det"), n);
        set_worker_count(saved);
        for (std::size_t i = 0; i < four.size(); ++i) REQUIRE(four[i] == one[i]);
    }

    SECTION("invalid inputs are rejected") {
        auto rots = sample_rotations(uniform_sphere(), 2, SeededRng(56, "img-bad"));
        REQUIRE_THROWS_AS(simulate_images(fn, {}, 0.1, SeededRng(1, "x"), n),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(simulate_images(fn, rots, -0.1, SeededRng(1, "x"), n),
                          std::invalid_argument);
        FourierFn nanfn = [](double, double, double) {
            return cdouble(std::nan(""), 0.0);
        };
        REQUIRE_THROWS_AS(simulate_images(nanfn, rots, 0.1, SeededRng(1, "x"), n),
                          std::invalid_argument);
    }
}

TEST_CASE("empirical 2d moments recover rotation-averaged slice statistics") {
    GaussianVolumeSpec spec = default_gaussian_volume();
    auto fn = gaussian_fourier_fn(spec);

    SECTION("single noiseless image gives a rank-1 second moment") {
        const std::size_t n = 9;
        Rotation r = rotation_axis_angle({0.2, 0.5, 1.0}, 0.6);
        RTensor batch = simulate_images(fn, {r}, 0.0, SeededRng(57, "m2d-one"), n);
        CryoMomentPair mp = empirical_moments_2d(batch, 0.0);
        CHECK(mp.kind == MomentKind::empirical);
        CHECK(mp.count == 1);
        CHECK(mp.n == n);
        CTensor s = slice_eval(fn, r, n);
        REQUIRE(mp.m1.size() == n * n);
        for (std::size_t t = 0; t < n * n; ++t) CHECK(std::abs(mp.m1[t] - s[t]) <= 1e-12);
        for (std::size_t a = 0; a < n * n; ++a)
            for (std::size_t b = 0; b < n * n; ++b)
                CHECK(std::abs(mp.m2.at2(a, b) - mp.m1[a] * std::conj(mp.m1[b])) <= 1e-12);
    }

    SECTION("pure noise leaves corrected moments near zero") {
        GaussianVolumeSpec empty;
        empty.components = {{0.0, {0, 0, 0}, 0.1}};
        auto zerofn = gaussian_fourier_fn(empty);
        const std::size_t n = 7;
        auto rots = std::vector<Rotation>(20000, Rotation{});
        CryoMomentPair mp =
            simulate_and_moments_2d(zerofn, rots, 0.5, SeededRng(58, "m2d-noise"), n);
        double worst1 = 0, worst2 = 0;
        for (std::size_t t = 0; t < mp.m1.size(); ++t)
            worst1 = std::max(worst1, std::abs(mp.m1[t]));
        for (std::size_t t = 0; t < mp.m2.size(); ++t)
            worst2 = std::max(worst2, std::abs(mp.m2[t]));
        CHECK(worst1 <= 0.02);
        CHECK(worst2 <= 0.02);
    }

    SECTION("rotation multiset converges to the discrete average") {
        const std::size_t n = 7;
        QuadratureSet q = build_quadrature(direction_set(36), 2);
        const std::size_t reps = 16;
        std::vector<Rotation> rots;
        rots.reserve(q.size() * reps);
        for (const Rotation& r : q.rotations)
            for (std::size_t k = 0; k < reps; ++k) rots.push_back(r);

        CryoMomentPair est =
            simulate_and_moments_2d(fn, rots, 0.25, SeededRng(59, "m2d-multi"), n);

        // direct average of slice statistics over the same rotation set
        const std::size_t n2 = n * n;
        CTensor m1({n2});
        CTensor m2({n2, n2});
        for (const Rotation& r : q.rotations) {
            CTensor s = slice_eval(fn, r, n);
            for (std::size_t a = 0; a < n2; ++a) {
                m1[a] += s[a] / double(q.size());
                for (std::size_t b = 0; b < n2; ++b)
                    m2.at2(a, b) += s[a] * std::conj(s[b]) / double(q.size());
            }
        }
        CHECK(rel_err_tensor(est.m1, m1) <= 0.08);
        CHECK(rel_err_tensor(est.m2, m2) <= 0.10);

        // estimator output is Hermitian
        double asym = 0;
        for (std::size_t a = 0; a < n2; ++a)
            for (std::size_t b = 0; b < n2; ++b)
                asym = std::max(asym,
                                std::abs(est.m2.at2(a, b) - std::conj(est.m2.at2(b, a))));
        CHECK(asym <= 1e-10);
    }

    SECTION("fused path matches the two-step path bit for bit") {
        const std::size_t n = 9;
        auto rots = sample_rotations(default_vmf_mixture(), 300, SeededRng(60, "m2d-rot"));
        SeededRng noise(61, "m2d-fused");
        RTensor batch = simulate_images(fn, rots, 0.3, noise, n);
        CryoMomentPair two = empirical_moments_2d(batch, 0.3);
        CryoMomentPair one = simulate_and_moments_2d(fn, rots, 0.3, noise, n);
        REQUIRE(one.m1.size() == two.m1.size());
        for (std::size_t t = 0; t < one.m1.size(); ++t) REQUIRE(one.m1[t] == two.m1[t]);
        for (std::size_t t = 0; t < one.m2.size(); ++t) REQUIRE(one.m2[t] == two.m2[t]);
        CHECK(one.sigma == two.sigma);
        CHECK(one.count == two.count);
    }

    SECTION("malformed batches are rejected") {
        REQUIRE_THROWS_AS(empirical_moments_2d(RTensor({0, 3, 3}), 0.1), std::invalid_argument);
        REQUIRE_THROWS_AS(empirical_moments_2d(RTensor({2, 3, 4}), 0.1), std::invalid_argument);
        REQUIRE_THROWS_AS(empirical_moments_2d(RTensor({2, 3}), 0.1), std::invalid_argument);
    }
}

TEST_CASE("bandlimit mask selects the resolved disk") {
    auto idx = bandlimit_indices(7);
    // integer pairs with ka^2 + kb^2 <= (7/2)^2, counted by hand
    CHECK(idx.size() == 37);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    auto has = [&](std::size_t a, std::size_t b) {
        return std::binary_search(idx.begin(), idx.end(), a * 7 + b);
    };
    CHECK(has(0, 0));                   // zero frequency
    CHECK(has(3, 0));                   // kappa = (3, 0), radius 3 <= 3.5
    CHECK_FALSE(has(3, 3));             // kappa = (3, 3), radius ~4.24 > 3.5
    CHECK(has(4, 0));                   // kappa = (-3, 0)

    auto idx15 = bandlimit_indices(15);
    CHECK(idx15.size() < 225);
    CHECK(std::binary_search(idx15.begin(), idx15.end(), std::size_t{7 * 15}));

    // masking plucks the matching rows and columns
    const std::size_t n = 5;
    GaussianVolumeSpec spec = default_gaussian_volume();
    auto fn = gaussian_fourier_fn(spec);
    auto rots = sample_rotations(uniform_sphere(), 4, SeededRng(62, "mask"));
    CryoMomentPair mp = simulate_and_moments_2d(fn, rots, 0.1, SeededRng(63, "mask"), n);
    std::vector<std::size_t> pick{0, 5, 11};
    CryoMomentPair cut = mask_moments(mp, pick);
    REQUIRE(cut.m1.size() == 3);
    REQUIRE(cut.m2.extent(0) == 3);
    CHECK(cut.n == mp.n);
    CHECK(cut.count == mp.count);
    for (std::size_t a = 0; a < 3; ++a) {
        CHECK(cut.m1[a] == mp.m1[pick[a]]);
        for (std::size_t b = 0; b < 3; ++b)
            CHECK(cut.m2.at2(a, b) == mp.m2.at2(pick[a], pick[b]));
    }
    REQUIRE_THROWS_AS(mask_moments(mp, {}), std::invalid_argument);
    REQUIRE_THROWS_AS(mask_moments(mp, {999}), std::invalid_argument);
    REQUIRE_THROWS_AS(bandlimit_indices(0), std::invalid_argument);
}
