#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/mra/metrics.hpp"
#include "omt/mra/mixture.hpp"
#include "omt/mra/moments.hpp"
#include "omt/mra/spectral.hpp"

using namespace omt;

namespace {

MraSignal random_signal(std::size_t n, RngCursor& cur) {
    std::vector<double> v(n);
    for (auto& x : v) x = cur.gaussian();
    return MraSignal::from_real(std::move(v));
}

MraDensity random_density(std::size_t n, RngCursor& cur) {
    std::vector<double> m(n);
    for (auto& x : m) x = 0.05 + cur.uniform();
    return MraDensity::normalized(std::move(m));
}

/// Unit-modulus spectrum of a real signal: conjugate-symmetric random
/// phases, zero frequency pinned to +1 (and Nyquist to +-1 when n is even).
std::vector<cdouble> random_unit_modulus(std::size_t n, RngCursor& cur) {
    std::vector<cdouble> vhat(n);
    vhat[0] = cdouble(1, 0);
    for (std::size_t idx = 1; idx <= n / 2; ++idx) {
        std::size_t mirror = n - idx;
        if (idx == mirror || (n % 2 == 0 && idx == n / 2)) {
            vhat[idx] = cdouble(cur.uniform() < 0.5 ? -1.0 : 1.0, 0.0);
        } else {
            double ang = cur.uniform(0, 2 * pi);
            vhat[idx] = cdouble(std::cos(ang), std::sin(ang));
            vhat[mirror] = std::conj(vhat[idx]);
        }
    }
    return vhat;
}

MraDensity distinct_density(std::size_t n, RngCursor& cur) {
    // well separated entries so eigenvalue gaps stay comfortably positive
    std::vector<double> m(n);
    for (std::size_t j = 0; j < n; ++j) m[j] = 1.0 + double(j) + 0.3 * cur.uniform();
    return MraDensity::normalized(std::move(m));
}

} // namespace

TEST_CASE("wrapped mixture matches pointwise oracle") {
    MixtureSpec1D spec;
    spec.components = {{0.3, -0.2, 0.07}, {0.7, 0.31, 0.15}};
    const std::size_t n = 41;
    auto vals = mixture_values(spec, n);
    auto xs = space_grid(n);
    for (std::size_t j = 0; j < n; ++j) {
        double want = 0;
        for (auto [w, mu, sd] : {std::tuple{0.3, -0.2, 0.07}, std::tuple{0.7, 0.31, 0.15}}) {
            double comp = 0;
            for (int r = -5; r <= 5; ++r)
                comp += std::exp(-0.5 * std::pow((xs[j] - mu + r) / sd, 2));
            want += w * comp / (sd * std::sqrt(2 * pi));
        }
        CHECK(vals[j] == Catch::Approx(want).margin(1e-13));
    }
}

TEST_CASE("mixture density properties") {
    // stddev 1.0 is wide relative to the unit interval, so the wrapped
    // density is uniform well beyond the 5-image truncation error
    MixtureSpec1D broad;
    broad.components = {{1.0, 0.1, 1.0}};
    auto mass = mixture_mass(broad, 20);
    double s = 0;
    for (double x : mass) {
        CHECK(x == Catch::Approx(1.0 / 20).epsilon(1e-3));
        s += x;
    }
    CHECK(s == Catch::Approx(1.0).margin(1e-12));

    MixtureSpec1D bad;
    bad.components = {{1.0, 0.0, -0.1}};
    CHECK_THROWS_AS(mixture_values(bad, 8), std::invalid_argument);

    SeededRng rng(3, "specs");
    RngCursor cur(rng);
    for (int t = 0; t < 10; ++t) {
        auto spec = draw_mixture_spec(cur, 2);
        spec.validate();
        for (const auto& c : spec.components) {
            CHECK(c.stddev >= 0.05);
            CHECK(c.stddev <= 0.2);
            CHECK(c.mean >= -0.5);
            CHECK(c.mean < 0.5);
        }
    }
}

TEST_CASE("shift_fourier basics") {
    SeededRng rng(5, "shift");
    RngCursor cur(rng);
    const std::size_t n = 9;
    auto v = random_signal(n, cur);

    auto same = shift_fourier(v.values_fourier, 0.0);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(same[i] - v.values_fourier[i]) < 1e-15);

    // positive phase convention: a one-grid-step shift of a delta at point 2
    // lands it on the adjacent point 1
    std::vector<double> delta(n, 0.0);
    delta[2] = 1.0;
    auto dhat = fft_real_vec(delta);
    auto moved = shift_fourier(dhat, 1.0 / double(n));
    fft_inplace(moved, true);
    for (std::size_t t = 0; t < n; ++t)
        CHECK(moved[t].real() == Catch::Approx(t == 1 ? 1.0 : 0.0).margin(1e-12));

    // group law: s1 then s2 equals s1 + s2 mod 1
    double s1 = 0.37, s2 = 0.81;
    auto a = shift_fourier(shift_fourier(v.values_fourier, s1), s2);
    auto b = shift_fourier(v.values_fourier, std::fmod(s1 + s2, 1.0));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
}

TEST_CASE("simulate_observations structure") {
    SeededRng rng(7, "sim");
    RngCursor cur(rng);
    const std::size_t n = 11;
    auto v = random_signal(n, cur);

    // sigma=0, delta density: every row equals v
    auto batch = simulate_observations(v, MraDensity::delta(n, 0), 16, 0.0, rng.substream(10));
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t t = 0; t < n; ++t) CHECK(batch.at2(i, t) == v.values_real[t]);

    // sigma=0, general density: every row is some rotation of v
    auto rho = random_density(n, cur);
    auto batch2 = simulate_observations(v, rho, 64, 0.0, rng.substream(11));
    for (std::size_t i = 0; i < 64; ++i) {
        bool matched = false;
        for (std::size_t j = 0; j < n && !matched; ++j) {
            bool ok = true;
            for (std::size_t t = 0; t < n; ++t)
                if (batch2.at2(i, t) != v.values_real[(t + n - j) % n]) {
                    ok = false;
                    break;
                }
            matched = ok;
        }
        CHECK(matched);
    }

    CHECK_THROWS_AS(simulate_observations(v, rho, 4, -1.0, rng), std::invalid_argument);
}

TEST_CASE("shift histogram follows the density") {
    SeededRng rng(9, "hist");
    RngCursor cur(rng);
    const std::size_t n = 7, N = 100000;
    auto v = random_signal(n, cur);
    auto rho = random_density(n, cur);
    auto batch = simulate_observations(v, rho, N, 0.0, rng.substream(1));

    // identify each row's shift by exact match
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (batch.at2(i, 0) == v.values_real[(n - j) % n] &&
                batch.at2(i, 1) == v.values_real[(1 + n - j) % n]) {
                counts[j]++;
                break;
            }
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        double p = rho.mass[j];
        double se = std::sqrt(p * (1 - p) * double(N));
        CHECK(std::abs(double(counts[j]) - p * double(N)) <= 3.0 * se + 1.0);
    }
}

TEST_CASE("analytic moments: delta and uniform densities") {
    SeededRng rng(13, "amean");
    RngCursor cur(rng);
    const std::size_t n = 8;
    auto v = random_signal(n, cur);

    auto mp = analytic_moments(v, MraDensity::delta(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(mp.m1[i] - v.values_fourier[i]) < 1e-12);
        for (std::size_t j = 0; j < n; ++j)
            CHECK(std::abs(mp.m2.at2(i, j) -
                           v.values_fourier[i] * std::conj(v.values_fourier[j])) < 1e-12);
    }

    auto uni = MraDensity::normalized(std::vector<double>(n, 1.0));
    auto mu = analytic_moments(v, uni);
    CHECK(std::abs(mu.m1[0] - v.values_fourier[0]) < 1e-12);
    for (std::size_t i = 1; i < n; ++i) CHECK(std::abs(mu.m1[i]) < 1e-12);
}

TEST_CASE("analytic moments equal the exhaustive shift expectation") {
    SeededRng rng(17, "aex");
    RngCursor cur(rng);
    const std::size_t n = 3;
    auto v = random_signal(n, cur);
    auto rho = random_density(n, cur);
    auto mp = analytic_moments(v, rho);

    // oracle: enumerate all shifts in real space, transform, average
    CTensor m1({n}), m2({n, n});
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> shifted(n);
        for (std::size_t t = 0; t < n; ++t) shifted[t] = v.values_real[(t + n - j) % n];
        auto f = fft_real_vec(shifted);
        for (std::size_t a = 0; a < n; ++a) {
            m1[a] += rho.mass[j] * f[a];
            for (std::size_t b = 0; b < n; ++b)
                m2.at2(a, b) += rho.mass[j] * f[a] * std::conj(f[b]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(mp.m1[i] - m1[i]) < 1e-12);
    for (std::size_t i = 0; i < n * n; ++i) CHECK(std::abs(mp.m2[i] - m2[i]) < 1e-12);
}

TEST_CASE("group ambiguity: shifted pair gives identical moments") {
    SeededRng rng(19, "grp");
    RngCursor cur(rng);
    const std::size_t n = 9;
    auto v = random_signal(n, cur);
    auto rho = random_density(n, cur);
    auto base = analytic_moments(v, rho);

    for (std::size_t s0 = 0; s0 < n; ++s0) {
        std::vector<double> vs(n);
        for (std::size_t t = 0; t < n; ++t) vs[t] = v.values_real[(t + n - s0) % n];
        std::vector<double> rs(n);
        for (std::size_t j = 0; j < n; ++j) rs[j] = rho.mass[(j + s0) % n];
        auto shifted = analytic_moments(MraSignal::from_real(vs), MraDensity::normalized(rs));
        double d = 0;
        for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(shifted.m1[i] - base.m1[i]));
        for (std::size_t i = 0; i < n * n; ++i)
            d = std::max(d, std::abs(shifted.m2[i] - base.m2[i]));
        CHECK(d < 1e-10);
    }
}

TEST_CASE("analytic m2 is Hermitian PSD with shift-invariant trace and m1(0)") {
    SeededRng rng(23, "psd");
    RngCursor cur(rng);
    const std::size_t n = 12;
    auto v = random_signal(n, cur);
    auto rho = random_density(n, cur);
    auto mp = analytic_moments(v, rho);

    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            CHECK(std::abs(mp.m2.at2(a, b) - std::conj(mp.m2.at2(b, a))) < 1e-12);

    // PSD via quadratic forms on random vectors
    for (int t = 0; t < 25; ++t) {
        std::vector<cdouble> x(n);
        for (auto& c : x) c = cdouble(cur.gaussian(), cur.gaussian());
        cdouble q(0, 0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) q += std::conj(x[a]) * mp.m2.at2(a, b) * x[b];
        CHECK(q.real() > -1e-8);
        CHECK(std::abs(q.imag()) < 1e-8 * std::abs(q.real() + 1.0));
    }

    double tr = 0, power = 0;
    for (std::size_t a = 0; a < n; ++a) tr += mp.m2.at2(a, a).real();
    for (std::size_t a = 0; a < n; ++a) power += std::norm(v.values_fourier[a]);
    CHECK(tr == Catch::Approx(power).epsilon(1e-10));
    CHECK(std::abs(mp.m1[0] - v.values_fourier[0]) < 1e-12);
}

TEST_CASE("empirical moments: exact small cases") {
    SeededRng rng(29, "emp");
    RngCursor cur(rng);
    const std::size_t n = 6;
    auto v = random_signal(n, cur);

    RTensor batch({1, n}, v.values_real);
    auto mp = empirical_moments(batch, 0.0);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(mp.m1[i] - v.values_fourier[i]) < 1e-12);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            CHECK(std::abs(mp.m2.at2(a, b) -
                           v.values_fourier[a] * std::conj(v.values_fourier[b])) < 1e-12);

    RTensor empty({0, n}, std::vector<double>{});
    CHECK_THROWS_AS(empirical_moments(empty, 0.0), std::invalid_argument);
}

TEST_CASE("noise-only m2 shrinks under the unbiased correction") {
    const std::size_t n = 9, N = 200000;
    SeededRng rng(31, "noise-only");
    MraSignal zero = MraSignal::from_real(std::vector<double>(n, 0.0));
    auto uni = MraDensity::normalized(std::vector<double>(n, 1.0));
    auto mp = simulate_and_moments(zero, uni, N, 1.0, rng);
    double offdiag = 0, diag = 0;
    for (std::size_t a = 0; a < n; ++a) {
        diag = std::max(diag, std::abs(mp.m2.at2(a, a)));
        for (std::size_t b = 0; b < n; ++b)
            if (a != b) offdiag = std::max(offdiag, std::abs(mp.m2.at2(a, b)));
    }
    // residuals scale like 1/sqrt(N) ~ 2e-3
    CHECK(diag < 0.02);
    CHECK(offdiag < 0.02);
}

TEST_CASE("empirical matches analytic at moderate N") {
    const std::size_t n = 15, N = 100000;
    SeededRng rng(37, "emp-conv");
    RngCursor cur(rng);
    auto v = random_signal(n, cur);
    auto rho = random_density(n, cur);
    auto analytic = analytic_moments(v, rho);
    auto emp = simulate_and_moments(v, rho, N, 1.0, rng.substream(5));
    auto [e1, e2] = relative_error_moments(analytic, emp);
    CHECK(e1 <= 0.05);
    CHECK(e2 <= 0.05);
}

TEST_CASE("fused simulate_and_moments equals the two-step path bitwise") {
    const std::size_t n = 10, N = 5000;
    SeededRng rng(41, "fused");
    RngCursor cur(rng);
    auto v = random_signal(n, cur);
    auto rho = random_density(n, cur);
    SeededRng run(99, "shared-run");
    auto two_step = empirical_moments(simulate_observations(v, rho, N, 0.7, run), 0.7);
    auto fused = simulate_and_moments(v, rho, N, 0.7, run);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(two_step.m1[i].real() == fused.m1[i].real());
        CHECK(two_step.m1[i].imag() == fused.m1[i].imag());
    }
    for (std::size_t i = 0; i < n * n; ++i) {
        CHECK(two_step.m2[i].real() == fused.m2[i].real());
        CHECK(two_step.m2[i].imag() == fused.m2[i].imag());
    }
}

TEST_CASE("spectral inversion: rank-1 delta density") {
    SeededRng rng(43, "spd");
    RngCursor cur(rng);
    const std::size_t n = 8;
    auto vhat = random_unit_modulus(n, cur);
    auto v = MraSignal::from_fourier(vhat);
    auto mp = analytic_moments(v, MraDensity::delta(n, 0));
    auto res = spectral_invert(mp.m2);
    // single nonzero eigenvalue 1 at the delta position
    double top = *std::max_element(res.rho.mass.begin(), res.rho.mass.end());
    CHECK(top == Catch::Approx(1.0).margin(1e-8));
    CHECK(res.degenerate); // remaining eigenvalues all vanish -> no gaps
    CHECK(relative_error_fourier(res.vhat, v.values_fourier) < 1e-6);
}

TEST_CASE("spectral inversion recovers unit-modulus instances") {
    SeededRng rng(47, "spexact");
    RngCursor cur(rng);
    for (std::size_t n : {8u, 16u}) {
        for (int t = 0; t < 5; ++t) {
            auto vhat = random_unit_modulus(n, cur);
            auto v = MraSignal::from_fourier(vhat);
            auto rho = distinct_density(n, cur);
            auto mp = analytic_moments(v, rho);
            auto res = spectral_invert(mp.m2);
            REQUIRE(!res.degenerate);
            auto aligned = align_joint(res.vhat, res.rho.mass, v.values_fourier, rho.mass);
            INFO("n=" << n << " trial=" << t);
            CHECK(aligned.signal_err < 1e-8);
            CHECK(aligned.density_err < 1e-8);
        }
    }
}

TEST_CASE("spectral inversion via power iteration variant") {
    SeededRng rng(53, "sppower");
    RngCursor cur(rng);
    const std::size_t n = 8;
    auto vhat = random_unit_modulus(n, cur);
    auto v = MraSignal::from_fourier(vhat);
    auto rho = distinct_density(n, cur);
    auto mp = analytic_moments(v, rho);
    SpectralOptions opt;
    opt.use_power_iteration = true;
    opt.power_iters = 3000;
    auto res = spectral_invert(mp.m2, opt);
    auto aligned = align_joint(res.vhat, res.rho.mass, v.values_fourier, rho.mass);
    CHECK(aligned.signal_err < 1e-5);
    CHECK(aligned.density_err < 1e-5);
}

TEST_CASE("spectral inversion rejects bad input") {
    CTensor notsquare({2, 3});
    CHECK_THROWS_AS(spectral_invert(notsquare), std::invalid_argument);
    CTensor nonherm({2, 2}, std::vector<cdouble>{{1, 0}, {1, 1}, {0, 0}, {1, 0}});
    CHECK_THROWS_AS(spectral_invert(nonherm), std::invalid_argument);
}

TEST_CASE("relative_error_signal: shifts are free, orthogonal noise is not") {
    SeededRng rng(59, "res");
    RngCursor cur(rng);
    const std::size_t n = 16;
    auto v = random_signal(n, cur);

    CHECK(relative_error_signal(v.values_real, v.values_real) < 1e-12);

    std::vector<double> rot(n);
    for (std::size_t t = 0; t < n; ++t) rot[t] = v.values_real[(t + n - 5) % n];
    CHECK(relative_error_signal(rot, v.values_real) < 1e-12);

    // perturbation orthogonal to every shift of v: use a frequency v lacks.
    // build v band-limited, then perturb at an absent frequency.
    std::vector<cdouble> vh(n, cdouble(0, 0));
    vh[1] = cdouble(1, 0);
    vh[n - 1] = cdouble(1, 0);
    auto vb = MraSignal::from_fourier(vh);
    std::vector<cdouble> ph(n, cdouble(0, 0));
    ph[3] = cdouble(1, 0);
    ph[n - 3] = cdouble(1, 0);
    auto pb = MraSignal::from_fourier(ph);
    double nv = norm2(vb.values_real);
    std::vector<double> u(n);
    for (std::size_t t = 0; t < n; ++t)
        u[t] = vb.values_real[t] + 0.1 * nv * pb.values_real[t] / norm2(pb.values_real);
    CHECK(relative_error_signal(u, vb.values_real) == Catch::Approx(0.1).margin(1e-9));

    std::vector<double> zero(n, 0.0);
    CHECK_THROWS_AS(relative_error_signal(u, zero), std::invalid_argument);
}

TEST_CASE("relative_error_signal resolves fractional shifts") {
    // half-grid-step shift of a smooth signal: grid-only alignment would
    // leave a large residual, the 10x refined search must do much better
    const std::size_t n = 16;
    std::vector<cdouble> vh(n, cdouble(0, 0));
    vh[1] = cdouble(0.7, 0.2);
    vh[n - 1] = std::conj(vh[1]);
    vh[2] = cdouble(-0.3, 0.4);
    vh[n - 2] = std::conj(vh[2]);
    auto v = MraSignal::from_fourier(vh);
    auto sh = shift_fourier(v.values_fourier, 0.5 / double(n));
    auto u = MraSignal::from_fourier(sh);
    CHECK(relative_error_signal(u.values_real, v.values_real) < 1e-9);
}

TEST_CASE("relative_error_moments normalization") {
    SeededRng rng(61, "rem");
    RngCursor cur(rng);
    const std::size_t n = 7;
    auto v = random_signal(n, cur);
    auto rho = random_density(n, cur);
    auto mp = analytic_moments(v, rho);

    auto [z1, z2] = relative_error_moments(mp, mp);
    CHECK(z1 == 0.0);
    CHECK(z2 == 0.0);

    MomentPair doubled = mp;
    for (std::size_t i = 0; i < doubled.m1.size(); ++i) doubled.m1[i] *= 2.0;
    auto [d1, d2] = relative_error_moments(mp, doubled);
    CHECK(d1 == Catch::Approx(1.0).margin(1e-12));
    CHECK(d2 == 0.0);
}
