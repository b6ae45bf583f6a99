#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "omt/core/rng.hpp"
#include "omt/nn/adam.hpp"
#include "omt/nn/layers.hpp"
#include "omt/nn/serialize.hpp"
#include "omt/nn/tape.hpp"

using namespace omt;

namespace {

// Central finite-difference gradient oracle. `build` must construct the loss
// from scratch each call, given leaves made from `inputs`, so that the same
// graph is re-evaluated at perturbed points.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

double eval_loss(const LossBuilder& build, const std::vector<std::vector<std::size_t>>& shapes,
                 const std::vector<std::vector<double>>& inputs) {
    Tape t;
    std::vector<Var> leaves;
    for (std::size_t k = 0; k < shapes.size(); ++k)
        leaves.push_back(t.leaf(shapes[k], inputs[k], false));
    Var loss = build(t, leaves);
    return t.value(loss)[0];
}

void check_gradient(const LossBuilder& build, const std::vector<std::vector<std::size_t>>& shapes,
                    std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    SeededRng rng(seed, "fd-check");
    std::vector<std::vector<double>> inputs;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
        std::size_t sz = detail::shape_product(shapes[k]);
        std::vector<double> x(sz);
        for (std::size_t i = 0; i < sz; ++i)
            x[i] = lo + (hi - lo) * rng.substream(k).uniform_at(i);
        inputs.push_back(std::move(x));
    }

    // Tape gradient.
    Tape t;
    std::vector<Var> leaves;
    for (std::size_t k = 0; k < shapes.size(); ++k)
        leaves.push_back(t.leaf(shapes[k], inputs[k], true));
    Var loss = build(t, leaves);
    REQUIRE(t.value(loss).size() == 1);
    t.backward(loss);

    const double h = 1e-5;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
        const auto& g = t.grad(leaves[k]);
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            auto pert = inputs;
            pert[k][i] += h;
            double fp = eval_loss(build, shapes, pert);
            pert[k][i] -= 2 * h;
            double fm = eval_loss(build, shapes, pert);
            double fd = (fp - fm) / (2 * h);
            double rel = std::abs(g[i] - fd) / std::max(std::abs(fd), 1e-4);
            INFO("tensor " << k << " coord " << i << " tape " << g[i] << " fd " << fd);
            REQUIRE(rel <= 1e-5);
        }
    }
}

// Random weighting makes the scalarized loss sensitive to every output.
Var weighted_sum(Tape& t, Var y, std::uint64_t seed) {
    const auto& sh = t.shape(y);
    std::size_t sz = 1;
    for (auto e : sh) sz *= e;
    SeededRng rng(seed, "loss-weights");
    std::vector<double> w(sz);
    for (std::size_t i = 0; i < sz; ++i) w[i] = 2.0 * rng.uniform_at(i) - 1.0;
    return t.sum(t.mul(y, t.constant(sh, w)));
}

struct TmpDir {
    std::filesystem::path path;
    TmpDir() {
        path = std::filesystem::temp_directory_path() /
               ("omt_nn_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TmpDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("gradients of elementwise and reduction ops match finite differences") {
    std::vector<std::size_t> s{3, 4};
    for (std::uint64_t d = 0; d < 4; ++d) {
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.add(in[0], in[1]), d);
            },
            {s, s}, 100 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.sub(in[0], in[1]), d);
            },
            {s, s}, 200 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.mul(in[0], in[1]), d);
            },
            {s, s}, 300 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.neg(in[0]), d);
            },
            {s}, 400 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.smul(in[0], -1.7), d);
            },
            {s}, 500 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.sadd(in[0], 0.3), d);
            },
            {s}, 550 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) { return t.sum(in[0]); }, {s}, 600 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.sqrt_eps(in[0], 1e-12), d);
            },
            {s}, 700 + d, 0.5, 1.5);
    }
}

TEST_CASE("gradients of nonlinearities match finite differences") {
    std::vector<std::size_t> s{2, 5};
    for (std::uint64_t d = 0; d < 5; ++d) {
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.lrelu(in[0], 0.02), d);
            },
            {s}, 800 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.tanh_(in[0]), d);
            },
            {s}, 900 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) { return weighted_sum(t, t.sin_(in[0]), d); },
            {s}, 1000 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) { return weighted_sum(t, t.cos_(in[0]), d); },
            {s}, 1100 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) { return weighted_sum(t, t.exp_(in[0]), d); },
            {s}, 1200 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.softmax_rows(in[0]), d);
            },
            {s}, 1300 + d);
    }
}

TEST_CASE("gradients of matrix and structural ops match finite differences") {
    for (std::uint64_t d = 0; d < 4; ++d) {
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.matmul(in[0], in[1]), d);
            },
            {{3, 4}, {4, 2}}, 1400 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.transpose(in[0]), d);
            },
            {{3, 5}}, 1500 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.reshape(in[0], {2, 6}), d);
            },
            {{3, 4}}, 1600 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.rowscale(in[0], in[1]), d);
            },
            {{3, 4}, {3}}, 1700 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.addrow(in[0], in[1]), d);
            },
            {{3, 4}, {4}}, 1800 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.concat1({in[0], in[1]}), d);
            },
            {{2, 3, 4}, {2, 2, 4}}, 1900 + d);
    }
    // Involution permutation: reverse order is its own inverse.
    std::vector<std::size_t> perm{5, 4, 3, 2, 1, 0};
    for (std::uint64_t d = 0; d < 4; ++d) {
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.sym_perm(in[0], perm, -1.0), d);
            },
            {{6}}, 2000 + d);
    }
}

TEST_CASE("gradients of periodic convolutions match finite differences") {
    for (std::uint64_t d = 0; d < 4; ++d) {
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.conv1dp(in[0], in[1], in[2]), d);
            },
            {{2, 3, 7}, {4, 3, 5}, {4}}, 2100 + d);
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                return weighted_sum(t, t.conv2dp(in[0], in[1], in[2], 2), d);
            },
            {{2, 2, 4, 4}, {3, 2, 3, 3}, {3}}, 2200 + d);
    }
}

TEST_CASE("composed graph gradient matches finite differences") {
    // conv -> lrelu -> flatten -> dense -> tanh -> weighted sum, the same
    // shape of graph the encoders build.
    for (std::uint64_t d = 0; d < 20; ++d) {
        check_gradient(
            [&](Tape& t, const std::vector<Var>& in) {
                Var y = t.conv1dp(in[0], in[1], in[2]);
                y = t.lrelu(y, 0.02);
                y = t.reshape(y, {2, 3 * 5});
                y = t.addrow(t.matmul(y, in[3]), in[4]);
                y = t.tanh_(y);
                return weighted_sum(t, y, d);
            },
            {{2, 2, 5}, {3, 2, 3}, {3}, {15, 4}, {4}}, 2300 + d);
    }
}

TEST_CASE("convolution identities") {
    // Centered delta kernel is the identity plus bias.
    const std::size_t n = 9;
    Tape t;
    SeededRng rng(7, "conv-id");
    std::vector<double> xv(n);
    for (std::size_t i = 0; i < n; ++i) xv[i] = rng.gaussian_at(i);
    Var x = t.leaf({1, 1, n}, xv, false);
    Var w = t.constant({1, 1, 3}, {0.0, 1.0, 0.0});
    Var b = t.constant({1}, {0.25});
    Var y = t.conv1dp(x, w, b);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(t.value(y)[i] == xv[i] + 0.25);

    SECTION("translation equivariance is exact") {
        SeededRng wrng(8, "conv-w");
        std::vector<double> wv(2 * 3 * 5), bv{0.1, -0.2}, x2(3 * n);
        for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = wrng.gaussian_at(i);
        for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = wrng.gaussian_at(100 + i);
        for (std::size_t shift = 1; shift < n; ++shift) {
            std::vector<double> xs(3 * n);
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t i = 0; i < n; ++i) xs[c * n + i] = x2[c * n + (i + shift) % n];
            Tape ta;
            Var wva = ta.constant({2, 3, 5}, wv);
            Var bva = ta.constant({2}, bv);
            Var y0 = ta.conv1dp(ta.leaf({1, 3, n}, x2, false), wva, bva);
            Var y1 = ta.conv1dp(ta.leaf({1, 3, n}, xs, false), wva, bva);
            for (std::size_t c = 0; c < 2; ++c)
                for (std::size_t i = 0; i < n; ++i)
                    REQUIRE(ta.value(y1)[c * n + i] == ta.value(y0)[c * n + (i + shift) % n]);
        }
    }
}

TEST_CASE("activation values and softmax normalization") {
    Tape t;
    Var x = t.leaf({2}, {-1.0, 2.0}, false);
    auto y = t.value(t.lrelu(x, 0.02));
    REQUIRE(y[0] == Catch::Approx(-0.02));
    REQUIRE(y[1] == Catch::Approx(2.0));

    Var z = t.leaf({2, 3}, {0.0, 1.0, -2.0, 5.0, 5.0, 5.0}, false);
    auto sm = t.value(t.softmax_rows(z));
    REQUIRE(sm[0] + sm[1] + sm[2] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(sm[3] == Catch::Approx(1.0 / 3));
    REQUIRE(sm[1] > sm[0]);
    REQUIRE(sm[0] > sm[2]);
}

TEST_CASE("tape input validation") {
    Tape t;
    Var a = t.leaf({2, 2}, {1, 2, 3, 4}, true);
    Var b = t.leaf({3}, {1, 2, 3}, false);
    REQUIRE_THROWS_AS(t.add(a, b), std::invalid_argument);
    REQUIRE_THROWS_AS(t.matmul(a, b), std::invalid_argument);
    REQUIRE_THROWS_AS(t.backward(a), std::invalid_argument); // non-scalar loss
    REQUIRE_THROWS_AS(t.reshape(a, {5}), std::invalid_argument);
    REQUIRE_THROWS_AS(t.leaf({2}, {1.0}, false), std::invalid_argument);
    // Even conv window is rejected.
    Var x = t.leaf({1, 1, 8}, std::vector<double>(8, 0.0), false);
    Var w = t.leaf({1, 1, 4}, std::vector<double>(4, 0.0), false);
    Var bias = t.leaf({1}, {0.0}, false);
    REQUIRE_THROWS_AS(t.conv1dp(x, w, bias), std::invalid_argument);
}

TEST_CASE("gradients flow only from marked leaves") {
    Tape t;
    Var p = t.leaf({2}, {1.0, 2.0}, true);
    Var c = t.leaf({2}, {3.0, 4.0}, false);
    Var loss = t.sum(t.mul(p, c));
    t.backward(loss);
    REQUIRE(t.grad(p)[0] == 3.0);
    REQUIRE(t.grad(p)[1] == 4.0);
    REQUIRE_THROWS_AS(t.grad(c), std::logic_error);
}

TEST_CASE("layer specs validate and infer shapes") {
    REQUIRE_THROWS_AS(validate_layer(LayerSpec::conv1d(4, 8)), std::invalid_argument);
    REQUIRE_THROWS_AS(validate_layer(LayerSpec::conv1d(3, 0)), std::invalid_argument);
    REQUIRE_THROWS_AS(validate_layer(LayerSpec::full(0)), std::invalid_argument);

    auto sh = layer_output_shape(LayerSpec::conv1d(5, 8), {2, 21});
    REQUIRE(sh == std::vector<std::size_t>{8, 21});
    sh = layer_output_shape(LayerSpec::conv2(3, 4, 2), {1, 8, 8});
    REQUIRE(sh == std::vector<std::size_t>{4, 4, 4});
    sh = layer_output_shape(LayerSpec::full(10), {8, 21});
    REQUIRE(sh == std::vector<std::size_t>{10});
    REQUIRE_THROWS_AS(layer_output_shape(LayerSpec::conv1d(5, 8), {2, 3, 4}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(layer_output_shape(LayerSpec::conv2(3, 4, 3), {1, 8, 8}),
                      std::invalid_argument);
}

TEST_CASE("network construction is seeded and reproducible") {
    std::vector<LayerSpec> layers{LayerSpec::conv1d(5, 8), LayerSpec::act_lrelu(),
                                  LayerSpec::full(10), LayerSpec::act_linear()};
    Network a = make_network(layers, {2, 21}, 42);
    Network b = make_network(layers, {2, 21}, 42);
    Network c = make_network(layers, {2, 21}, 43);
    REQUIRE(a.params.tensors.size() == 4); // conv W,b + full W,b
    REQUIRE(a.params.tensors[0].shape() == std::vector<std::size_t>{8, 2, 5});
    REQUIRE(a.params.tensors[2].shape() == std::vector<std::size_t>{8 * 21, 10});
    bool all_equal = true, any_differ = false;
    for (std::size_t k = 0; k < a.params.tensors.size(); ++k)
        for (std::size_t i = 0; i < a.params.tensors[k].size(); ++i) {
            all_equal = all_equal && a.params.tensors[k][i] == b.params.tensors[k][i];
            any_differ = any_differ || a.params.tensors[k][i] != c.params.tensors[k][i];
        }
    REQUIRE(all_equal);
    REQUIRE(any_differ);

    // Glorot bound on the conv weights.
    double limit = std::sqrt(6.0 / (2 * 5 + 8 * 5));
    for (std::size_t i = 0; i < a.params.tensors[0].size(); ++i)
        REQUIRE(std::abs(a.params.tensors[0][i]) <= limit);
    // Biases start at zero.
    for (std::size_t i = 0; i < a.params.tensors[1].size(); ++i)
        REQUIRE(a.params.tensors[1][i] == 0.0);

    // Forward is bit-deterministic.
    SeededRng rng(5, "net-in");
    RTensor sample({2, 21});
    for (std::size_t i = 0; i < sample.size(); ++i) sample[i] = rng.gaussian_at(i);
    RTensor y0 = network_eval(a, sample);
    RTensor y1 = network_eval(a, sample);
    REQUIRE(y0.shape() == std::vector<std::size_t>{10});
    for (std::size_t i = 0; i < y0.size(); ++i) REQUIRE(y0[i] == y1[i]);
}

TEST_CASE("adam converges on a quadratic and guards its inputs") {
    NetworkParams params;
    RTensor x({5});
    std::vector<double> target{0.3, -1.2, 4.0, 0.0, -0.7};
    params.tensors.push_back(x);
    AdamState st = make_adam_state(params);

    SECTION("zero gradient leaves parameters unchanged") {
        NetworkParams before = params;
        adam_step(params, {std::vector<double>(5, 0.0)}, st, 1e-2);
        for (std::size_t i = 0; i < 5; ++i)
            REQUIRE(params.tensors[0][i] == before.tensors[0][i]);
    }

    SECTION("non-finite gradient throws") {
        std::vector<double> g(5, 0.0);
        g[2] = std::numeric_limits<double>::quiet_NaN();
        REQUIRE_THROWS_AS(adam_step(params, {g}, st, 1e-2), std::runtime_error);
        g[2] = std::numeric_limits<double>::infinity();
        REQUIRE_THROWS_AS(adam_step(params, {g}, st, 1e-2), std::runtime_error);
    }

    SECTION("2000 steps of lr 1e-2 solves least squares to 1e-4") {
        for (int it = 0; it < 2000; ++it) {
            std::vector<double> g(5);
            for (std::size_t i = 0; i < 5; ++i)
                g[i] = 2.0 * (params.tensors[0][i] - target[i]);
            adam_step(params, {g}, st, 1e-2);
        }
        for (std::size_t i = 0; i < 5; ++i)
            REQUIRE(std::abs(params.tensors[0][i] - target[i]) <= 1e-4);
    }

    SECTION("gradient shape mismatch throws") {
        REQUIRE_THROWS_AS(adam_step(params, {std::vector<double>(4, 0.0)}, st, 1e-2),
                          std::invalid_argument);
    }
}

TEST_CASE("adam drives a tape-built network loss down") {
    // Tiny regression: one dense layer learns an affine map.
    Network net = make_network({LayerSpec::full(2), LayerSpec::act_linear()}, {3}, 11);
    AdamState st = make_adam_state(net.params);
    SeededRng rng(12, "adam-net");
    const std::size_t B = 16;
    std::vector<double> xv(B * 3), yv(B * 2);
    for (std::size_t i = 0; i < B * 3; ++i) xv[i] = rng.gaussian_at(i);
    for (std::size_t s = 0; s < B; ++s) {
        yv[s * 2 + 0] = 0.5 * xv[s * 3 + 0] - xv[s * 3 + 1] + 0.2;
        yv[s * 2 + 1] = xv[s * 3 + 2] - 0.1;
    }
    double first = 0, last = 0;
    for (int it = 0; it < 1500; ++it) {
        Tape t;
        std::vector<Var> pvars;
        Var x = t.leaf({B, 3}, xv, false);
        Var y = network_forward(t, net, x, &pvars, true);
        Var d = t.sub(y, t.constant({B, 2}, yv));
        Var loss = t.smul(t.sum(t.mul(d, d)), 1.0 / double(B));
        t.backward(loss);
        std::vector<std::vector<double>> grads;
        for (Var p : pvars) grads.push_back(t.grad(p));
        if (it == 0) first = t.value(loss)[0];
        last = t.value(loss)[0];
        adam_step(net.params, grads, st, 1e-2);
    }
    REQUIRE(last < 1e-6);
    REQUIRE(first > last);
}

TEST_CASE("parameter files round-trip bit-exactly") {
    TmpDir tmp;
    std::vector<LayerSpec> layers{LayerSpec::conv1d(5, 4), LayerSpec::act_lrelu(),
                                  LayerSpec::full(7), LayerSpec::act_tanh()};
    Network net = make_network(layers, {2, 9}, 77);
    const std::string path = tmp.file("net.omtp");
    save_network(path, net);

    Network loaded = load_network(path);
    REQUIRE(loaded.layers.size() == net.layers.size());
    REQUIRE(loaded.in_shape == net.in_shape);
    REQUIRE(loaded.params.init_seed == net.params.init_seed);
    REQUIRE(loaded.params.tensors.size() == net.params.tensors.size());
    for (std::size_t k = 0; k < net.params.tensors.size(); ++k) {
        REQUIRE(loaded.params.tensors[k].shape() == net.params.tensors[k].shape());
        for (std::size_t i = 0; i < net.params.tensors[k].size(); ++i)
            REQUIRE(loaded.params.tensors[k][i] == net.params.tensors[k][i]);
    }

    SECTION("checksum is stable across save and load") {
        auto arch = chain_arch_json(net.layers, net.in_shape);
        std::string c1 = params_checksum(arch, net.params);
        std::string c2 = params_checksum(arch, loaded.params);
        REQUIRE(c1 == c2);
        REQUIRE(c1.size() == 64);
    }

    SECTION("loading into a mismatched architecture reports shape mismatch") {
        Network other = make_network({LayerSpec::conv1d(5, 4), LayerSpec::act_lrelu(),
                                      LayerSpec::full(8), LayerSpec::act_tanh()},
                                     {2, 9}, 3);
        REQUIRE_THROWS_WITH(load_params_into(path, other),
                            Catch::Matchers::ContainsSubstring("shape mismatch"));
        Network same = make_network(layers, {2, 9}, 999);
        load_params_into(path, same);
        for (std::size_t k = 0; k < net.params.tensors.size(); ++k)
            for (std::size_t i = 0; i < net.params.tensors[k].size(); ++i)
                REQUIRE(same.params.tensors[k][i] == net.params.tensors[k][i]);
    }

    SECTION("corrupt containers are rejected") {
        REQUIRE_THROWS(params_from_bytes("XXXX"));
        std::string good = params_to_bytes(chain_arch_json(net.layers, net.in_shape), net.params);
        REQUIRE_THROWS(params_from_bytes(good.substr(0, good.size() - 3)));
        REQUIRE_THROWS(params_from_bytes(good + "zz"));
    }
}
