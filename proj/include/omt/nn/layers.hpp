#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omt/core/rng.hpp"
#include "omt/core/tensor.hpp"
#include "omt/nn/tape.hpp"

namespace omt {

// Static layer descriptions. A network is a fixed ordered list of layers;
// parameter tensors live in a NetworkParams in layer order (weight then bias
// for each parameterized layer). Complex-valued inputs are presented as
// doubled real channels, so every layer works on real tensors.

struct LayerSpec {
    enum class Kind { conv1d_periodic, conv2d, fully_connected, lrelu, tanh, linear };

    Kind kind = Kind::linear;
    std::size_t window = 1;   // conv kernels, odd
    std::size_t channels = 1; // conv output channels
    std::size_t width = 0;    // fully_connected output width
    std::size_t stride = 1;   // conv2d downsampling

    static LayerSpec conv1d(std::size_t window, std::size_t channels) {
        LayerSpec s;
        s.kind = Kind::conv1d_periodic;
        s.window = window;
        s.channels = channels;
        return s;
    }
    static LayerSpec conv2(std::size_t window, std::size_t channels, std::size_t stride = 1) {
        LayerSpec s;
        s.kind = Kind::conv2d;
        s.window = window;
        s.channels = channels;
        s.stride = stride;
        return s;
    }
    static LayerSpec full(std::size_t width) {
        LayerSpec s;
        s.kind = Kind::fully_connected;
        s.width = width;
        return s;
    }
    static LayerSpec act_lrelu() {
        LayerSpec s;
        s.kind = Kind::lrelu;
        return s;
    }
    static LayerSpec act_tanh() {
        LayerSpec s;
        s.kind = Kind::tanh;
        return s;
    }
    static LayerSpec act_linear() {
        LayerSpec s;
        s.kind = Kind::linear;
        return s;
    }
};

inline const char* layer_kind_name(LayerSpec::Kind k) {
    switch (k) {
        case LayerSpec::Kind::conv1d_periodic: return "conv1d_periodic";
        case LayerSpec::Kind::conv2d: return "conv2d";
        case LayerSpec::Kind::fully_connected: return "fully_connected";
        case LayerSpec::Kind::lrelu: return "lrelu";
        case LayerSpec::Kind::tanh: return "tanh";
        case LayerSpec::Kind::linear: return "linear";
    }
    return "?";
}

inline LayerSpec::Kind layer_kind_from_name(const std::string& s) {
    if (s == "conv1d_periodic") return LayerSpec::Kind::conv1d_periodic;
    if (s == "conv2d") return LayerSpec::Kind::conv2d;
    if (s == "fully_connected") return LayerSpec::Kind::fully_connected;
    if (s == "lrelu") return LayerSpec::Kind::lrelu;
    if (s == "tanh") return LayerSpec::Kind::tanh;
    if (s == "linear") return LayerSpec::Kind::linear;
    throw std::invalid_argument("unknown layer kind: " + s);
}

inline void validate_layer(const LayerSpec& s) {
    switch (s.kind) {
        case LayerSpec::Kind::conv1d_periodic:
        case LayerSpec::Kind::conv2d:
            if (s.window % 2 == 0 || s.window < 1)
                throw std::invalid_argument("conv window must be odd and >= 1");
            if (s.channels < 1) throw std::invalid_argument("conv channels must be >= 1");
            if (s.stride < 1) throw std::invalid_argument("conv stride must be >= 1");
            break;
        case LayerSpec::Kind::fully_connected:
            if (s.width < 1) throw std::invalid_argument("fully_connected width must be >= 1");
            break;
        default: break;
    }
}

inline bool layer_has_params(LayerSpec::Kind k) {
    return k == LayerSpec::Kind::conv1d_periodic || k == LayerSpec::Kind::conv2d ||
           k == LayerSpec::Kind::fully_connected;
}

/// Per-sample output shape of a layer applied to a per-sample input shape.
inline std::vector<std::size_t> layer_output_shape(const LayerSpec& s,
                                                   const std::vector<std::size_t>& in) {
    validate_layer(s);
    switch (s.kind) {
        case LayerSpec::Kind::conv1d_periodic:
            if (in.size() != 2)
                throw std::invalid_argument("conv1d_periodic input must be [channels][n]");
            return {s.channels, in[1]};
        case LayerSpec::Kind::conv2d: {
            if (in.size() != 3)
                throw std::invalid_argument("conv2d input must be [channels][h][w]");
            if (in[1] % s.stride || in[2] % s.stride)
                throw std::invalid_argument("conv2d stride must divide image extent");
            return {s.channels, in[1] / s.stride, in[2] / s.stride};
        }
        case LayerSpec::Kind::fully_connected: return {s.width};
        default: return in;
    }
}

struct NetworkParams {
    std::vector<RTensor> tensors; // weight, bias pairs in layer order
    std::uint64_t init_seed = 0;

    std::size_t count() const {
        std::size_t c = 0;
        for (const auto& t : tensors) c += t.size();
        return c;
    }
};

namespace nn_detail {

/// Glorot-uniform weight tensor; one counter-addressed substream per slot.
inline RTensor glorot(const std::vector<std::size_t>& shape, std::size_t fan_in,
                      std::size_t fan_out, const SeededRng& rng, std::uint64_t slot) {
    RTensor w(shape);
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    SeededRng sub = rng.substream(slot);
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = (2.0 * sub.uniform_at(i) - 1.0) * limit;
    return w;
}

} // namespace nn_detail

/// Append freshly initialized parameter tensors for a layer chain applied to
/// per-sample shape `shape`; advances shape and the substream slot counter.
inline void append_chain_params(std::vector<RTensor>& out, const std::vector<LayerSpec>& layers,
                                std::vector<std::size_t>& shape, const SeededRng& rng,
                                std::uint64_t& slot) {
    for (const LayerSpec& s : layers) {
        std::vector<std::size_t> next = layer_output_shape(s, shape);
        switch (s.kind) {
            case LayerSpec::Kind::conv1d_periodic: {
                std::size_t cin = shape[0];
                out.push_back(nn_detail::glorot({s.channels, cin, s.window}, cin * s.window,
                                                s.channels * s.window, rng, slot++));
                out.emplace_back(std::vector<std::size_t>{s.channels});
                ++slot;
                break;
            }
            case LayerSpec::Kind::conv2d: {
                std::size_t cin = shape[0];
                out.push_back(nn_detail::glorot({s.channels, cin, s.window, s.window},
                                                cin * s.window * s.window,
                                                s.channels * s.window * s.window, rng, slot++));
                out.emplace_back(std::vector<std::size_t>{s.channels});
                ++slot;
                break;
            }
            case LayerSpec::Kind::fully_connected: {
                std::size_t fin = detail::shape_product(shape);
                out.push_back(nn_detail::glorot({fin, s.width}, fin, s.width, rng, slot++));
                out.emplace_back(std::vector<std::size_t>{s.width});
                ++slot;
                break;
            }
            default: break;
        }
        shape = std::move(next);
    }
}

/// Forward a batched input [B, per-sample shape...] through a layer chain,
/// consuming parameter tensors from params[cursor...]. Parameter tape nodes
/// are appended to param_vars when it is non-null.
inline Var chain_forward(Tape& t, const std::vector<LayerSpec>& layers, Var x,
                         const std::vector<RTensor>& params, std::size_t& cursor,
                         std::vector<Var>* param_vars, bool params_need_grad) {
    auto take = [&](void) -> Var {
        if (cursor >= params.size())
            throw std::invalid_argument("network parameters exhausted mid-chain");
        Var v = t.leaf(params[cursor], params_need_grad);
        ++cursor;
        if (param_vars) param_vars->push_back(v);
        return v;
    };
    for (const LayerSpec& s : layers) {
        validate_layer(s);
        switch (s.kind) {
            case LayerSpec::Kind::conv1d_periodic: {
                Var w = take(), b = take();
                x = t.conv1dp(x, w, b);
                break;
            }
            case LayerSpec::Kind::conv2d: {
                Var w = take(), b = take();
                x = t.conv2dp(x, w, b, s.stride);
                break;
            }
            case LayerSpec::Kind::fully_connected: {
                const auto& sh = t.shape(x);
                std::size_t B = sh[0];
                std::size_t f = 1;
                for (std::size_t d = 1; d < sh.size(); ++d) f *= sh[d];
                Var flat = sh.size() == 2 ? x : t.reshape(x, {B, f});
                Var w = take(), b = take();
                x = t.addrow(t.matmul(flat, w), b);
                break;
            }
            case LayerSpec::Kind::lrelu: x = t.lrelu(x, 0.02); break;
            case LayerSpec::Kind::tanh: x = t.tanh_(x); break;
            case LayerSpec::Kind::linear: break;
        }
    }
    return x;
}

/// A single-chain network with its parameters.
struct Network {
    std::vector<LayerSpec> layers;
    std::vector<std::size_t> in_shape; // per-sample
    NetworkParams params;
};

inline Network make_network(std::vector<LayerSpec> layers, std::vector<std::size_t> in_shape,
                            std::uint64_t init_seed) {
    Network net;
    net.layers = std::move(layers);
    net.in_shape = in_shape;
    net.params.init_seed = init_seed;
    SeededRng rng(init_seed, "glorot-init");
    std::uint64_t slot = 0;
    std::vector<std::size_t> shape = in_shape;
    append_chain_params(net.params.tensors, net.layers, shape, rng, slot);
    return net;
}

/// Per-sample output shape of a whole chain.
inline std::vector<std::size_t> chain_output_shape(const std::vector<LayerSpec>& layers,
                                                   std::vector<std::size_t> shape) {
    for (const LayerSpec& s : layers) shape = layer_output_shape(s, shape);
    return shape;
}

inline Var network_forward(Tape& t, const Network& net, Var x, std::vector<Var>* param_vars,
                           bool params_need_grad) {
    std::size_t cursor = 0;
    Var y = chain_forward(t, net.layers, x, net.params.tensors, cursor, param_vars,
                          params_need_grad);
    if (cursor != net.params.tensors.size())
        throw std::invalid_argument("network has unused parameter tensors");
    return y;
}

/// Plain (tape-free) evaluation for one sample; bit-identical to the tape
/// path because both walk the same arithmetic in the same order.
inline RTensor network_eval(const Network& net, const RTensor& sample) {
    Tape t;
    std::vector<std::size_t> shape = sample.shape();
    shape.insert(shape.begin(), 1);
    Var x = t.leaf(shape, sample.raw(), false);
    Var y = network_forward(t, net, x, nullptr, false);
    std::vector<std::size_t> out_shape = t.shape(y);
    out_shape.erase(out_shape.begin());
    RTensor out(out_shape);
    const auto& v = t.value(y);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i];
    return out;
}

inline nlohmann::json layer_to_json(const LayerSpec& s) {
    return nlohmann::json{{"kind", layer_kind_name(s.kind)},
                          {"window", s.window},
                          {"channels", s.channels},
                          {"width", s.width},
                          {"stride", s.stride}};
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
    LayerSpec s;
    s.kind = layer_kind_from_name(j.at("kind").get<std::string>());
    s.window = j.at("window").get<std::size_t>();
    s.channels = j.at("channels").get<std::size_t>();
    s.width = j.at("width").get<std::size_t>();
    s.stride = j.at("stride").get<std::size_t>();
    validate_layer(s);
    return s;
}

} // namespace omt
