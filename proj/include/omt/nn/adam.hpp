#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "omt/nn/layers.hpp"

namespace omt {

// Adam with bias correction; beta1 = 0.9, beta2 = 0.999, eps = 1e-8.

struct AdamState {
    std::vector<std::vector<double>> m; // first-moment accumulators
    std::vector<std::vector<double>> v; // second-moment accumulators
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline AdamState make_adam_state(const NetworkParams& params) {
    AdamState st;
    st.m.reserve(params.tensors.size());
    st.v.reserve(params.tensors.size());
    for (const auto& t : params.tensors) {
        st.m.emplace_back(t.size(), 0.0);
        st.v.emplace_back(t.size(), 0.0);
    }
    return st;
}

/// One update over every tensor. grads[i] is the flat gradient of tensor i.
/// Throws if any gradient entry is non-finite; an all-zero gradient leaves
/// the parameters bit-identical.
inline void adam_step(NetworkParams& params, const std::vector<std::vector<double>>& grads,
                      AdamState& st, double lr) {
    if (grads.size() != params.tensors.size() || st.m.size() != params.tensors.size())
        throw std::invalid_argument("adam_step: tensor count mismatch");
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (grads[k].size() != params.tensors[k].size())
            throw std::invalid_argument("adam_step: gradient size mismatch");
        for (double gv : grads[k])
            if (!std::isfinite(gv))
                throw std::runtime_error("adam_step: non-finite gradient");
    }
    st.step += 1;
    const double c1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, double(st.step));
    for (std::size_t k = 0; k < grads.size(); ++k) {
        auto& theta = params.tensors[k];
        auto& m = st.m[k];
        auto& v = st.v[k];
        const auto& grd = grads[k];
        for (std::size_t i = 0; i < grd.size(); ++i) {
            double gv = grd[i];
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * gv;
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * gv * gv;
            double mhat = m[i] / c1;
            double vhat = v[i] / c2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

} // namespace omt
