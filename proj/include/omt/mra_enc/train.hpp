#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "omt/core/rng.hpp"
#include "omt/io/csv.hpp"
#include "omt/mra/metrics.hpp"
#include "omt/mra_enc/dataset.hpp"
#include "omt/mra_enc/encoder.hpp"
#include "omt/nn/adam.hpp"

namespace omt {

// Supervised training of one encoder head against dataset targets by mean
// squared error. Batches, shuffles, and updates are all counter-seeded and
// sequential, so a (seed, dataset) pair always produces bit-identical
// parameters.

struct TrainConfig {
    double test_fraction = 0.1;
    std::size_t batch = 128;
    std::vector<std::pair<double, std::size_t>> schedule = {{1e-4, 10}}; // (lr, epochs)
    std::uint64_t seed = 0;
    std::size_t error_sample_cap = 5000; // pairs used when reporting errors
};

struct TrainResult {
    double train_error = 0;
    double test_error = 0;
    double final_loss = 0;
    CsvTable trace; // epoch, lr, mean batch loss
};

namespace train_detail {

inline void gather_batch(const MraDataset& ds, const std::vector<std::size_t>& idx,
                         std::size_t lo, std::size_t hi, std::size_t out_width,
                         const RTensor& targets, RTensor& m1b, RTensor& m2b, RTensor& tb) {
    const std::size_t n = ds.n, B = hi - lo;
    m1b = RTensor({B, 2, n});
    m2b = RTensor({B, 2 * n, n});
    tb = RTensor({B, out_width});
    for (std::size_t s = 0; s < B; ++s) {
        std::size_t i = idx[lo + s];
        std::copy(ds.inputs_m1.raw().begin() + long(i * 2 * n),
                  ds.inputs_m1.raw().begin() + long((i + 1) * 2 * n),
                  m1b.raw().begin() + long(s * 2 * n));
        std::copy(ds.inputs_m2.raw().begin() + long(i * 2 * n * n),
                  ds.inputs_m2.raw().begin() + long((i + 1) * 2 * n * n),
                  m2b.raw().begin() + long(s * 2 * n * n));
        std::copy(targets.raw().begin() + long(i * out_width),
                  targets.raw().begin() + long((i + 1) * out_width),
                  tb.raw().begin() + long(s * out_width));
    }
}

/// Mean relative error of the encoder over dataset rows [lo, hi).
inline double mean_relative_error(const MraEncoder& enc, const MraDataset& ds, std::size_t lo,
                                  std::size_t hi, std::size_t cap) {
    const std::size_t n = ds.n;
    const std::size_t out = encoder_output_width(enc);
    std::size_t count = std::min(hi - lo, cap);
    if (count == 0) return 0.0;
    const RTensor& targets =
        enc.head == MraEncoder::Head::rho ? ds.targets_rho : ds.targets_v;
    double acc = 0;
    const std::size_t chunk = 256;
    for (std::size_t base = 0; base < count; base += chunk) {
        std::size_t B = std::min(chunk, count - base);
        std::vector<std::size_t> idx(B);
        std::iota(idx.begin(), idx.end(), lo + base);
        RTensor m1b, m2b, tb;
        gather_batch(ds, idx, 0, B, out, targets, m1b, m2b, tb);
        RTensor pred = mra_encoder_eval(enc, m1b, m2b);
        for (std::size_t s = 0; s < B; ++s) {
            if (enc.head == MraEncoder::Head::rho) {
                std::vector<double> p(n), q(n);
                for (std::size_t j = 0; j < n; ++j) {
                    p[j] = pred[s * n + j];
                    q[j] = tb[s * n + j];
                }
                acc += relative_error_density(p, q);
            } else {
                acc += relative_error_fourier(unpack_v(pred.raw().data() + s * out, n),
                                              unpack_v(tb.raw().data() + s * out, n));
            }
        }
    }
    return acc / double(count);
}

} // namespace train_detail

inline TrainResult train_supervised(
    MraEncoder& enc, const MraDataset& ds, const TrainConfig& cfg,
    const std::function<void(std::size_t, double, double)>& progress = nullptr) {
    if (ds.count == 0) throw std::invalid_argument("train_supervised: empty dataset");
    if (ds.n != enc.n) throw std::invalid_argument("train_supervised: grid size mismatch");
    if (cfg.batch < 1) throw std::invalid_argument("train_supervised: batch must be >= 1");
    if (cfg.test_fraction < 0 || cfg.test_fraction >= 1)
        throw std::invalid_argument("train_supervised: test fraction must be in [0,1)");
    for (const auto& [lr, epochs] : cfg.schedule) {
        if (!(lr > 0)) throw std::invalid_argument("train_supervised: lr must be > 0");
        if (epochs < 1) throw std::invalid_argument("train_supervised: epochs must be >= 1");
    }

    const std::size_t out = encoder_output_width(enc);
    const std::size_t ntest = std::size_t(std::llround(cfg.test_fraction * double(ds.count)));
    const std::size_t ntrain = ds.count - ntest;
    if (ntrain == 0) throw std::invalid_argument("train_supervised: no training rows left");
    const RTensor& targets =
        enc.head == MraEncoder::Head::rho ? ds.targets_rho : ds.targets_v;

    AdamState st = make_adam_state(enc.params);
    SeededRng shuffle_rng(cfg.seed, "train-shuffle");
    TrainResult res;
    res.trace.header = {"epoch", "lr", "loss"};

    std::vector<std::size_t> idx(ntrain);
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t global_epoch = 0;
    for (const auto& [lr, epochs] : cfg.schedule) {
        for (std::size_t e = 0; e < epochs; ++e, ++global_epoch) {
            SeededRng er = shuffle_rng.substream(global_epoch);
            for (std::size_t i = ntrain; i > 1; --i)
                std::swap(idx[i - 1], idx[er.u64_at(i) % i]);
            double loss_acc = 0;
            std::size_t batches = 0;
            for (std::size_t lo = 0; lo < ntrain; lo += cfg.batch) {
                std::size_t hi = std::min(lo + cfg.batch, ntrain);
                RTensor m1b, m2b, tb;
                train_detail::gather_batch(ds, idx, lo, hi, out, targets, m1b, m2b, tb);
                Tape t;
                std::vector<Var> pvars;
                Var x1 = t.leaf(m1b, false);
                Var x2 = t.leaf(m2b, false);
                Var y = mra_encoder_forward(t, enc, x1, x2, &pvars, true);
                Var d = t.sub(y, t.leaf(tb, false));
                Var loss = t.smul(t.sum(t.mul(d, d)), 1.0 / double((hi - lo) * out));
                double lv = t.value(loss)[0];
                if (!std::isfinite(lv))
                    throw std::runtime_error(
                        "train_supervised: loss diverged (non-finite) at epoch " +
                        std::to_string(global_epoch) + " batch " + std::to_string(batches) +
                        " lr " + std::to_string(lr));
                t.backward(loss);
                std::vector<std::vector<double>> grads;
                grads.reserve(pvars.size());
                for (Var p : pvars) grads.push_back(t.grad(p));
                adam_step(enc.params, grads, st, lr);
                loss_acc += lv;
                ++batches;
            }
            double mean_loss = loss_acc / double(batches);
            res.trace.rows.push_back({double(global_epoch), lr, mean_loss});
            res.final_loss = mean_loss;
            if (progress) progress(global_epoch, lr, mean_loss);
        }
    }

    res.train_error =
        train_detail::mean_relative_error(enc, ds, 0, ntrain, cfg.error_sample_cap);
    res.test_error = ntest == 0 ? 0.0
                                : train_detail::mean_relative_error(enc, ds, ntrain, ds.count,
                                                                    cfg.error_sample_cap);
    return res;
}

} // namespace omt
