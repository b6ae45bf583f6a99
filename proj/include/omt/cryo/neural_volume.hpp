#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "omt/core/rng.hpp"
#include "omt/core/tensor.hpp"
#include "omt/cryo/moments2d.hpp"
#include "omt/cryo/slice.hpp"
#include "omt/cryo/volume.hpp"
#include "omt/nn/layers.hpp"
#include "omt/nn/serialize.hpp"
#include "omt/nn/tape.hpp"

namespace omt {

/// Learned Fourier-domain volume. The raw value at grid-unit frequency k is
/// amp(e(k)) * exp(i * phase(e(k))) with e the sinusoidal positional
/// encoding; the reported value is Hermitian-symmetrized,
/// 0.5 * (f(k) + conj(f(-k))), and zero outside the ball ||k|| <= kmax, so
/// the represented volume is real valued and bandlimited by construction.
/// An optional latent vector is appended to the encoding of every point.
struct NeuralVolume {
    std::size_t octaves = 8;      // positional-encoding octaves
    double kmax = 7.5;            // bandlimit radius in grid units
    std::size_t latent_width = 0; // 0 disables the latent input
    std::vector<LayerSpec> amp_layers;
    std::vector<LayerSpec> phase_layers;
    NetworkParams params; // amplitude tensors then phase tensors

    std::size_t feature_width() const { return 6 * octaves + latent_width; }
};

inline NeuralVolume make_neural_volume(double kmax, std::uint64_t seed,
                                       std::size_t latent_width = 0, std::size_t octaves = 8,
                                       std::size_t hidden = 64) {
    if (!(kmax > 0)) throw std::invalid_argument("neural volume: kmax must be positive");
    if (octaves < 1 || octaves > 24)
        throw std::invalid_argument("neural volume: octaves out of range");
    NeuralVolume vol;
    vol.octaves = octaves;
    vol.kmax = kmax;
    vol.latent_width = latent_width;
    std::vector<LayerSpec> chain = {LayerSpec::full(hidden), LayerSpec::act_lrelu(),
                                    LayerSpec::full(hidden), LayerSpec::act_lrelu(),
                                    LayerSpec::full(hidden), LayerSpec::act_lrelu(),
                                    LayerSpec::full(1),      LayerSpec::act_linear()};
    vol.amp_layers = chain;
    vol.phase_layers = chain;
    vol.params.init_seed = seed;
    SeededRng rng(seed, "glorot-init");
    std::uint64_t slot = 0;
    std::vector<std::size_t> shape{vol.feature_width()};
    append_chain_params(vol.params.tensors, vol.amp_layers, shape, rng, slot);
    shape = {vol.feature_width()};
    append_chain_params(vol.params.tensors, vol.phase_layers, shape, rng, slot);
    return vol;
}

/// Sinusoidal features of a point list [P,3] in grid units: per octave l and
/// axis d, sin(2^l w_d) and cos(2^l w_d) with w = pi k / kmax in [-pi, pi]
/// on the bandlimit ball. Latent entries are appended by the caller.
inline RTensor positional_encoding(const NeuralVolume& vol, const RTensor& points) {
    if (points.rank() != 2 || points.extent(1) != 3)
        throw std::invalid_argument("neural volume: points must be [P,3]");
    const std::size_t P = points.extent(0);
    const std::size_t L = vol.octaves;
    RTensor out({P, 6 * L});
    for (std::size_t p = 0; p < P; ++p) {
        const double* k = points.data() + 3 * p;
        const double w[3] = {pi * k[0] / vol.kmax, pi * k[1] / vol.kmax, pi * k[2] / vol.kmax};
        double* row = out.data() + p * 6 * L;
        std::size_t col = 0;
        for (std::size_t l = 0; l < L; ++l) {
            const double scale = std::ldexp(1.0, int(l));
            for (int d = 0; d < 3; ++d) {
                row[col++] = std::sin(scale * w[d]);
                row[col++] = std::cos(scale * w[d]);
            }
        }
    }
    return out;
}

/// Ball-membership multipliers (1 inside ||k|| <= kmax, else 0).
inline std::vector<double> bandlimit_mask_values(const NeuralVolume& vol, const RTensor& points) {
    const std::size_t P = points.extent(0);
    std::vector<double> mask(P);
    const double r2 = vol.kmax * vol.kmax * (1.0 + 1e-12) + 1e-12;
    for (std::size_t p = 0; p < P; ++p) {
        const double* k = points.data() + 3 * p;
        mask[p] = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2] <= r2) ? 1.0 : 0.0;
    }
    return mask;
}

/// Row permutation sending each point of a slice stack to its negation:
/// rows are j*n*n + a*n + b and the grids of all slices are closed under
/// frequency negation, so this is an involution.
inline std::vector<std::size_t> slice_negation_perm(std::size_t count, std::size_t n) {
    std::vector<std::size_t> perm(count * n * n);
    for (std::size_t j = 0; j < count; ++j)
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                perm[(j * n + a) * n + b] = (j * n + (n - a) % n) * n + (n - b) % n;
    return perm;
}

namespace cryo_detail {

/// Feature leaf for a fixed precomputed encoding, with the latent vector
/// broadcast and concatenated column-wise when the volume uses one.
inline Var neural_feature_var(Tape& t, const NeuralVolume& vol, const RTensor& pe,
                              const Var* latent) {
    const std::size_t P = pe.extent(0);
    Var x = t.leaf(pe, false);
    if (vol.latent_width == 0) {
        if (latent) throw std::invalid_argument("neural volume: latent input not enabled");
        return x;
    }
    if (!latent) throw std::invalid_argument("neural volume: latent vector required");
    Var lat = *latent;
    if (t.shape(lat).size() != 1) lat = t.reshape(lat, {t.value(lat).size()});
    if (t.value(lat).size() != vol.latent_width)
        throw std::invalid_argument("neural volume: latent width mismatch");
    Var zeros = t.leaf({P, vol.latent_width}, std::vector<double>(P * vol.latent_width, 0.0),
                       false);
    Var bcast = t.addrow(zeros, lat);
    Var pe3 = t.reshape(x, {P, pe.extent(1), 1});
    Var lat3 = t.reshape(bcast, {P, vol.latent_width, 1});
    Var cat = t.concat1({pe3, lat3});
    return t.reshape(cat, {P, pe.extent(1) + vol.latent_width});
}

} // namespace cryo_detail

/// Tape forward at a fixed point list closed under negation. `pe` is the
/// precomputed encoding of the points, `neg_perm` maps each row to the row
/// holding its negated point, and `mask` (optional, empty = all inside)
/// zeroes rows outside the bandlimit ball. Returns symmetrized values with
/// shape [P,1].
inline CVar neural_volume_forward(Tape& t, const NeuralVolume& vol, const RTensor& pe,
                                  const std::vector<std::size_t>& neg_perm,
                                  const std::vector<double>& mask, const Var* latent,
                                  std::vector<Var>* param_vars, bool params_need_grad) {
    const std::size_t P = pe.extent(0);
    if (neg_perm.size() != P)
        throw std::invalid_argument("neural volume: negation permutation size mismatch");
    Var x = cryo_detail::neural_feature_var(t, vol, pe, latent);
    std::size_t cursor = 0;
    Var a = chain_forward(t, vol.amp_layers, x, vol.params.tensors, cursor, param_vars,
                          params_need_grad);
    Var b = chain_forward(t, vol.phase_layers, x, vol.params.tensors, cursor, param_vars,
                          params_need_grad);
    if (cursor != vol.params.tensors.size())
        throw std::invalid_argument("neural volume has unused parameter tensors");
    Var re = t.mul(a, t.cos_(b));
    Var im = t.mul(a, t.sin_(b));
    if (!mask.empty()) {
        if (mask.size() != P) throw std::invalid_argument("neural volume: mask size mismatch");
        Var m = t.leaf({P, 1}, mask, false);
        re = t.mul(re, m);
        im = t.mul(im, m);
    }
    // real part even, imaginary part odd under frequency negation
    return {t.sym_perm(re, neg_perm, +1.0), t.sym_perm(im, neg_perm, -1.0)};
}

/// Hermitian-symmetrized values at an arbitrary point list (grid units),
/// evaluated in bounded chunks. Matches the tape path bit for bit on point
/// lists the tape path accepts.
inline std::vector<cdouble> eval_neural_volume(const NeuralVolume& vol, const RTensor& points,
                                               const std::vector<double>& latent = {}) {
    if (points.rank() != 2 || points.extent(1) != 3)
        throw std::invalid_argument("neural volume: points must be [P,3]");
    if (latent.size() != vol.latent_width)
        throw std::invalid_argument("neural volume: latent width mismatch");
    const std::size_t P = points.extent(0);
    std::vector<cdouble> out(P);
    const std::size_t chunk = 4096;
    for (std::size_t lo = 0; lo < P; lo += chunk) {
        const std::size_t hi = std::min(P, lo + chunk);
        const std::size_t B = hi - lo;
        // stacked +k rows then -k rows; the negation permutation swaps them
        RTensor both({2 * B, 3});
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t d = 0; d < 3; ++d) {
                double v = points.at2(lo + i, d);
                both.at2(i, d) = v;
                both.at2(B + i, d) = -v;
            }
        std::vector<std::size_t> perm(2 * B);
        for (std::size_t i = 0; i < B; ++i) {
            perm[i] = B + i;
            perm[B + i] = i;
        }
        Tape t;
        Var latvar{};
        const Var* latptr = nullptr;
        if (vol.latent_width > 0) {
            latvar = t.leaf({vol.latent_width}, latent, false);
            latptr = &latvar;
        }
        CVar vals = neural_volume_forward(t, vol, positional_encoding(vol, both), perm,
                                          bandlimit_mask_values(vol, both), latptr, nullptr,
                                          false);
        const auto& re = t.value(vals.re);
        const auto& im = t.value(vals.im);
        for (std::size_t i = 0; i < B; ++i) out[lo + i] = cdouble(re[i], im[i]);
    }
    return out;
}

/// Slice of a neural volume for one rotation, evaluated as a single batch.
inline CTensor neural_slice(const NeuralVolume& vol, const Rotation& R, std::size_t n,
                            const std::vector<double>& latent = {}) {
    std::vector<cdouble> vals = eval_neural_volume(vol, slice_points(R, n), latent);
    CTensor out({n, n});
    for (std::size_t i = 0; i < n * n; ++i) out[i] = vals[i];
    return out;
}

/// Pointwise adapter. Each call runs a one-point batch, so heavy users
/// should evaluate point lists or slices directly instead.
inline FourierFn neural_fourier_fn(NeuralVolume vol, std::vector<double> latent = {}) {
    if (latent.size() != vol.latent_width)
        throw std::invalid_argument("neural volume: latent width mismatch");
    return [vol = std::move(vol), latent = std::move(latent)](double kx, double ky, double kz) {
        RTensor pts({1, 3});
        pts[0] = kx;
        pts[1] = ky;
        pts[2] = kz;
        return eval_neural_volume(vol, pts, latent)[0];
    };
}

namespace cryo_detail {

inline void neural_image_pixels(const NeuralVolume& vol, const std::vector<double>& latent,
                                const Rotation& R, double sigma, const SeededRng& noise,
                                std::size_t i, std::size_t n, double* out) {
    RTensor img = image_from_slice(neural_slice(vol, R, n, latent));
    const std::size_t n2 = n * n;
    for (std::size_t p = 0; p < n2; ++p) {
        double noise_term = sigma > 0 ? sigma * noise.gaussian_at(i * n2 + p) : 0.0;
        out[p] = img[p] + noise_term;
    }
}

} // namespace cryo_detail

/// simulate_images for a neural volume: slices are evaluated in per-image
/// batches instead of one network pass per frequency.
inline RTensor simulate_images(const NeuralVolume& vol, const std::vector<Rotation>& rotations,
                               double sigma, const SeededRng& rng, std::size_t n,
                               const std::vector<double>& latent = {}) {
    if (rotations.empty()) throw std::invalid_argument("simulate: no rotations");
    if (sigma < 0) throw std::invalid_argument("simulate: sigma must be nonnegative");
    if (n == 0) throw std::invalid_argument("simulate: empty grid");
    SeededRng noise = rng.substream(1);
    const std::size_t N = rotations.size();
    RTensor batch({N, n, n}, 0.0);
    parallel_blocks(N, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            cryo_detail::neural_image_pixels(vol, latent, rotations[i], sigma, noise, i, n,
                                             batch.data() + i * n * n);
    });
    return batch;
}

/// Fused simulate + moments for a neural volume; counters and reduction
/// order match the two-step path bit for bit.
inline CryoMomentPair simulate_and_moments_2d(const NeuralVolume& vol,
                                              const std::vector<Rotation>& rotations,
                                              double sigma, const SeededRng& rng, std::size_t n,
                                              const std::vector<double>& latent = {}) {
    if (rotations.empty()) throw std::invalid_argument("simulate: no rotations");
    if (sigma < 0) throw std::invalid_argument("simulate: sigma must be nonnegative");
    if (n == 0) throw std::invalid_argument("simulate: empty grid");
    SeededRng noise = rng.substream(1);
    return cryo_detail::moments_over_images(
        rotations.size(), n, sigma, [&](std::size_t i, double* out) {
            cryo_detail::neural_image_pixels(vol, latent, rotations[i], sigma, noise, i, n, out);
        });
}

// ---- serialization --------------------------------------------------------

inline nlohmann::json neural_volume_arch_json(const NeuralVolume& vol) {
    nlohmann::json amp = nlohmann::json::array();
    for (const auto& s : vol.amp_layers) amp.push_back(layer_to_json(s));
    nlohmann::json phase = nlohmann::json::array();
    for (const auto& s : vol.phase_layers) phase.push_back(layer_to_json(s));
    return nlohmann::json{{"type", "neural_volume"}, {"octaves", vol.octaves},
                          {"kmax", vol.kmax},        {"latent_width", vol.latent_width},
                          {"amp", amp},              {"phase", phase}};
}

inline void save_neural_volume(const std::string& path, const NeuralVolume& vol) {
    save_params(path, neural_volume_arch_json(vol), vol.params);
}

inline NeuralVolume load_neural_volume(const std::string& path) {
    LoadedParams lp = load_params(path);
    if (lp.arch.value("type", "") != "neural_volume")
        throw std::runtime_error("parameter file does not hold a neural volume");
    NeuralVolume vol;
    vol.octaves = lp.arch.at("octaves").get<std::size_t>();
    vol.kmax = lp.arch.at("kmax").get<double>();
    vol.latent_width = lp.arch.at("latent_width").get<std::size_t>();
    for (const auto& j : lp.arch.at("amp")) vol.amp_layers.push_back(layer_from_json(j));
    for (const auto& j : lp.arch.at("phase")) vol.phase_layers.push_back(layer_from_json(j));
    // audit tensor shapes against the declared architecture
    std::vector<RTensor> expect;
    std::vector<std::size_t> shape{vol.feature_width()};
    SeededRng rng(0, "shape-check");
    std::uint64_t slot = 0;
    append_chain_params(expect, vol.amp_layers, shape, rng, slot);
    shape = {vol.feature_width()};
    append_chain_params(expect, vol.phase_layers, shape, rng, slot);
    if (expect.size() != lp.params.tensors.size())
        throw std::runtime_error("parameter file shape mismatch: tensor count");
    for (std::size_t k = 0; k < expect.size(); ++k)
        if (expect[k].shape() != lp.params.tensors[k].shape())
            throw std::runtime_error("parameter file shape mismatch: tensor " +
                                     std::to_string(k));
    vol.params = std::move(lp.params);
    return vol;
}

} // namespace omt
