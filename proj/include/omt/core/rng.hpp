#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "omt/core/grids.hpp"
#include "omt/core/tensor.hpp"

namespace omt {

/// Counter-based random stream keyed by (seed, label, counter).
///
/// Every value is a pure function of the key and the counter, so draws can be
/// indexed randomly: parallel workers generating disjoint counter ranges
/// produce exactly the sequence a single worker would. Integer and uniform
/// output is platform-independent; gaussians go through libm and are
/// bit-stable per machine.
class SeededRng {
public:
    SeededRng(std::uint64_t seed, std::string stream_label)
        : seed_(seed), label_(std::move(stream_label)),
          key_(mix64(seed ^ fnv1a(label_))) {}

    std::uint64_t seed() const { return seed_; }
    const std::string& stream_label() const { return label_; }

    /// Independent substream (e.g. one per observation index).
    SeededRng substream(std::uint64_t index) const {
        SeededRng r = *this;
        r.key_ = mix64(key_ + 0x9E3779B97F4A7C15ULL * (index + 1));
        return r;
    }

    std::uint64_t u64_at(std::uint64_t counter) const {
        return mix64(key_ + 0x9E3779B97F4A7C15ULL * counter + 0xBF58476D1CE4E5B9ULL);
    }

    /// Uniform in [0, 1).
    double uniform_at(std::uint64_t counter) const {
        return static_cast<double>(u64_at(counter) >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes counters 2c and 2c+1.
    double gaussian_at(std::uint64_t counter) const {
        double u1 = static_cast<double>((u64_at(2 * counter) >> 11) + 1) * 0x1.0p-53; // (0,1]
        double u2 = uniform_at(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

private:
    static std::uint64_t fnv1a(const std::string& s) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        return h;
    }

    // splitmix64 finalizer
    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::string label_;
    std::uint64_t key_;
};

/// Sequential cursor over a SeededRng stream.
class RngCursor {
public:
    explicit RngCursor(SeededRng rng) : rng_(std::move(rng)) {}

    double uniform() { return rng_.uniform_at(ctr_++); }
    std::uint64_t u64() { return rng_.u64_at(ctr_++); }
    double gaussian() { return rng_.gaussian_at(ctr_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    SeededRng rng_;
    std::uint64_t ctr_ = 0;
};

enum class Dist { uniform, gaussian };

/// Reproducible tensor draw; gaussian entries have the stated mean/stddev.
inline RTensor rng_draw(const SeededRng& rng, Dist dist, std::vector<std::size_t> shape,
                        double mean = 0.0, double stddev = 1.0) {
    if (stddev < 0.0) throw std::invalid_argument("rng_draw: negative stddev");
    RTensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (dist == Dist::uniform)
            t[i] = rng.uniform_at(i);
        else
            t[i] = mean + stddev * rng.gaussian_at(i);
    }
    return t;
}

} // namespace omt
