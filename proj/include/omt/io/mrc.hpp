#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "omt/core/fft.hpp"
#include "omt/core/grids.hpp"
#include "omt/core/tensor.hpp"

namespace omt {

// MRC2014 density maps, mode 2 (float32). Cubic maps only; the volume is
// returned with shape {n, n, n} indexed [z][y][x] (x fastest, as stored).

struct MrcVolume {
    RTensor data{{1, 1, 1}, 0.0};
    double voxel_size = 1.0; // Angstrom per voxel
};

namespace mrc_detail {

inline std::int32_t geti(const char* h, int word) {
    std::int32_t v;
    std::memcpy(&v, h + 4 * word, 4);
    return v;
}

inline float getf(const char* h, int word) {
    float v;
    std::memcpy(&v, h + 4 * word, 4);
    return v;
}

inline void puti(char* h, int word, std::int32_t v) { std::memcpy(h + 4 * word, &v, 4); }
inline void putf(char* h, int word, float v) { std::memcpy(h + 4 * word, &v, 4); }

} // namespace mrc_detail

inline MrcVolume read_mrc(const std::string& path) {
    using namespace mrc_detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char h[1024];
    f.read(h, 1024);
    if (!f) throw std::runtime_error("truncated MRC header: " + path);

    std::int32_t nx = geti(h, 0), ny = geti(h, 1), nz = geti(h, 2);
    std::int32_t mode = geti(h, 3);
    std::int32_t mx = geti(h, 7);
    float cella_x = getf(h, 10);
    std::int32_t nsymbt = geti(h, 23);
    if (mode != 2) throw std::runtime_error("unsupported MRC mode (want 2 float32): " + path);
    if (nx <= 0 || nx != ny || ny != nz)
        throw std::runtime_error("only cubic MRC maps supported: " + path);
    if (nsymbt < 0) throw std::runtime_error("bad MRC extended header size: " + path);
    f.seekg(1024 + nsymbt, std::ios::beg);

    const std::size_t n = std::size_t(nx);
    std::vector<float> raw(n * n * n);
    f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size() * 4));
    if (!f) throw std::runtime_error("truncated MRC payload: " + path);

    MrcVolume v;
    v.data = RTensor({n, n, n}, 0.0);
    for (std::size_t i = 0; i < raw.size(); ++i) v.data[i] = double(raw[i]);
    double denom = mx > 0 ? double(mx) : double(nx);
    v.voxel_size = cella_x > 0 ? double(cella_x) / denom : 1.0;
    return v;
}

inline void write_mrc(const std::string& path, const RTensor& vol, double voxel_size) {
    using namespace mrc_detail;
    if (vol.rank() != 3 || vol.extent(0) != vol.extent(1) || vol.extent(1) != vol.extent(2))
        throw std::invalid_argument("write_mrc: cubic volume required");
    const std::size_t n = vol.extent(0);

    char h[1024];
    std::memset(h, 0, sizeof h);
    puti(h, 0, std::int32_t(n));
    puti(h, 1, std::int32_t(n));
    puti(h, 2, std::int32_t(n));
    puti(h, 3, 2); // mode 2 float32
    puti(h, 7, std::int32_t(n));
    puti(h, 8, std::int32_t(n));
    puti(h, 9, std::int32_t(n));
    putf(h, 10, float(voxel_size * double(n)));
    putf(h, 11, float(voxel_size * double(n)));
    putf(h, 12, float(voxel_size * double(n)));
    putf(h, 13, 90.f);
    putf(h, 14, 90.f);
    putf(h, 15, 90.f);
    puti(h, 16, 1); // axis order x, y, z
    puti(h, 17, 2);
    puti(h, 18, 3);
    double mn = vol[0], mx = vol[0], mean = 0;
    for (std::size_t i = 0; i < vol.size(); ++i) {
        mn = std::min(mn, vol[i]);
        mx = std::max(mx, vol[i]);
        mean += vol[i];
    }
    mean /= double(vol.size());
    putf(h, 19, float(mn));
    putf(h, 20, float(mx));
    putf(h, 21, float(mean));
    puti(h, 22, 1);           // space group P1
    std::memcpy(h + 208, "MAP ", 4);
    h[212] = 0x44;            // little-endian machine stamp
    h[213] = 0x44;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(h, 1024);
    std::vector<float> raw(vol.size());
    for (std::size_t i = 0; i < vol.size(); ++i) raw[i] = float(vol[i]);
    f.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size() * 4));
    if (!f) throw std::runtime_error("short write: " + path);
}

/// Downsample a cubic volume to m^3 by cropping high frequencies. Amplitudes
/// are rescaled so density values are preserved rather than totals.
inline RTensor fourier_crop(const RTensor& vol, std::size_t m) {
    if (vol.rank() != 3 || vol.extent(0) != vol.extent(1) || vol.extent(1) != vol.extent(2))
        throw std::invalid_argument("fourier_crop: cubic volume required");
    const std::size_t n = vol.extent(0);
    if (m > n) throw std::invalid_argument("fourier_crop: target exceeds source");
    if (m == n) return vol;

    CTensor f = fft(to_complex(vol), {0, 1, 2});
    CTensor g({m, m, m});
    for (std::size_t a = 0; a < m; ++a) {
        std::size_t sa = storage_index(signed_freq_index(a, m), n);
        for (std::size_t b = 0; b < m; ++b) {
            std::size_t sb = storage_index(signed_freq_index(b, m), n);
            for (std::size_t c = 0; c < m; ++c) {
                std::size_t sc = storage_index(signed_freq_index(c, m), n);
                g.at3(a, b, c) = f.at3(sa, sb, sc);
            }
        }
    }
    CTensor back = ifft(g, {0, 1, 2});
    RTensor out({m, m, m}, 0.0);
    const double scale = std::pow(double(m) / double(n), 1.5);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = back[i].real() * scale;
    return out;
}

} // namespace omt
