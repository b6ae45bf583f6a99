#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace omt {

using cdouble = std::complex<double>;

namespace detail {

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

} // namespace detail

/// Dense row-major tensor over a scalar type (double or complex<double>).
/// Shape is a list of extents; data length always equals their product.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> shape, T fill = T{})
        : shape_(std::move(shape)), data_(detail::shape_product(shape_), fill) {}

    TensorT(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != detail::shape_product(shape_))
            throw std::invalid_argument("tensor: data length does not match shape " +
                                        detail::shape_str(shape_));
    }

    static TensorT vector(std::vector<T> data) {
        std::vector<std::size_t> shape{data.size()};
        return TensorT(std::move(shape), std::move(data));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& raw() { return data_; }
    const std::vector<T>& raw() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    T& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    TensorT& operator+=(const TensorT& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    TensorT& operator-=(const TensorT& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    TensorT& operator*=(T s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    void require_same_shape(const TensorT& o) const {
        if (!same_shape(o))
            throw std::invalid_argument("tensor: shape mismatch " + detail::shape_str(shape_) +
                                        " vs " + detail::shape_str(o.shape_));
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using RTensor = TensorT<double>;
using CTensor = TensorT<cdouble>;

inline double norm2(const RTensor& t) {
    double s = 0;
    for (double v : t.raw()) s += v * v;
    return std::sqrt(s);
}

inline double norm2(const CTensor& t) {
    double s = 0;
    for (const cdouble& v : t.raw()) s += std::norm(v);
    return std::sqrt(s);
}

inline double norm2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double norm2(const std::vector<cdouble>& v) {
    double s = 0;
    for (const cdouble& x : v) s += std::norm(x);
    return std::sqrt(s);
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
    for (const auto& v : t.raw()) {
        if constexpr (std::is_same_v<T, cdouble>) {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        } else {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

inline CTensor to_complex(const RTensor& r) {
    CTensor c(r.shape());
    for (std::size_t i = 0; i < r.size(); ++i) c[i] = cdouble(r[i], 0.0);
    return c;
}

inline RTensor real_part(const CTensor& c) {
    RTensor r(c.shape());
    for (std::size_t i = 0; i < c.size(); ++i) r[i] = c[i].real();
    return r;
}

} // namespace omt
