#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsrlab {

/// Error type thrown by every module; carries a formatted message.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major tensor. The float instantiation is the working type;
/// the double one backs the 64-bit gradient-check harness.
template <class T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    TensorT() = default;
    TensorT(std::initializer_list<std::size_t> s, std::vector<T> d)
        : shape(s), data(std::move(d)) {}

    static TensorT zeros(std::vector<std::size_t> s) {
        TensorT t;
        t.shape = std::move(s);
        t.data.assign(product(t.shape), T(0));
        return t;
    }

    static std::size_t product(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(double(v))) return false;
        return true;
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;

template <class U, class T>
TensorT<U> tensor_cast(const TensorT<T>& t) {
    TensorT<U> out;
    out.shape = t.shape;
    out.data.reserve(t.data.size());
    for (T v : t.data) out.data.push_back(U(v));
    return out;
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string r = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) r += "x";
        r += std::to_string(s[i]);
    }
    return r + "]";
}

} // namespace fsrlab
