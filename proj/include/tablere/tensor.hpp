#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tablere/errors.hpp"

namespace tablere {

/// Dense n-dimensional array, row-major, with an optional same-shape gradient
/// buffer. This is the currency of every numeric op in the toolkit.
template <typename T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;
    std::optional<std::vector<T>> grad;

    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> s, T fill = T(0))
        : shape(std::move(s)), data(shape_product(shape), fill) {}

    static TensorT from(std::vector<std::size_t> s, std::vector<T> values) {
        if (shape_product(s) != values.size()) {
            throw ShapeError("tensor: value count " + std::to_string(values.size()) +
                             " does not match shape product " + std::to_string(shape_product(s)));
        }
        TensorT t;
        t.shape = std::move(s);
        t.data = std::move(values);
        return t;
    }

    static std::size_t shape_product(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) {
            n *= d;
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    // 2-D accessors
    T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    void ensure_grad() {
        if (!grad) {
            grad.emplace(data.size(), T(0));
        }
    }

    void zero_grad() {
        if (grad) {
            std::fill(grad->begin(), grad->end(), T(0));
        }
    }

    bool all_finite() const {
        for (const T& v : data) {
            if (!std::isfinite(static_cast<double>(v))) {
                return false;
            }
        }
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            os << (i ? "x" : "") << shape[i];
        }
        os << "]";
        return os.str();
    }
};

using Tensor = TensorT<float>;

template <typename T>
inline void require_shape(const TensorT<T>& t, const std::vector<std::size_t>& expect,
                          const char* what) {
    if (t.shape != expect) {
        TensorT<T> e;
        e.shape = expect;
        throw ShapeError(std::string(what) + ": expected shape " + e.shape_str() + ", got " +
                         t.shape_str());
    }
}

} // namespace tablere
