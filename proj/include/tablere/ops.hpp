#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tablere/errors.hpp"
#include "tablere/rng.hpp"
#include "tablere/tensor.hpp"

namespace tablere {

enum class Direction { forward, backward };
enum class RunMode { train, eval };

/// 1-D convolution bank: `filters` is F x k x d (filter count, context
/// window, input feature dim), `bias` is F.
template <typename T>
struct ConvParamsT {
    TensorT<T> filters;
    TensorT<T> bias;

    std::size_t filter_count() const { return filters.shape.empty() ? 0 : filters.shape[0]; }
    std::size_t window() const { return filters.shape.size() < 2 ? 0 : filters.shape[1]; }
    std::size_t input_dim() const { return filters.shape.size() < 3 ? 0 : filters.shape[2]; }

    static std::size_t count(std::size_t f, std::size_t k, std::size_t d) {
        return f * k * d + f;
    }
};

/// LSTM cell parameters. Gate order throughout: input, forget, candidate,
/// output. `w_in[g]` is u x i, `w_rec[g]` is u x u, `bias[g]` is u.
template <typename T>
struct LstmParamsT {
    std::array<TensorT<T>, 4> w_in;
    std::array<TensorT<T>, 4> w_rec;
    std::array<TensorT<T>, 4> bias;

    std::size_t units() const { return bias[0].size(); }
    std::size_t input_dim() const {
        return w_in[0].shape.size() < 2 ? 0 : w_in[0].shape[1];
    }

    static std::size_t count(std::size_t u, std::size_t i) {
        return 4 * (u * (i + u) + u);
    }
};

namespace gate {
inline constexpr std::size_t input = 0;
inline constexpr std::size_t forget = 1;
inline constexpr std::size_t candidate = 2;
inline constexpr std::size_t output = 3;
inline constexpr const char* names[4] = {"i", "f", "g", "o"};
} // namespace gate

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// ---------------------------------------------------------------------------
// conv1d, "same" zero padding. Output length equals input length; for even k
// the extra pad row falls on the right.
// ---------------------------------------------------------------------------

template <typename T>
inline TensorT<T> conv1d_same(const TensorT<T>& x, const ConvParamsT<T>& p) {
    if (x.rank() != 2) {
        throw ShapeError("conv1d_same: input must be 2-D, got " + x.shape_str());
    }
    const std::size_t len = x.shape[0];
    const std::size_t d = x.shape[1];
    const std::size_t f_count = p.filter_count();
    const std::size_t k = p.window();
    if (p.input_dim() != d) {
        throw ShapeError("conv1d_same: input feature dim " + std::to_string(d) +
                         " != filter dim " + std::to_string(p.input_dim()));
    }
    if (p.bias.size() != f_count) {
        throw ShapeError("conv1d_same: bias size != filter count");
    }
    const std::size_t left = (k - 1) / 2;

    TensorT<T> y({len, f_count});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t f = 0; f < f_count; ++f) {
            T acc = p.bias[f];
            for (std::size_t j = 0; j < k; ++j) {
                const std::ptrdiff_t s =
                    static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(left);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) {
                    continue; // zero pad row
                }
                const T* xr = &x.data[static_cast<std::size_t>(s) * d];
                const T* wr = &p.filters.data[(f * k + j) * d];
                for (std::size_t c = 0; c < d; ++c) {
                    acc += wr[c] * xr[c];
                }
            }
            y.at(t, f) = acc;
        }
    }
    return y;
}

template <typename T>
inline void conv1d_same_backward(const TensorT<T>& x, const ConvParamsT<T>& p,
                                 const TensorT<T>& dy, std::vector<T>* dx,
                                 std::vector<T>* dfilters, std::vector<T>* dbias) {
    const std::size_t len = x.shape[0];
    const std::size_t d = x.shape[1];
    const std::size_t f_count = p.filter_count();
    const std::size_t k = p.window();
    const std::size_t left = (k - 1) / 2;

    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t f = 0; f < f_count; ++f) {
            const T g = dy.at(t, f);
            if (dbias) {
                (*dbias)[f] += g;
            }
            for (std::size_t j = 0; j < k; ++j) {
                const std::ptrdiff_t s =
                    static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(left);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) {
                    continue;
                }
                const std::size_t row = static_cast<std::size_t>(s);
                const T* xr = &x.data[row * d];
                const T* wr = &p.filters.data[(f * k + j) * d];
                if (dfilters) {
                    T* dw = &(*dfilters)[(f * k + j) * d];
                    for (std::size_t c = 0; c < d; ++c) {
                        dw[c] += g * xr[c];
                    }
                }
                if (dx) {
                    T* dxr = &(*dx)[row * d];
                    for (std::size_t c = 0; c < d; ++c) {
                        dxr[c] += g * wr[c];
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

template <typename T>
inline TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y = x;
    y.grad.reset();
    for (T& v : y.data) {
        v = std::max(T(0), v);
    }
    return y;
}

// ---------------------------------------------------------------------------
// maxpool1d, window 2 / stride 2. Requires even input length.
// ---------------------------------------------------------------------------

template <typename T>
inline TensorT<T> maxpool1d(const TensorT<T>& x, std::vector<std::size_t>* argmax = nullptr) {
    if (x.rank() != 2) {
        throw ShapeError("maxpool1d: input must be 2-D, got " + x.shape_str());
    }
    const std::size_t len = x.shape[0];
    const std::size_t f = x.shape[1];
    if (len % 2 != 0) {
        throw ShapeError("maxpool1d: input length " + std::to_string(len) + " is odd");
    }
    TensorT<T> y({len / 2, f});
    if (argmax) {
        argmax->assign(y.size(), 0);
    }
    for (std::size_t t = 0; t < len / 2; ++t) {
        for (std::size_t c = 0; c < f; ++c) {
            const T a = x.at(2 * t, c);
            const T b = x.at(2 * t + 1, c);
            // first element wins ties, so gradient routing is deterministic
            const bool second = b > a;
            y.at(t, c) = second ? b : a;
            if (argmax) {
                (*argmax)[t * f + c] = (2 * t + (second ? 1 : 0)) * f + c;
            }
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// LSTM. Standard cell: sigmoid input/forget/output gates, tanh candidate and
// cell-output squashing, zero initial hidden and cell state, no peepholes.
// ---------------------------------------------------------------------------

namespace detail {

/// Per-step activations in processing order, each row-major steps x units.
template <typename T>
struct LstmCache {
    std::size_t steps = 0;
    std::size_t units = 0;
    std::vector<T> i, f, g, o, c, tanh_c, h;

    void init(std::size_t t, std::size_t u) {
        steps = t;
        units = u;
        const std::size_t n = t * u;
        i.assign(n, T(0));
        f.assign(n, T(0));
        g.assign(n, T(0));
        o.assign(n, T(0));
        c.assign(n, T(0));
        tanh_c.assign(n, T(0));
        h.assign(n, T(0));
    }
};

inline std::size_t lstm_phys_row(std::size_t step, std::size_t len, Direction dir) {
    return dir == Direction::forward ? step : len - 1 - step;
}

} // namespace detail

/// Runs the recurrence over the whole sequence and returns hidden states
/// aligned to input time order (the backward direction is re-aligned).
template <typename T>
inline TensorT<T> lstm_layer(const TensorT<T>& x, const LstmParamsT<T>& p, Direction dir,
                             detail::LstmCache<T>* cache = nullptr) {
    if (x.rank() != 2) {
        throw ShapeError("lstm_layer: input must be 2-D, got " + x.shape_str());
    }
    const std::size_t len = x.shape[0];
    const std::size_t in_dim = x.shape[1];
    const std::size_t u = p.units();
    if (p.input_dim() != in_dim) {
        throw ShapeError("lstm_layer: input dim " + std::to_string(in_dim) +
                         " != parameter input dim " + std::to_string(p.input_dim()));
    }
    for (std::size_t g = 0; g < 4; ++g) {
        if (p.w_in[g].shape != std::vector<std::size_t>{u, in_dim} ||
            p.w_rec[g].shape != std::vector<std::size_t>{u, u} || p.bias[g].size() != u) {
            throw ShapeError(std::string("lstm_layer: inconsistent parameter shapes for gate ") +
                             gate::names[g]);
        }
    }

    detail::LstmCache<T> local;
    detail::LstmCache<T>& cc = cache ? *cache : local;
    cc.init(len, u);

    TensorT<T> out({len, u});
    std::vector<T> h_prev(u, T(0));
    std::vector<T> c_prev(u, T(0));
    std::vector<T> acts(4 * u, T(0));

    for (std::size_t step = 0; step < len; ++step) {
        const std::size_t row = detail::lstm_phys_row(step, len, dir);
        const T* xr = &x.data[row * in_dim];

        for (std::size_t g = 0; g < 4; ++g) {
            const TensorT<T>& wi = p.w_in[g];
            const TensorT<T>& wr = p.w_rec[g];
            for (std::size_t n = 0; n < u; ++n) {
                T acc = p.bias[g][n];
                const T* wir = &wi.data[n * in_dim];
                for (std::size_t c = 0; c < in_dim; ++c) {
                    acc += wir[c] * xr[c];
                }
                const T* wrr = &wr.data[n * u];
                for (std::size_t c = 0; c < u; ++c) {
                    acc += wrr[c] * h_prev[c];
                }
                acts[g * u + n] = acc;
            }
        }

        const std::size_t base = step * u;
        for (std::size_t n = 0; n < u; ++n) {
            const T iv = sigmoid(acts[gate::input * u + n]);
            const T fv = sigmoid(acts[gate::forget * u + n]);
            const T gv = std::tanh(acts[gate::candidate * u + n]);
            const T ov = sigmoid(acts[gate::output * u + n]);
            const T cv = fv * c_prev[n] + iv * gv;
            const T tc = std::tanh(cv);
            const T hv = ov * tc;
            cc.i[base + n] = iv;
            cc.f[base + n] = fv;
            cc.g[base + n] = gv;
            cc.o[base + n] = ov;
            cc.c[base + n] = cv;
            cc.tanh_c[base + n] = tc;
            cc.h[base + n] = hv;
            out.at(row, n) = hv;
            h_prev[n] = hv;
            c_prev[n] = cv;
        }
    }
    return out;
}

/// Backpropagation through time. `dy` is aligned to input time order, like
/// the forward output. Parameter gradient buffers may be null to skip.
template <typename T>
inline void lstm_layer_backward(const TensorT<T>& x, const LstmParamsT<T>& p, Direction dir,
                                const detail::LstmCache<T>& cc, const TensorT<T>& dy,
                                std::vector<T>* dx, std::array<std::vector<T>*, 4> dw_in,
                                std::array<std::vector<T>*, 4> dw_rec,
                                std::array<std::vector<T>*, 4> dbias) {
    const std::size_t len = x.shape[0];
    const std::size_t in_dim = x.shape[1];
    const std::size_t u = cc.units;

    std::vector<T> dh_carry(u, T(0));
    std::vector<T> dc_carry(u, T(0));
    std::vector<T> da(4 * u, T(0));

    for (std::size_t step = len; step-- > 0;) {
        const std::size_t row = detail::lstm_phys_row(step, len, dir);
        const std::size_t base = step * u;
        const T* xr = &x.data[row * in_dim];

        for (std::size_t n = 0; n < u; ++n) {
            const T iv = cc.i[base + n];
            const T fv = cc.f[base + n];
            const T gv = cc.g[base + n];
            const T ov = cc.o[base + n];
            const T tc = cc.tanh_c[base + n];
            const T c_prev = step > 0 ? cc.c[base - u + n] : T(0);

            const T dh = dy.at(row, n) + dh_carry[n];
            const T dov = dh * tc;
            const T dcv = dh * ov * (T(1) - tc * tc) + dc_carry[n];
            const T div = dcv * gv;
            const T dgv = dcv * iv;
            const T dfv = dcv * c_prev;
            dc_carry[n] = dcv * fv;

            da[gate::input * u + n] = div * iv * (T(1) - iv);
            da[gate::forget * u + n] = dfv * fv * (T(1) - fv);
            da[gate::candidate * u + n] = dgv * (T(1) - gv * gv);
            da[gate::output * u + n] = dov * ov * (T(1) - ov);
        }

        const T* h_prev = step > 0 ? &cc.h[base - u] : nullptr;
        std::fill(dh_carry.begin(), dh_carry.end(), T(0));

        for (std::size_t g = 0; g < 4; ++g) {
            const T* dag = &da[g * u];
            if (dbias[g]) {
                for (std::size_t n = 0; n < u; ++n) {
                    (*dbias[g])[n] += dag[n];
                }
            }
            if (dw_in[g]) {
                for (std::size_t n = 0; n < u; ++n) {
                    T* dwr = &(*dw_in[g])[n * in_dim];
                    for (std::size_t c = 0; c < in_dim; ++c) {
                        dwr[c] += dag[n] * xr[c];
                    }
                }
            }
            if (dw_rec[g] && h_prev) {
                for (std::size_t n = 0; n < u; ++n) {
                    T* dwr = &(*dw_rec[g])[n * u];
                    for (std::size_t c = 0; c < u; ++c) {
                        dwr[c] += dag[n] * h_prev[c];
                    }
                }
            }
            if (dx) {
                T* dxr = &(*dx)[row * in_dim];
                const TensorT<T>& wi = p.w_in[g];
                for (std::size_t n = 0; n < u; ++n) {
                    const T* wir = &wi.data[n * in_dim];
                    for (std::size_t c = 0; c < in_dim; ++c) {
                        dxr[c] += dag[n] * wir[c];
                    }
                }
            }
            const TensorT<T>& wr = p.w_rec[g];
            for (std::size_t n = 0; n < u; ++n) {
                const T* wrr = &wr.data[n * u];
                for (std::size_t c = 0; c < u; ++c) {
                    dh_carry[c] += dag[n] * wrr[c];
                }
            }
        }
    }
}

/// Per-timestep concatenation [h_forward ; h_backward].
template <typename T>
inline TensorT<T> bilstm(const TensorT<T>& x, const LstmParamsT<T>& fwd,
                         const LstmParamsT<T>& bwd, detail::LstmCache<T>* cache_fwd = nullptr,
                         detail::LstmCache<T>* cache_bwd = nullptr) {
    if (fwd.units() != bwd.units()) {
        throw ShapeError("bilstm: unit count mismatch between directions");
    }
    const TensorT<T> hf = lstm_layer(x, fwd, Direction::forward, cache_fwd);
    const TensorT<T> hb = lstm_layer(x, bwd, Direction::backward, cache_bwd);
    const std::size_t len = x.shape[0];
    const std::size_t u = fwd.units();
    TensorT<T> out({len, 2 * u});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t n = 0; n < u; ++n) {
            out.at(t, n) = hf.at(t, n);
            out.at(t, u + n) = hb.at(t, n);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// dropout (inverted: survivors scaled by 1/(1-rate) so eval is the identity)
// ---------------------------------------------------------------------------

template <typename T>
inline TensorT<T> dropout(const TensorT<T>& x, double rate, RunMode mode, Rng& rng,
                          std::vector<T>* mask = nullptr) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    TensorT<T> y = x;
    y.grad.reset();
    if (mode == RunMode::eval || rate == 0.0) {
        if (mask) {
            mask->assign(x.size(), T(1));
        }
        return y;
    }
    const T scale = T(1.0 / (1.0 - rate));
    if (mask) {
        mask->assign(x.size(), T(0));
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool keep = rng.uniform() >= rate;
        const T m = keep ? scale : T(0);
        y.data[i] *= m;
        if (mask) {
            (*mask)[i] = m;
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// dense: y[j] = sum_i x[i] * w[i][j] + b[j]
// ---------------------------------------------------------------------------

template <typename T>
inline TensorT<T> dense(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    const std::size_t n = x.size();
    if (w.rank() != 2 || w.shape[0] != n) {
        throw ShapeError("dense: weights " + w.shape_str() + " do not accept input of size " +
                         std::to_string(n));
    }
    const std::size_t c = w.shape[1];
    if (b.size() != c) {
        throw ShapeError("dense: bias size != output dim");
    }
    TensorT<T> y({c});
    for (std::size_t j = 0; j < c; ++j) {
        y[j] = b[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const T xv = x[i];
        const T* wr = &w.data[i * c];
        for (std::size_t j = 0; j < c; ++j) {
            y[j] += xv * wr[j];
        }
    }
    return y;
}

template <typename T>
inline void dense_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                           std::vector<T>* dx, std::vector<T>* dw, std::vector<T>* db) {
    const std::size_t n = x.size();
    const std::size_t c = w.shape[1];
    if (db) {
        for (std::size_t j = 0; j < c; ++j) {
            (*db)[j] += dy[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const T xv = x[i];
        const T* wr = &w.data[i * c];
        T acc = T(0);
        for (std::size_t j = 0; j < c; ++j) {
            if (dw) {
                (*dw)[i * c + j] += xv * dy[j];
            }
            acc += wr[j] * dy[j];
        }
        if (dx) {
            (*dx)[i] += acc;
        }
    }
}

// ---------------------------------------------------------------------------
// softmax and sparse categorical cross-entropy
// ---------------------------------------------------------------------------

/// Numerically stable softmax (max subtraction) over a vector.
template <typename T>
inline TensorT<T> softmax(const TensorT<T>& logits) {
    TensorT<T> p = logits;
    p.grad.reset();
    const T m = *std::max_element(p.data.begin(), p.data.end());
    T sum = T(0);
    for (T& v : p.data) {
        v = std::exp(v - m);
        sum += v;
    }
    for (T& v : p.data) {
        v /= sum;
    }
    return p;
}

/// Mean over the batch of -log softmax(logits_b)[label_b]. `logits` is B x c.
template <typename T>
inline T sparse_ce_loss(const TensorT<T>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("sparse_ce_loss: logits must be B x c, got " + logits.shape_str());
    }
    const std::size_t batch = logits.shape[0];
    const std::size_t classes = logits.shape[1];
    if (labels.size() != batch) {
        throw ShapeError("sparse_ce_loss: label count != batch size");
    }
    T total = T(0);
    for (std::size_t b = 0; b < batch; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw DataError("sparse_ce_loss: label " + std::to_string(label) +
                            " out of range [0, " + std::to_string(classes) + ") for sample " +
                            std::to_string(b));
        }
        const T* row = &logits.data[b * classes];
        const T m = *std::max_element(row, row + classes);
        T se = T(0);
        for (std::size_t j = 0; j < classes; ++j) {
            se += std::exp(row[j] - m);
        }
        total += m + std::log(se) - row[static_cast<std::size_t>(label)];
    }
    return total / static_cast<T>(batch);
}

} // namespace tablere
