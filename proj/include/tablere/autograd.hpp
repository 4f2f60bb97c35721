#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "tablere/ops.hpp"

namespace tablere {

/// Reverse-mode tape. Forward ops append value nodes to an arena (stable
/// addresses) and push a pullback closure; backward() replays the closures
/// in reverse. Leaves created with `leaf` carry no gradient buffer and the
/// pullbacks skip them; everything else accumulates into `grad`.
template <typename T>
class TapeT {
public:
    TensorT<T>* adopt(TensorT<T> t) {
        arena_.push_back(std::move(t));
        arena_.back().ensure_grad();
        return &arena_.back();
    }

    TensorT<T>* alloc(std::vector<std::size_t> shape) {
        return adopt(TensorT<T>(std::move(shape)));
    }

    /// Constant input: participates in forward but receives no gradient.
    TensorT<T>* leaf(TensorT<T> t) {
        t.grad.reset();
        arena_.push_back(std::move(t));
        return &arena_.back();
    }

    /// Registers an externally owned tensor (a parameter, or an input whose
    /// gradient the caller wants) as a graph node; gradients accumulate in
    /// place. The tensor must outlive the tape's pullbacks.
    TensorT<T>* external(TensorT<T>* t) {
        t->ensure_grad();
        return t;
    }

    void record(std::function<void()> pullback) { pullbacks_.push_back(std::move(pullback)); }

    /// Seeds d(loss)/d(loss) = 1 and runs all pullbacks in reverse. One-shot:
    /// the recorded pullbacks are consumed.
    void backward(TensorT<T>* loss) {
        if (pullbacks_.empty()) {
            throw UsageError("backward called before any forward op was recorded");
        }
        if (loss->size() != 1 || !loss->grad) {
            throw UsageError("backward target must be a scalar tape node");
        }
        (*loss->grad)[0] = T(1);
        for (auto it = pullbacks_.rbegin(); it != pullbacks_.rend(); ++it) {
            (*it)();
        }
        pullbacks_.clear();
    }

    void reset() {
        pullbacks_.clear();
        arena_.clear();
    }

    std::size_t node_count() const { return arena_.size(); }

private:
    std::deque<TensorT<T>> arena_;
    std::vector<std::function<void()>> pullbacks_;
};

using Tape = TapeT<float>;

// --------------------------------------------------------------------------
// Taped ops. Each computes the pure forward kernel, stores the result in the
// arena, and records the matching vector-Jacobian product.
// --------------------------------------------------------------------------

template <typename T>
inline TensorT<T>* conv1d_same(TapeT<T>& tape, TensorT<T>* x, ConvParamsT<T>& p) {
    TensorT<T>* y = tape.adopt(conv1d_same(*x, p));
    tape.record([x, &p, y] {
        std::vector<T>* dx = x->grad ? &*x->grad : nullptr;
        std::vector<T>* dw = p.filters.grad ? &*p.filters.grad : nullptr;
        std::vector<T>* db = p.bias.grad ? &*p.bias.grad : nullptr;
        conv1d_same_backward(*x, p, TensorT<T>::from(y->shape, *y->grad), dx, dw, db);
    });
    return y;
}

template <typename T>
inline TensorT<T>* relu(TapeT<T>& tape, TensorT<T>* x) {
    TensorT<T>* y = tape.adopt(relu(*x));
    tape.record([x, y] {
        if (!x->grad) {
            return;
        }
        for (std::size_t i = 0; i < x->size(); ++i) {
            if (x->data[i] > T(0)) {
                (*x->grad)[i] += (*y->grad)[i];
            }
        }
    });
    return y;
}

template <typename T>
inline TensorT<T>* maxpool1d(TapeT<T>& tape, TensorT<T>* x) {
    std::vector<std::size_t> argmax;
    TensorT<T>* y = tape.adopt(maxpool1d(*x, &argmax));
    tape.record([x, y, argmax = std::move(argmax)] {
        if (!x->grad) {
            return;
        }
        for (std::size_t i = 0; i < argmax.size(); ++i) {
            (*x->grad)[argmax[i]] += (*y->grad)[i];
        }
    });
    return y;
}

template <typename T>
inline TensorT<T>* lstm_layer(TapeT<T>& tape, TensorT<T>* x, LstmParamsT<T>& p, Direction dir) {
    auto cache = std::make_shared<detail::LstmCache<T>>();
    TensorT<T>* y = tape.adopt(lstm_layer(*x, p, dir, cache.get()));
    tape.record([x, &p, dir, y, cache] {
        std::vector<T>* dx = x->grad ? &*x->grad : nullptr;
        std::array<std::vector<T>*, 4> dw_in{};
        std::array<std::vector<T>*, 4> dw_rec{};
        std::array<std::vector<T>*, 4> dbias{};
        for (std::size_t g = 0; g < 4; ++g) {
            dw_in[g] = p.w_in[g].grad ? &*p.w_in[g].grad : nullptr;
            dw_rec[g] = p.w_rec[g].grad ? &*p.w_rec[g].grad : nullptr;
            dbias[g] = p.bias[g].grad ? &*p.bias[g].grad : nullptr;
        }
        lstm_layer_backward(*x, p, dir, *cache, TensorT<T>::from(y->shape, *y->grad), dx, dw_in,
                            dw_rec, dbias);
    });
    return y;
}

template <typename T>
inline TensorT<T>* bilstm(TapeT<T>& tape, TensorT<T>* x, LstmParamsT<T>& fwd,
                          LstmParamsT<T>& bwd) {
    if (fwd.units() != bwd.units()) {
        throw ShapeError("bilstm: unit count mismatch between directions");
    }
    TensorT<T>* hf = lstm_layer(tape, x, fwd, Direction::forward);
    TensorT<T>* hb = lstm_layer(tape, x, bwd, Direction::backward);
    const std::size_t len = hf->shape[0];
    const std::size_t u = fwd.units();
    TensorT<T>* y = tape.alloc({len, 2 * u});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t n = 0; n < u; ++n) {
            y->at(t, n) = hf->at(t, n);
            y->at(t, u + n) = hb->at(t, n);
        }
    }
    tape.record([hf, hb, y, len, u] {
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t n = 0; n < u; ++n) {
                (*hf->grad)[t * u + n] += (*y->grad)[t * 2 * u + n];
                (*hb->grad)[t * u + n] += (*y->grad)[t * 2 * u + u + n];
            }
        }
    });
    return y;
}

template <typename T>
inline TensorT<T>* dropout(TapeT<T>& tape, TensorT<T>* x, double rate, RunMode mode, Rng& rng) {
    std::vector<T> mask;
    TensorT<T>* y = tape.adopt(dropout(*x, rate, mode, rng, &mask));
    tape.record([x, y, mask = std::move(mask)] {
        if (!x->grad) {
            return;
        }
        for (std::size_t i = 0; i < mask.size(); ++i) {
            (*x->grad)[i] += mask[i] * (*y->grad)[i];
        }
    });
    return y;
}

template <typename T>
inline TensorT<T>* dense(TapeT<T>& tape, TensorT<T>* x, TensorT<T>& w, TensorT<T>& b) {
    TensorT<T>* y = tape.adopt(dense(*x, w, b));
    tape.record([x, &w, &b, y] {
        std::vector<T>* dx = x->grad ? &*x->grad : nullptr;
        std::vector<T>* dw = w.grad ? &*w.grad : nullptr;
        std::vector<T>* db = b.grad ? &*b.grad : nullptr;
        dense_backward(*x, w, TensorT<T>::from(y->shape, *y->grad), dx, dw, db);
    });
    return y;
}

/// Row-major reshape to a flat vector.
template <typename T>
inline TensorT<T>* flatten(TapeT<T>& tape, TensorT<T>* x) {
    TensorT<T>* y = tape.adopt(TensorT<T>::from({x->size()}, x->data));
    tape.record([x, y] {
        if (!x->grad) {
            return;
        }
        for (std::size_t i = 0; i < x->size(); ++i) {
            (*x->grad)[i] += (*y->grad)[i];
        }
    });
    return y;
}

template <typename T>
inline TensorT<T>* sum(TapeT<T>& tape, TensorT<T>* x) {
    T total = T(0);
    for (const T& v : x->data) {
        total += v;
    }
    TensorT<T>* y = tape.adopt(TensorT<T>::from({1}, {total}));
    tape.record([x, y] {
        if (!x->grad) {
            return;
        }
        const T g = (*y->grad)[0];
        for (std::size_t i = 0; i < x->size(); ++i) {
            (*x->grad)[i] += g;
        }
    });
    return y;
}

/// Smooth scalarizer used by the gradient checker.
template <typename T>
inline TensorT<T>* sum_squares(TapeT<T>& tape, TensorT<T>* x) {
    T total = T(0);
    for (const T& v : x->data) {
        total += v * v;
    }
    TensorT<T>* y = tape.adopt(TensorT<T>::from({1}, {total}));
    tape.record([x, y] {
        if (!x->grad) {
            return;
        }
        const T g = (*y->grad)[0];
        for (std::size_t i = 0; i < x->size(); ++i) {
            (*x->grad)[i] += T(2) * x->data[i] * g;
        }
    });
    return y;
}

/// Fused softmax + sparse categorical cross-entropy over a batch of logit
/// nodes. Returns the scalar mean loss.
template <typename T>
inline TensorT<T>* sparse_ce_loss(TapeT<T>& tape, const std::vector<TensorT<T>*>& logits,
                                  const std::vector<int>& labels) {
    if (logits.empty() || logits.size() != labels.size()) {
        throw ShapeError("sparse_ce_loss: need one label per logits row");
    }
    const std::size_t batch = logits.size();
    const std::size_t classes = logits[0]->size();
    TensorT<T> stacked({batch, classes});
    for (std::size_t b = 0; b < batch; ++b) {
        if (logits[b]->size() != classes) {
            throw ShapeError("sparse_ce_loss: inconsistent class counts in batch");
        }
        std::copy(logits[b]->data.begin(), logits[b]->data.end(),
                  stacked.data.begin() + static_cast<std::ptrdiff_t>(b * classes));
    }
    const T loss = sparse_ce_loss(stacked, labels);
    TensorT<T>* y = tape.adopt(TensorT<T>::from({1}, {loss}));
    tape.record([logits, labels, y, batch, classes] {
        const T g = (*y->grad)[0] / static_cast<T>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            if (!logits[b]->grad) {
                continue;
            }
            const TensorT<T> p = softmax(*logits[b]);
            for (std::size_t j = 0; j < classes; ++j) {
                const T target = static_cast<std::size_t>(labels[b]) == j ? T(1) : T(0);
                (*logits[b]->grad)[j] += g * (p[j] - target);
            }
        }
    });
    return y;
}

} // namespace tablere
