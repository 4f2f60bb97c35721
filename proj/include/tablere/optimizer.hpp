#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tablere/errors.hpp"
#include "tablere/tensor.hpp"

namespace tablere {

enum class OptimizerKind { adam, rmsprop };

inline const char* to_string(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adam" : "rmsprop";
}

inline OptimizerKind optimizer_kind_from(const std::string& s) {
    if (s == "adam") {
        return OptimizerKind::adam;
    }
    if (s == "rmsprop") {
        return OptimizerKind::rmsprop;
    }
    throw ConfigError("unknown optimizer '" + s + "' (expected adam or rmsprop)");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 2e-5;
    double beta1 = 0.9;   // adam first-moment decay
    double beta2 = 0.999; // adam second-moment decay
    double rho = 0.9;     // rmsprop accumulator decay
    double epsilon = 1e-7;
};

/// Owns per-parameter moment buffers; parameters live elsewhere and must have
/// gradient buffers engaged before step().
template <typename T>
class OptimizerT {
public:
    OptimizerT(OptimizerConfig cfg, std::vector<TensorT<T>*> params)
        : cfg_(cfg), params_(std::move(params)) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const TensorT<T>* p : params_) {
            m_.emplace_back(p->size(), T(0));
            v_.emplace_back(p->size(), T(0));
        }
    }

    std::uint64_t step_count() const { return step_; }
    const OptimizerConfig& config() const { return cfg_; }

    /// One update from the gradients currently stored in the parameters.
    void step() {
        ++step_;
        for (std::size_t idx = 0; idx < params_.size(); ++idx) {
            TensorT<T>& p = *params_[idx];
            if (!p.grad || p.grad->size() != p.size() || m_[idx].size() != p.size()) {
                throw ShapeError("optimizer: parameter " + std::to_string(idx) +
                                 " gradient/state shape mismatch");
            }
            const std::vector<T>& g = *p.grad;
            if (cfg_.kind == OptimizerKind::adam) {
                const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
                const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const double gi = static_cast<double>(g[i]);
                    const double m = cfg_.beta1 * static_cast<double>(m_[idx][i]) +
                                     (1.0 - cfg_.beta1) * gi;
                    const double v = cfg_.beta2 * static_cast<double>(v_[idx][i]) +
                                     (1.0 - cfg_.beta2) * gi * gi;
                    m_[idx][i] = static_cast<T>(m);
                    v_[idx][i] = static_cast<T>(v);
                    const double update =
                        cfg_.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg_.epsilon);
                    p.data[i] -= static_cast<T>(update);
                }
            } else {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const double gi = static_cast<double>(g[i]);
                    const double v =
                        cfg_.rho * static_cast<double>(v_[idx][i]) + (1.0 - cfg_.rho) * gi * gi;
                    v_[idx][i] = static_cast<T>(v);
                    const double update =
                        cfg_.learning_rate * gi / (std::sqrt(v) + cfg_.epsilon);
                    p.data[i] -= static_cast<T>(update);
                }
            }
        }
    }

private:
    OptimizerConfig cfg_;
    std::vector<TensorT<T>*> params_;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
    std::uint64_t step_ = 0;
};

using Optimizer = OptimizerT<float>;

} // namespace tablere
