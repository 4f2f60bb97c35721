#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tablere/autograd.hpp"

namespace tablere {

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t elements = 0;
    bool pass = false;
};

/// Central finite-difference check of tape gradients, in double precision.
///
/// `build` constructs the forward graph on a fresh tape from the current
/// contents of `params` and returns the scalar loss node. The analytic
/// gradients from one backward pass are compared against
/// (f(p+h) - f(p-h)) / 2h per element. Relative error is
/// |a - n| / max(1, |a|, |n|).
inline GradCheckReport check_gradients(
    const std::string& name,
    const std::function<TensorT<double>*(TapeT<double>&)>& build,
    const std::vector<TensorT<double>*>& params, double tolerance = 1e-4, double h = 1e-5,
    double inject_fault = 0.0) {
    GradCheckReport report;
    report.name = name;

    for (TensorT<double>* p : params) {
        p->ensure_grad();
        p->zero_grad();
    }

    std::vector<std::vector<double>> analytic;
    {
        TapeT<double> tape;
        TensorT<double>* loss = build(tape);
        tape.backward(loss);
        for (TensorT<double>* p : params) {
            analytic.push_back(*p->grad);
        }
        if (inject_fault != 0.0 && !analytic.empty() && !analytic[0].empty()) {
            analytic[0][0] += inject_fault;
        }
    }

    const auto eval_loss = [&]() {
        TapeT<double> tape;
        return build(tape)->data[0];
    };

    double max_rel = 0.0;
    std::size_t elements = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        TensorT<double>& p = *params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p.data[i];
            p.data[i] = saved + h;
            const double fp = eval_loss();
            p.data[i] = saved - h;
            const double fm = eval_loss();
            p.data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - numeric) /
                               std::max({1.0, std::abs(a), std::abs(numeric)});
            max_rel = std::max(max_rel, rel);
            ++elements;
        }
    }

    report.max_rel_err = max_rel;
    report.elements = elements;
    report.pass = max_rel < tolerance;
    return report;
}

/// Fills a tensor with uniform values in [lo, hi].
inline void fill_uniform(TensorT<double>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (double& v : t.data) {
        v = rng.uniform(lo, hi);
    }
}

/// Uniform values with |v| >= margin, for inputs feeding kinked ops (relu)
/// where finite differences straddling the kink would be meaningless.
inline void fill_uniform_away_from_zero(TensorT<double>& t, Rng& rng, double margin = 0.1) {
    for (double& v : t.data) {
        const double mag = rng.uniform(margin, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
}

inline LstmParamsT<double> random_lstm_params(std::size_t units, std::size_t input_dim,
                                              Rng& rng) {
    LstmParamsT<double> p;
    for (std::size_t g = 0; g < 4; ++g) {
        p.w_in[g] = TensorT<double>({units, input_dim});
        p.w_rec[g] = TensorT<double>({units, units});
        p.bias[g] = TensorT<double>({units});
        fill_uniform(p.w_in[g], rng);
        fill_uniform(p.w_rec[g], rng);
        fill_uniform(p.bias[g], rng);
    }
    return p;
}

} // namespace tablere
