#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ampgan/errors.hpp"
#include "ampgan/nn/conv.hpp"

namespace ampgan::nn {

// Adam with decoupled weight decay: theta <- theta * (1 - lr*wd) - lr * mhat / (sqrt(vhat) + eps).
template <typename T>
struct AdamW {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::int64_t t = 0;

    std::vector<std::vector<T>> m, v;

    void ensure_moments(const std::vector<ParamRef<T>>& params) {
        if (m.size() == params.size()) return;
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.value->size(), T{0});
            v.emplace_back(p.value->size(), T{0});
        }
    }

    void step(const std::vector<ParamRef<T>>& params) {
        ensure_moments(params);
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            std::vector<T>& val = *params[pi].value;
            const std::vector<T>& grad = *params[pi].grad;
            if (val.size() != grad.size() || val.size() != m[pi].size())
                throw Error("adamw: parameter/gradient size mismatch for " + params[pi].name);
            for (std::size_t i = 0; i < val.size(); ++i) {
                const double g = static_cast<double>(grad[i]);
                const double mi = beta1 * static_cast<double>(m[pi][i]) + (1.0 - beta1) * g;
                const double vi = beta2 * static_cast<double>(v[pi][i]) + (1.0 - beta2) * g * g;
                m[pi][i] = static_cast<T>(mi);
                v[pi][i] = static_cast<T>(vi);
                const double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps);
                val[i] = static_cast<T>(static_cast<double>(val[i]) * (1.0 - lr * weight_decay) -
                                        lr * update);
            }
        }
    }
};

}  // namespace ampgan::nn
