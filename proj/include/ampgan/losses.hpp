#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ampgan/discriminator.hpp"
#include "ampgan/errors.hpp"
#include "ampgan/tensor.hpp"

namespace ampgan {

// Hinge discriminator objective, Sum_s [ mean(max(0, 1 - D_s(y))) +
// mean(max(0, 1 + D_s(G(x)))) ]. Gradients are elementwise subgradients
// scaled by 1/map_size.
template <typename T>
struct HingeDLoss {
    double value = 0.0;
    std::vector<Tensor<T>> dreal, dfake;
};

template <typename T>
inline HingeDLoss<T> hinge_d_loss(const LogitMaps<T>& real, const LogitMaps<T>& fake,
                                  bool with_grad = true) {
    if (real.count() != fake.count())
        throw DataError("hinge_d_loss: logit map topology mismatch (" +
                        std::to_string(real.count()) + " vs " + std::to_string(fake.count()) + ")");
    HingeDLoss<T> out;
    for (std::size_t s = 0; s < real.count(); ++s) {
        const Tensor<T>& r = real.maps[s];
        const Tensor<T>& f = fake.maps[s];
        const double inv_r = 1.0 / static_cast<double>(r.numel());
        const double inv_f = 1.0 / static_cast<double>(f.numel());
        Tensor<T> dr, df;
        if (with_grad) {
            dr = Tensor<T>(r.shape);
            df = Tensor<T>(f.shape);
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < r.data.size(); ++i) {
            const double margin = 1.0 - static_cast<double>(r.data[i]);
            if (margin > 0.0) {
                acc += margin * inv_r;
                if (with_grad) dr.data[i] = static_cast<T>(-inv_r);
            }
        }
        for (std::size_t i = 0; i < f.data.size(); ++i) {
            const double margin = 1.0 + static_cast<double>(f.data[i]);
            if (margin > 0.0) {
                acc += margin * inv_f;
                if (with_grad) df.data[i] = static_cast<T>(inv_f);
            }
        }
        out.value += acc;
        if (with_grad) {
            out.dreal.push_back(std::move(dr));
            out.dfake.push_back(std::move(df));
        }
    }
    return out;
}

// Hinge generator objective, Sum_s mean(-D_s(G(x))).
template <typename T>
struct HingeGLoss {
    double value = 0.0;
    std::vector<Tensor<T>> dfake;
};

template <typename T>
inline HingeGLoss<T> hinge_g_loss(const LogitMaps<T>& fake, bool with_grad = true) {
    HingeGLoss<T> out;
    for (const Tensor<T>& f : fake.maps) {
        const double inv = 1.0 / static_cast<double>(f.numel());
        double acc = 0.0;
        for (const T& v : f.data) acc -= static_cast<double>(v) * inv;
        out.value += acc;
        if (with_grad) {
            Tensor<T> df(f.shape);
            for (T& v : df.data) v = static_cast<T>(-inv);
            out.dfake.push_back(std::move(df));
        }
    }
    return out;
}

// y[n] = x[n] - coeff * x[n-1], x[-1] = 0.
template <typename T>
inline std::vector<T> preemphasis(const std::vector<T>& x, double coeff = 0.95) {
    std::vector<T> y(x.size());
    T prev = T{0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = static_cast<T>(static_cast<double>(x[i]) - coeff * static_cast<double>(prev));
        prev = x[i];
    }
    return y;
}

// Adjoint of the pre-emphasis filter: g[n] = d[n] - coeff * d[n+1].
template <typename T>
inline std::vector<T> preemphasis_adjoint(const std::vector<T>& d, double coeff = 0.95) {
    std::vector<T> g(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double v = static_cast<double>(d[i]);
        if (i + 1 < d.size()) v -= coeff * static_cast<double>(d[i + 1]);
        g[i] = static_cast<T>(v);
    }
    return g;
}

// Error-to-signal ratio: sum |y_p - yhat_p|^2 / sum |y_p|^2, optionally on
// pre-emphasized signals. Scale-invariant by construction.
template <typename T>
inline double esr(const std::vector<T>& y, const std::vector<T>& y_hat,
                  bool preemph = true, double coeff = 0.95) {
    if (y.size() != y_hat.size()) throw DataError("esr: length mismatch");
    if (y.empty()) throw DataError("esr: empty signals");
    const std::vector<T> yp = preemph ? preemphasis(y, coeff) : y;
    const std::vector<T> hp = preemph ? preemphasis(y_hat, coeff) : y_hat;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < yp.size(); ++i) {
        const double d = static_cast<double>(yp[i]) - static_cast<double>(hp[i]);
        num += d * d;
        den += static_cast<double>(yp[i]) * static_cast<double>(yp[i]);
    }
    if (den == 0.0) throw NumericError("esr: target has zero energy after pre-emphasis");
    return num / den;
}

// Gradient of esr(y, y_hat) w.r.t. y_hat.
template <typename T>
inline std::vector<T> esr_backward(const std::vector<T>& y, const std::vector<T>& y_hat,
                                   bool preemph = true, double coeff = 0.95) {
    if (y.size() != y_hat.size()) throw DataError("esr: length mismatch");
    const std::vector<T> yp = preemph ? preemphasis(y, coeff) : y;
    const std::vector<T> hp = preemph ? preemphasis(y_hat, coeff) : y_hat;
    double den = 0.0;
    for (const T& v : yp) den += static_cast<double>(v) * static_cast<double>(v);
    if (den == 0.0) throw NumericError("esr: target has zero energy after pre-emphasis");
    std::vector<T> d(hp.size());
    for (std::size_t i = 0; i < hp.size(); ++i)
        d[i] = static_cast<T>(2.0 * (static_cast<double>(hp[i]) - static_cast<double>(yp[i])) / den);
    return preemph ? preemphasis_adjoint(d, coeff) : d;
}

// L1 feature-matching loss over intermediate discriminator activations:
// Sum_subs Sum_layers mean |f_real - f_fake|. Requires a paired setting;
// unpaired training never calls it.
template <typename T>
struct FeatureMatchLoss {
    double value = 0.0;
    std::vector<std::vector<Tensor<T>>> dfake;  // [sub][layer]
};

template <typename T>
inline FeatureMatchLoss<T> feature_matching_loss(
    const std::vector<std::vector<Tensor<T>>>& real_feats,
    const std::vector<std::vector<Tensor<T>>>& fake_feats, bool with_grad = true) {
    if (real_feats.size() != fake_feats.size())
        throw DataError("feature_matching_loss: sub-discriminator count mismatch");
    FeatureMatchLoss<T> out;
    for (std::size_t s = 0; s < real_feats.size(); ++s) {
        if (real_feats[s].size() != fake_feats[s].size())
            throw DataError("feature_matching_loss: layer count mismatch in sub " +
                            std::to_string(s));
        std::vector<Tensor<T>> dsub;
        for (std::size_t l = 0; l < real_feats[s].size(); ++l) {
            const Tensor<T>& fr = real_feats[s][l];
            const Tensor<T>& ff = fake_feats[s][l];
            if (!fr.same_shape(ff))
                throw DataError("feature_matching_loss: feature shape mismatch");
            const double inv = 1.0 / static_cast<double>(fr.numel());
            Tensor<T> d;
            if (with_grad) d = Tensor<T>(ff.shape);
            double acc = 0.0;
            for (std::size_t i = 0; i < fr.data.size(); ++i) {
                const double diff = static_cast<double>(ff.data[i]) - static_cast<double>(fr.data[i]);
                acc += std::abs(diff) * inv;
                if (with_grad)
                    d.data[i] = static_cast<T>((diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0)));
            }
            out.value += acc;
            if (with_grad) dsub.push_back(std::move(d));
        }
        if (with_grad) out.dfake.push_back(std::move(dsub));
    }
    return out;
}

}  // namespace ampgan
