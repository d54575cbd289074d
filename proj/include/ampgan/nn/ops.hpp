#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ampgan/errors.hpp"
#include "ampgan/tensor.hpp"

namespace ampgan::nn {

template <typename T>
struct LeakyReLU {
    T slope = static_cast<T>(0.1);
    std::vector<Tensor<T>> cache;

    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> y = x;
        for (T& v : y.data)
            if (v < T{0}) v *= slope;
        cache.push_back(x);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        if (cache.empty()) throw Error("leaky_relu: backward without forward");
        Tensor<T> x = std::move(cache.back());
        cache.pop_back();
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.data.size(); ++i)
            if (x.data[i] < T{0}) dx.data[i] *= slope;
        return dx;
    }

    void clear_cache() { cache.clear(); }
};

// z = tanh(a) * sigmoid(b), the WaveNet gate.
template <typename T>
struct GatedActivation {
    struct Cache {
        Tensor<T> ta, sb;
    };
    std::vector<Cache> cache;

    Tensor<T> forward(const Tensor<T>& a, const Tensor<T>& b) {
        if (!a.same_shape(b)) throw DataError("gated activation: branch shape mismatch");
        Cache c;
        c.ta = a;
        c.sb = b;
        for (T& v : c.ta.data) v = std::tanh(v);
        for (T& v : c.sb.data) v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
        Tensor<T> z = c.ta;
        for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] *= c.sb.data[i];
        cache.push_back(std::move(c));
        return z;
    }

    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dz) {
        if (cache.empty()) throw Error("gated activation: backward without forward");
        Cache c = std::move(cache.back());
        cache.pop_back();
        Tensor<T> da = dz, db = dz;
        for (std::size_t i = 0; i < dz.data.size(); ++i) {
            const T ta = c.ta.data[i], sb = c.sb.data[i];
            da.data[i] = dz.data[i] * sb * (T{1} - ta * ta);
            db.data[i] = dz.data[i] * ta * sb * (T{1} - sb);
        }
        return {std::move(da), std::move(db)};
    }

    void clear_cache() { cache.clear(); }
};

// Non-overlapping mean pooling, kernel 4 stride 4.
template <typename T>
inline Tensor<T> avg_pool_x4(const Tensor<T>& x) {
    if (x.rank() != 3) throw DataError("avg_pool_x4: expected [B, C, T]");
    const std::int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    if (L < 4) throw DataError("avg_pool_x4: pooling error, length " + std::to_string(L) + " < 4");
    const std::int64_t Lo = L / 4;
    Tensor<T> y({B, C, Lo});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t t = 0; t < Lo; ++t) {
                const T* src = &x.at(b, c, 4 * t);
                y.at(b, c, t) =
                    (src[0] + src[1] + src[2] + src[3]) * static_cast<T>(0.25);
            }
    return y;
}

template <typename T>
inline Tensor<T> avg_pool_x4_backward(const Tensor<T>& dy, std::int64_t in_len) {
    const std::int64_t B = dy.dim(0), C = dy.dim(1), Lo = dy.dim(2);
    Tensor<T> dx({B, C, in_len});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t t = 0; t < Lo; ++t) {
                const T g = dy.at(b, c, t) * static_cast<T>(0.25);
                T* dst = &dx.at(b, c, 4 * t);
                dst[0] += g;
                dst[1] += g;
                dst[2] += g;
                dst[3] += g;
            }
    return dx;
}

// Folds [B, 1, T] into [B, 1, T'/p, p]; when T is not a multiple of p the
// tail is reflection-padded (x[T-2], x[T-3], ...) to the next multiple.
template <typename T>
inline Tensor<T> reshape_for_period(const Tensor<T>& x, int p) {
    if (p < 1) throw DataError("reshape_for_period: period must be >= 1");
    if (x.rank() != 3 || x.dim(2) == 0) throw DataError("reshape_for_period: empty input");
    const std::int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    const std::int64_t padded = ((L + p - 1) / p) * p;
    if (padded - L >= L && padded != L)
        throw DataError("reshape_for_period: input too short to reflect-pad for period " +
                        std::to_string(p));
    Tensor<T> y({B, C, padded / p, p});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c) {
            const T* src = &x.at(b, c, 0);
            T* dst = &y.at(b, c, 0, 0);
            for (std::int64_t i = 0; i < L; ++i) dst[i] = src[i];
            for (std::int64_t i = L; i < padded; ++i) dst[i] = src[L - 2 - (i - L)];
        }
    return y;
}

template <typename T>
inline Tensor<T> reshape_for_period_backward(const Tensor<T>& dy, std::int64_t in_len) {
    const std::int64_t B = dy.dim(0), C = dy.dim(1);
    const std::int64_t padded = dy.dim(2) * dy.dim(3);
    Tensor<T> dx({B, C, in_len});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c) {
            const T* src = &dy.at(b, c, 0, 0);
            T* dst = &dx.at(b, c, 0);
            for (std::int64_t i = 0; i < in_len; ++i) dst[i] += src[i];
            for (std::int64_t i = in_len; i < padded; ++i) dst[in_len - 2 - (i - in_len)] += src[i];
        }
    return dx;
}

}  // namespace ampgan::nn
