#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "ampgan/errors.hpp"

namespace ampgan {

// Dense row-major tensor. Audio batches are [B, C, T]; the period
// discriminators see [B, C, H, W].
template <typename T>
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), T{0});
    }

    static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (auto d : s) {
            if (d < 0) throw DataError("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    T& at(std::int64_t b, std::int64_t c, std::int64_t t) {
        return data[static_cast<std::size_t>((b * shape[1] + c) * shape[2] + t)];
    }
    const T& at(std::int64_t b, std::int64_t c, std::int64_t t) const {
        return data[static_cast<std::size_t>((b * shape[1] + c) * shape[2] + t)];
    }
    T& at(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) {
        return data[static_cast<std::size_t>(((b * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    const T& at(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return data[static_cast<std::size_t>(((b * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double mean() const {
        if (data.empty()) throw DataError("Tensor::mean on empty tensor");
        double acc = 0.0;
        for (const T& v : data) acc += static_cast<double>(v);
        return acc / static_cast<double>(data.size());
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

}  // namespace ampgan
