#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "ampgan/errors.hpp"

namespace ampgan {

// In-place iterative radix-2 Cooley-Tukey. n must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw ConfigError("fft: size must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

// DFT of a real frame; returns the n/2+1 non-redundant bins.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& frame) {
    std::vector<std::complex<double>> a(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) a[i] = {frame[i], 0.0};
    fft_inplace(a);
    a.resize(frame.size() / 2 + 1);
    return a;
}

// Adjoint of rfft for a loss that reads each of the n/2+1 retained bins
// exactly once: dL/dx[n] = sum_k Re(g[k] * e^{+2*pi*i*k*n/N}).
inline std::vector<double> rfft_adjoint(const std::vector<std::complex<double>>& grad_bins,
                                        std::size_t n) {
    std::vector<std::complex<double>> full(n, {0.0, 0.0});
    for (std::size_t k = 0; k < grad_bins.size() && k < n; ++k) full[k] = grad_bins[k];
    fft_inplace(full, true);  // normalized inverse; rescale below
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = full[i].real() * static_cast<double>(n);
    return out;
}

}  // namespace ampgan
