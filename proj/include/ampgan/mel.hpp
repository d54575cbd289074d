#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "ampgan/errors.hpp"
#include "ampgan/fft.hpp"

namespace ampgan {

struct MelConfig {
    int fft_size = 1024;
    int hop = 256;
    int n_mels = 128;
    int sample_rate = 44100;
    double fmin = 0.0;
    double fmax = 22050.0;

    void validate() const {
        if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
            throw ConfigError("mel: fft_size must be a positive power of two");
        if (hop <= 0 || hop > fft_size) throw ConfigError("mel: hop must be in (0, fft_size]");
        if (n_mels <= 0) throw ConfigError("mel: n_mels must be positive");
        if (fmax > sample_rate / 2.0 + 1e-9)
            throw ConfigError("mel: fmax exceeds the Nyquist frequency");
        if (fmin < 0.0 || fmin >= fmax) throw ConfigError("mel: need 0 <= fmin < fmax");
    }
};

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Area of the unit triangle (peak 1 at c, feet at lo/hi) over [x0, x1].
inline double triangle_area(double lo, double c, double hi, double x0, double x1) {
    auto up = [&](double a, double b) {  // integral of rising edge over [a,b]
        a = std::max(a, lo);
        b = std::min(b, c);
        if (b <= a || c <= lo) return 0.0;
        auto f = [&](double x) { return (x - lo) / (c - lo); };
        return 0.5 * (f(a) + f(b)) * (b - a);
    };
    auto down = [&](double a, double b) {
        a = std::max(a, c);
        b = std::min(b, hi);
        if (b <= a || hi <= c) return 0.0;
        auto f = [&](double x) { return (hi - x) / (hi - c); };
        return 0.5 * (f(a) + f(b)) * (b - a);
    };
    return up(x0, x1) + down(x0, x1);
}

}  // namespace detail

// Triangular mel filterbank with filter weights computed as the average of
// the triangle over each DFT bin's frequency band (rather than point samples
// at bin centers). Narrow low-frequency filters that would fall between bin
// centers still get positive weight, so every row sums > 0.
inline std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg) {
    cfg.validate();
    const int n_bins = cfg.fft_size / 2 + 1;
    const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.fft_size;
    const double mel_lo = detail::hz_to_mel(cfg.fmin);
    const double mel_hi = detail::hz_to_mel(cfg.fmax);

    std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        edges[static_cast<std::size_t>(i)] =
            detail::mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

    std::vector<std::vector<double>> fb(static_cast<std::size_t>(cfg.n_mels),
                                        std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[static_cast<std::size_t>(m)];
        const double c = edges[static_cast<std::size_t>(m) + 1];
        const double hi = edges[static_cast<std::size_t>(m) + 2];
        double row_sum = 0.0;
        for (int k = 0; k < n_bins; ++k) {
            const double x0 = (k - 0.5) * bin_hz;
            const double x1 = (k + 0.5) * bin_hz;
            const double w = detail::triangle_area(lo, c, hi, x0, x1) / bin_hz;
            fb[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = w;
            row_sum += w;
        }
        if (row_sum <= 0.0) throw ConfigError("mel: filter row " + std::to_string(m) +
                                              " has zero weight; check fft_size/n_mels");
    }
    return fb;
}

inline std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
    return w;
}

// Magnitude STFT, no centering: frame f covers samples [f*hop, f*hop+fft).
struct Stft {
    int fft_size;
    int hop;
    std::int64_t n_frames;
    // [frame][bin]
    std::vector<std::vector<std::complex<double>>> spectra;

    std::vector<std::vector<double>> magnitudes() const {
        std::vector<std::vector<double>> mag(spectra.size());
        for (std::size_t f = 0; f < spectra.size(); ++f) {
            mag[f].resize(spectra[f].size());
            for (std::size_t k = 0; k < spectra[f].size(); ++k) mag[f][k] = std::abs(spectra[f][k]);
        }
        return mag;
    }
};

template <typename T>
inline Stft stft(const std::vector<T>& x, const MelConfig& cfg) {
    cfg.validate();
    if (static_cast<std::int64_t>(x.size()) < cfg.fft_size)
        throw DataError("mel: signal shorter than one analysis frame");
    const std::vector<double> win = hann_window(cfg.fft_size);
    Stft out;
    out.fft_size = cfg.fft_size;
    out.hop = cfg.hop;
    out.n_frames = 1 + (static_cast<std::int64_t>(x.size()) - cfg.fft_size) / cfg.hop;
    out.spectra.resize(static_cast<std::size_t>(out.n_frames));
    std::vector<double> frame(static_cast<std::size_t>(cfg.fft_size));
    for (std::int64_t f = 0; f < out.n_frames; ++f) {
        const std::int64_t start = f * cfg.hop;
        for (int i = 0; i < cfg.fft_size; ++i)
            frame[static_cast<std::size_t>(i)] =
                static_cast<double>(x[static_cast<std::size_t>(start + i)]) *
                win[static_cast<std::size_t>(i)];
        out.spectra[static_cast<std::size_t>(f)] = rfft(frame);
    }
    return out;
}

// log(1e-5 + mel magnitude), [frame][mel].
template <typename T>
inline std::vector<std::vector<double>> log_mel_spectrogram(const std::vector<T>& x,
                                                            const MelConfig& cfg) {
    const auto fb = mel_filterbank(cfg);
    const auto mag = stft(x, cfg).magnitudes();
    std::vector<std::vector<double>> out(mag.size(),
                                         std::vector<double>(static_cast<std::size_t>(cfg.n_mels)));
    for (std::size_t f = 0; f < mag.size(); ++f)
        for (int m = 0; m < cfg.n_mels; ++m) {
            double acc = 0.0;
            const auto& row = fb[static_cast<std::size_t>(m)];
            for (std::size_t k = 0; k < row.size(); ++k) acc += row[k] * mag[f][k];
            out[f][static_cast<std::size_t>(m)] = std::log(1e-5 + acc);
        }
    return out;
}

// Mean absolute difference of log-compressed mel magnitudes over all
// (frame, mel) bins.
template <typename T>
inline double mel_l1(const std::vector<T>& y, const std::vector<T>& y_hat, const MelConfig& cfg) {
    if (y.size() != y_hat.size()) throw DataError("mel_l1: length mismatch");
    const auto a = log_mel_spectrogram(y, cfg);
    const auto b = log_mel_spectrogram(y_hat, cfg);
    double acc = 0.0;
    std::int64_t count = 0;
    for (std::size_t f = 0; f < a.size(); ++f)
        for (std::size_t m = 0; m < a[f].size(); ++m) {
            acc += std::abs(a[f][m] - b[f][m]);
            ++count;
        }
    return acc / static_cast<double>(count);
}

// Gradient of mel_l1(y, y_hat) with respect to y_hat.
template <typename T>
inline std::vector<T> mel_l1_backward(const std::vector<T>& y, const std::vector<T>& y_hat,
                                      const MelConfig& cfg) {
    if (y.size() != y_hat.size()) throw DataError("mel_l1: length mismatch");
    const auto fb = mel_filterbank(cfg);
    const auto ref = log_mel_spectrogram(y, cfg);
    const Stft s = stft(y_hat, cfg);
    const auto mag = s.magnitudes();
    const int n_bins = cfg.fft_size / 2 + 1;
    const std::vector<double> win = hann_window(cfg.fft_size);
    const double inv_count =
        1.0 / (static_cast<double>(ref.size()) * static_cast<double>(cfg.n_mels));

    std::vector<T> grad(y_hat.size(), T{0});
    for (std::size_t f = 0; f < mag.size(); ++f) {
        // d|S|: accumulate per-bin magnitude gradients across mel rows.
        std::vector<double> dmag(static_cast<std::size_t>(n_bins), 0.0);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double mel_mag = 0.0;
            const auto& row = fb[static_cast<std::size_t>(m)];
            for (std::size_t k = 0; k < row.size(); ++k) mel_mag += row[k] * mag[f][k];
            const double log_val = std::log(1e-5 + mel_mag);
            const double diff = log_val - ref[f][static_cast<std::size_t>(m)];
            const double sign = (diff > 0.0) ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            const double d_melmag = sign * inv_count / (1e-5 + mel_mag);
            for (std::size_t k = 0; k < row.size(); ++k) dmag[k] += d_melmag * row[k];
        }
        std::vector<std::complex<double>> dspec(static_cast<std::size_t>(n_bins));
        for (int k = 0; k < n_bins; ++k) {
            const auto& S = s.spectra[f][static_cast<std::size_t>(k)];
            const double a = std::abs(S);
            dspec[static_cast<std::size_t>(k)] =
                (a > 0.0) ? dmag[static_cast<std::size_t>(k)] * (S / a)
                          : std::complex<double>(0.0, 0.0);
        }
        const std::vector<double> dframe = rfft_adjoint(dspec, static_cast<std::size_t>(cfg.fft_size));
        const std::int64_t start = static_cast<std::int64_t>(f) * cfg.hop;
        for (int i = 0; i < cfg.fft_size; ++i)
            grad[static_cast<std::size_t>(start + i)] +=
                static_cast<T>(dframe[static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)]);
    }
    return grad;
}

}  // namespace ampgan
