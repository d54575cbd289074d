#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ampgan/errors.hpp"

namespace ampgan {

// Integrated loudness per ITU-R BS.1770-4: K-weighting (high-shelf + RLB
// high-pass), 400 ms blocks with 75% overlap, -70 LUFS absolute gate, then a
// relative gate 10 LU below the gated mean.

struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

    void process(std::vector<double>& x) const {
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        for (double& v : x) {
            const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = v;
            y2 = y1;
            y1 = y;
            v = y;
        }
    }
};

struct KWeighting {
    Biquad shelf, highpass;

    // Filter parameters follow the sample-rate adaption of the BS.1770
    // reference curves (identical to the pyloudnorm "K-weighting" class);
    // at 48 kHz they reproduce the coefficients tabulated in the standard.
    static KWeighting design(double fs) {
        KWeighting k;
        {
            const double db = 3.999843853973347;
            const double f0 = 1681.974450955533;
            const double Q = 0.7071752369554196;
            const double K = std::tan(M_PI * f0 / fs);
            const double Vh = std::pow(10.0, db / 20.0);
            const double Vb = std::pow(Vh, 0.4996667741545416);
            const double a0 = 1.0 + K / Q + K * K;
            k.shelf.b0 = (Vh + Vb * K / Q + K * K) / a0;
            k.shelf.b1 = 2.0 * (K * K - Vh) / a0;
            k.shelf.b2 = (Vh - Vb * K / Q + K * K) / a0;
            k.shelf.a1 = 2.0 * (K * K - 1.0) / a0;
            k.shelf.a2 = (1.0 - K / Q + K * K) / a0;
        }
        {
            const double f0 = 38.13547087602444;
            const double Q = 0.5003270373238773;
            const double K = std::tan(M_PI * f0 / fs);
            const double a0 = 1.0 + K / Q + K * K;
            k.highpass.b0 = 1.0;
            k.highpass.b1 = -2.0;
            k.highpass.b2 = 1.0;
            k.highpass.a1 = 2.0 * (K * K - 1.0) / a0;
            k.highpass.a2 = (1.0 - K / Q + K * K) / a0;
        }
        return k;
    }

    void apply(std::vector<double>& x) const {
        shelf.process(x);
        highpass.process(x);
    }
};

// Returns integrated loudness in LUFS, or nullopt when every block is gated
// out (e.g. digital silence).
inline std::optional<double> measure_integrated_lufs(const std::vector<float>& mono, int rate) {
    const std::int64_t block = static_cast<std::int64_t>(std::lround(0.400 * rate));
    const std::int64_t hop = static_cast<std::int64_t>(std::lround(0.100 * rate));
    if (static_cast<std::int64_t>(mono.size()) < block)
        throw DataError("loudness: input shorter than one 400 ms gating block");

    std::vector<double> x(mono.begin(), mono.end());
    KWeighting::design(static_cast<double>(rate)).apply(x);

    std::vector<double> block_power;
    for (std::int64_t start = 0; start + block <= static_cast<std::int64_t>(x.size());
         start += hop) {
        double acc = 0.0;
        for (std::int64_t i = start; i < start + block; ++i) acc += x[static_cast<std::size_t>(i)] *
                                                                    x[static_cast<std::size_t>(i)];
        block_power.push_back(acc / static_cast<double>(block));
    }

    constexpr double kOffset = -0.691;
    constexpr double kAbsGate = -70.0;
    auto loudness_of = [](double power) {
        return kOffset + 10.0 * std::log10(std::max(power, 1e-300));
    };

    double sum = 0.0;
    std::int64_t count = 0;
    for (double z : block_power)
        if (loudness_of(z) > kAbsGate) {
            sum += z;
            ++count;
        }
    if (count == 0) return std::nullopt;

    const double relative_gate = loudness_of(sum / static_cast<double>(count)) - 10.0;
    sum = 0.0;
    count = 0;
    for (double z : block_power)
        if (loudness_of(z) > kAbsGate && loudness_of(z) > relative_gate) {
            sum += z;
            ++count;
        }
    if (count == 0) return std::nullopt;
    return loudness_of(sum / static_cast<double>(count));
}

}  // namespace ampgan
