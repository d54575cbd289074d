#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ampgan/errors.hpp"
#include "ampgan/loudness.hpp"
#include "ampgan/resample.hpp"
#include "ampgan/wav.hpp"

namespace ampgan {

constexpr int kCanonicalRate = 44100;

struct AudioBuffer {
    std::vector<float> samples;  // mono
    int sample_rate = kCanonicalRate;
    std::string source_id;
};

// Loads a WAV file and canonicalizes it: mean downmix to mono, windowed-sinc
// resample to 44.1 kHz, finite-sample check.
inline AudioBuffer load_audio(const std::string& path) {
    WavData wav = read_wav(path);

    std::vector<float> mono(static_cast<std::size_t>(wav.frames()));
    if (wav.channels == 1) {
        mono = std::move(wav.samples);
    } else {
        const double inv = 1.0 / wav.channels;
        for (std::int64_t i = 0; i < wav.frames(); ++i) {
            double acc = 0.0;
            for (int c = 0; c < wav.channels; ++c)
                acc += wav.samples[static_cast<std::size_t>(i * wav.channels + c)];
            mono[static_cast<std::size_t>(i)] = static_cast<float>(acc * inv);
        }
    }

    if (wav.sample_rate != kCanonicalRate)
        mono = resample_sinc(mono, wav.sample_rate, kCanonicalRate);
    if (mono.empty()) throw DataError("empty-input error: '" + path + "' resampled to nothing");

    for (float v : mono)
        if (!std::isfinite(v))
            throw DataError("ingestion error: '" + path + "' contains non-finite samples");

    AudioBuffer buf;
    buf.samples = std::move(mono);
    buf.sample_rate = kCanonicalRate;
    // Provenance id: file stem.
    std::size_t slash = path.find_last_of("/\\");
    std::string name = (slash == std::string::npos) ? path : path.substr(slash + 1);
    std::size_t dot = name.find_last_of('.');
    buf.source_id = (dot == std::string::npos) ? name : name.substr(0, dot);
    return buf;
}

inline std::optional<double> measure_integrated_loudness(const AudioBuffer& buf) {
    return measure_integrated_lufs(buf.samples, buf.sample_rate);
}

struct NormalizeResult {
    AudioBuffer buffer;
    bool clip_clamped = false;  // LUFS gain hit the unit-peak ceiling
    double peak_gain = 1.0;     // stage 1: scale to the peak target
    double lufs_gain = 1.0;     // stage 2: scale to the loudness target
};

// Two-stage normalization: peak to `peak_db` dBFS (sample peak), then
// integrated loudness to `target_lufs`. If the loudness gain would push the
// peak above 1.0 the gain is clamped to unit peak and the result flagged.
inline NormalizeResult normalize_loudness(const AudioBuffer& buf, double peak_db = -1.0,
                                          double target_lufs = -12.0) {
    float peak = 0.0f;
    for (float v : buf.samples) peak = std::max(peak, std::abs(v));
    if (peak <= 0.0f)
        throw DataError("normalization error: '" + buf.source_id + "' is unmeasurable (silent)");

    const double peak_target = std::pow(10.0, peak_db / 20.0);
    const double gain1 = peak_target / peak;

    NormalizeResult out;
    out.peak_gain = gain1;
    out.buffer.sample_rate = buf.sample_rate;
    out.buffer.source_id = buf.source_id;
    out.buffer.samples.resize(buf.samples.size());
    for (std::size_t i = 0; i < buf.samples.size(); ++i)
        out.buffer.samples[i] = static_cast<float>(buf.samples[i] * gain1);

    auto lufs = measure_integrated_loudness(out.buffer);
    if (!lufs)
        throw DataError("normalization error: '" + buf.source_id +
                        "' is unmeasurable (all blocks gated out)");

    double gain2 = std::pow(10.0, (target_lufs - *lufs) / 20.0);
    if (gain2 * peak_target > 1.0) {
        gain2 = 1.0 / peak_target;
        out.clip_clamped = true;
    }
    out.lufs_gain = gain2;
    for (float& v : out.buffer.samples) v = static_cast<float>(v * gain2);
    return out;
}

// Non-overlapping fixed-length windows; the trailing remainder is dropped.
// Returns start offsets into the buffer.
inline std::vector<std::int64_t> segment_offsets(std::int64_t n_samples, std::int64_t length) {
    if (length <= 0) throw DataError("segment: non-positive segment length");
    std::vector<std::int64_t> starts;
    for (std::int64_t s = 0; s + length <= n_samples; s += length) starts.push_back(s);
    return starts;
}

}  // namespace ampgan
