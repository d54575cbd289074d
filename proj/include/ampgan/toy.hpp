#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ampgan/audio.hpp"
#include "ampgan/dataset.hpp"
#include "ampgan/rng.hpp"
#include "ampgan/wav.hpp"

namespace ampgan {

// Desk-scale training task: clean audio is a mixture of band-limited
// sawtooth bursts, the target tone is tanh(5 * x) applied samplewise (a
// memoryless high-gain surrogate). Clean files are normalized to the
// standard -1 dB peak / -12 LUFS before the nonlinearity so the pairing is
// exact.
inline std::vector<float> toy_clean_signal(Rng& rng, double seconds, int rate = kCanonicalRate) {
    const std::int64_t n = static_cast<std::int64_t>(seconds * rate);
    std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
    const int bursts = static_cast<int>(seconds * 3.0) + 2;
    for (int b = 0; b < bursts; ++b) {
        const double f0 = 70.0 * std::pow(2.0, rng.uniform() * 3.3);  // ~70..690 Hz
        const double amp = rng.uniform(0.15, 0.5);
        const double dur = rng.uniform(0.25, 1.0);
        const std::int64_t start = static_cast<std::int64_t>(rng.uniform() * (seconds - dur) * rate);
        const std::int64_t len = static_cast<std::int64_t>(dur * rate);
        const int harmonics = std::min(24, static_cast<int>(0.45 * rate / f0));
        const double phase0 = rng.uniform() * 2.0 * M_PI;
        const std::int64_t fade = std::min<std::int64_t>(len / 4, rate / 100);
        for (std::int64_t i = 0; i < len; ++i) {
            const double t = static_cast<double>(i) / rate;
            double s = 0.0;
            for (int h = 1; h <= harmonics; ++h)
                s += std::sin(2.0 * M_PI * h * f0 * t + phase0 * h) / h;
            double env = 1.0;
            if (i < fade) env = 0.5 * (1.0 - std::cos(M_PI * i / fade));
            if (len - 1 - i < fade) env = std::min(env, 0.5 * (1.0 - std::cos(M_PI * (len - 1 - i) / fade)));
            acc[static_cast<std::size_t>(start + i)] += amp * env * s * (2.0 / M_PI);
        }
    }
    double peak = 1e-9;
    for (double v : acc) peak = std::max(peak, std::abs(v));
    std::vector<float> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i)
        out[i] = static_cast<float>(acc[i] / peak * 0.7);
    return out;
}

struct ToyDataset {
    std::string manifest_path;
    std::vector<ManifestEntry> entries;
};

inline ToyDataset make_toy_dataset(const std::string& dir, std::uint64_t seed, int n_files = 16,
                                   double secs_per_file = 5.0) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "toy" / "clean");
    fs::create_directories(fs::path(dir) / "toy" / "rendered");
    Rng rng(seed);
    ToyDataset out;
    for (int i = 0; i < n_files; ++i) {
        AudioBuffer clean;
        clean.samples = toy_clean_signal(rng, secs_per_file);
        clean.sample_rate = kCanonicalRate;
        clean.source_id = "toy_" + std::to_string(i);
        AudioBuffer norm = normalize_loudness(clean).buffer;
        std::vector<float> rendered(norm.samples.size());
        for (std::size_t j = 0; j < norm.samples.size(); ++j)
            rendered[j] = std::tanh(5.0f * norm.samples[j]);

        const std::string cpath = (fs::path(dir) / "toy" / "clean" / (clean.source_id + ".wav")).string();
        const std::string rpath =
            (fs::path(dir) / "toy" / "rendered" / (clean.source_id + ".wav")).string();
        write_wav_f32(cpath, norm.samples, kCanonicalRate);
        write_wav_f32(rpath, rendered, kCanonicalRate);
        out.entries.push_back({cpath, Role::clean, "toy"});
        out.entries.push_back({rpath, Role::rendered, "toy"});
    }
    out.manifest_path = (fs::path(dir) / "manifest.json").string();
    write_manifest(out.manifest_path, out.entries);
    return out;
}

}  // namespace ampgan
