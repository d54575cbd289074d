#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ampgan/errors.hpp"

namespace ampgan {

// Minimal RIFF/WAVE reader and writer. Reads linear PCM (16/24-bit) and
// 32-bit float, any channel count and rate; writes 32-bit float.
struct WavData {
    int channels = 0;
    int sample_rate = 0;
    // Interleaved [frame][channel], already converted to float in [-1, 1].
    std::vector<float> samples;

    std::int64_t frames() const {
        return channels > 0 ? static_cast<std::int64_t>(samples.size()) / channels : 0;
    }
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline WavData read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("ingestion error: cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw DataError("ingestion error: '" + path + "' is not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data_ptr = nullptr;
    std::uint64_t data_len = 0;
    bool have_fmt = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        std::uint32_t len = detail::read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > bytes.size()) len = static_cast<std::uint32_t>(bytes.size() - body);
        if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
            const unsigned char* p = bytes.data() + body;
            format = detail::read_u16(p);
            channels = detail::read_u16(p + 2);
            rate = detail::read_u32(p + 4);
            bits = detail::read_u16(p + 14);
            if (format == 0xFFFE && len >= 40)  // WAVE_FORMAT_EXTENSIBLE
                format = detail::read_u16(p + 24);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_ptr = bytes.data() + body;
            data_len = len;
        }
        pos = body + len + (len & 1);  // chunks are word-aligned
    }

    if (!have_fmt || data_ptr == nullptr)
        throw DataError("ingestion error: '" + path + "' missing fmt/data chunk");
    if (channels == 0 || rate == 0)
        throw DataError("ingestion error: '" + path + "' has invalid format fields");

    const bool pcm = (format == 1);
    const bool flt = (format == 3);
    if (!(pcm && (bits == 16 || bits == 24)) && !(flt && bits == 32))
        throw DataError("ingestion error: '" + path + "' unsupported encoding (format " +
                        std::to_string(format) + ", " + std::to_string(bits) + " bit)");

    const std::uint32_t bytes_per = bits / 8u;
    const std::uint64_t count = data_len / bytes_per;
    if (count == 0) throw DataError("empty-input error: '" + path + "' has no audio samples");

    WavData out;
    out.channels = channels;
    out.sample_rate = static_cast<int>(rate);
    out.samples.resize(count);
    const unsigned char* p = data_ptr;
    if (pcm && bits == 16) {
        for (std::uint64_t i = 0; i < count; ++i, p += 2) {
            std::int16_t v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
            out.samples[i] = static_cast<float>(v) / 32768.0f;
        }
    } else if (pcm && bits == 24) {
        for (std::uint64_t i = 0; i < count; ++i, p += 3) {
            std::int32_t v = static_cast<std::int32_t>(
                (static_cast<std::uint32_t>(p[0]) << 8) | (static_cast<std::uint32_t>(p[1]) << 16) |
                (static_cast<std::uint32_t>(p[2]) << 24));
            out.samples[i] = static_cast<float>(v >> 8) / 8388608.0f;
        }
    } else {
        for (std::uint64_t i = 0; i < count; ++i, p += 4) {
            float v;
            std::memcpy(&v, p, 4);
            out.samples[i] = v;
        }
    }
    // Drop any ragged trailing frame.
    out.samples.resize((out.samples.size() / channels) * channels);
    if (out.samples.empty())
        throw DataError("empty-input error: '" + path + "' has no complete frames");
    return out;
}

inline void write_wav_f32(const std::string& path, const std::vector<float>& mono,
                          int sample_rate) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        f.write(reinterpret_cast<const char*>(b), 4);
    };
    auto put_u16 = [&](std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff)};
        f.write(reinterpret_cast<const char*>(b), 2);
    };
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(mono.size() * 4);
    f.write("RIFF", 4);
    put_u32(36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(16);
    put_u16(3);  // IEEE float
    put_u16(1);
    put_u32(static_cast<std::uint32_t>(sample_rate));
    put_u32(static_cast<std::uint32_t>(sample_rate) * 4);
    put_u16(4);
    put_u16(32);
    f.write("data", 4);
    put_u32(data_bytes);
    f.write(reinterpret_cast<const char*>(mono.data()), data_bytes);
    if (!f) throw DataError("short write to '" + path + "'");
}

}  // namespace ampgan
