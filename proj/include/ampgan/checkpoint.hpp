#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ampgan/errors.hpp"

namespace ampgan {

// Checkpoint container: magic "AMPG", format version u32, length-prefixed
// named float32 blobs (little-endian), then a JSON metadata block.
struct CheckpointFile {
    static constexpr std::uint32_t kVersion = 1;
    std::map<std::string, std::vector<float>> blobs;
    std::string meta_json;
};

namespace detail {

inline void put_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    f.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ofstream& f, std::uint64_t v) {
    put_u32(f, static_cast<std::uint32_t>(v & 0xffffffffULL));
    put_u32(f, static_cast<std::uint32_t>(v >> 32));
}
inline std::uint32_t get_u32(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw DataError("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline std::uint64_t get_u64(std::ifstream& f) {
    const std::uint64_t lo = get_u32(f);
    const std::uint64_t hi = get_u32(f);
    return lo | (hi << 32);
}

}  // namespace detail

inline void write_checkpoint_file(const std::string& path, const CheckpointFile& ckpt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    f.write("AMPG", 4);
    detail::put_u32(f, CheckpointFile::kVersion);
    detail::put_u32(f, static_cast<std::uint32_t>(ckpt.blobs.size()));
    for (const auto& [name, data] : ckpt.blobs) {
        detail::put_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u64(f, data.size());
        f.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(float)));
    }
    detail::put_u32(f, static_cast<std::uint32_t>(ckpt.meta_json.size()));
    f.write(ckpt.meta_json.data(), static_cast<std::streamsize>(ckpt.meta_json.size()));
    if (!f) throw DataError("checkpoint: short write to '" + path + "'");
}

inline CheckpointFile read_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "AMPG", 4) != 0)
        throw DataError("checkpoint: '" + path + "' is not an AMPG checkpoint");
    const std::uint32_t version = detail::get_u32(f);
    if (version != CheckpointFile::kVersion)
        throw DataError("checkpoint: '" + path + "' has unsupported format version " +
                        std::to_string(version));
    CheckpointFile out;
    const std::uint32_t n_blobs = detail::get_u32(f);
    for (std::uint32_t i = 0; i < n_blobs; ++i) {
        const std::uint32_t name_len = detail::get_u32(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const std::uint64_t count = detail::get_u64(f);
        std::vector<float> data(count);
        f.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(count * sizeof(float)));
        if (!f) throw DataError("checkpoint: '" + path + "' truncated inside blob '" + name + "'");
        out.blobs.emplace(std::move(name), std::move(data));
    }
    const std::uint32_t meta_len = detail::get_u32(f);
    out.meta_json.resize(meta_len);
    f.read(out.meta_json.data(), meta_len);
    if (!f) throw DataError("checkpoint: '" + path + "' truncated in metadata block");
    return out;
}

}  // namespace ampgan
