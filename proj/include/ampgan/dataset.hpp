#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampgan/audio.hpp"
#include "ampgan/errors.hpp"
#include "ampgan/rng.hpp"
#include "ampgan/tensor.hpp"

namespace ampgan {

enum class Role { clean, rendered };
enum class Split { train, val, test };

inline Role parse_role(const std::string& s) {
    if (s == "clean") return Role::clean;
    if (s == "rendered") return Role::rendered;
    throw DataError("manifest: role must be 'clean' or 'rendered', got '" + s + "'");
}
inline const char* role_name(Role r) { return r == Role::clean ? "clean" : "rendered"; }
inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

struct ManifestEntry {
    std::string path;
    Role role = Role::clean;
    std::string tone_label;
};

// Manifest format: a JSON array of {"path": ..., "role": "clean"|"rendered",
// "tone_label": ...} objects.
inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("manifest: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw DataError("manifest: '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_array()) throw DataError("manifest: '" + path + "' must be a JSON array");
    std::vector<ManifestEntry> out;
    for (const auto& item : j) {
        for (const auto& [key, _] : item.items())
            if (key != "path" && key != "role" && key != "tone_label")
                throw DataError("manifest: unknown key '" + key + "' in '" + path + "'");
        ManifestEntry e;
        e.path = item.at("path").get<std::string>();
        e.role = parse_role(item.at("role").get<std::string>());
        e.tone_label = item.at("tone_label").get<std::string>();
        out.push_back(std::move(e));
    }
    if (out.empty()) throw DataError("manifest: '" + path + "' lists no files");
    return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : entries)
        j.push_back({{"path", e.path}, {"role", role_name(e.role)}, {"tone_label", e.tone_label}});
    std::ofstream f(path);
    if (!f) throw DataError("manifest: cannot write '" + path + "'");
    f << j.dump(2) << "\n";
}

// Deterministic source-level split: within each (role, tone_label) group,
// shuffle under the seed, then assign floor(N*0.8) train, floor(N*0.1) val,
// remainder test. Splitting before segmentation keeps adjacent audio from
// leaking across splits.
inline std::vector<Split> split_sources(const std::vector<ManifestEntry>& entries,
                                        std::uint64_t seed, double train_frac = 0.8,
                                        double val_frac = 0.1, double test_frac = 0.1) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("split: ratios must sum to 1");
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < entries.size(); ++i)
        groups[{entries[i].tone_label, role_name(entries[i].role)}].push_back(i);

    std::vector<Split> out(entries.size(), Split::train);
    for (auto& [key, idx] : groups) {
        if (idx.size() < 3)
            throw DataError("split error: group (" + key.first + ", " + key.second + ") has " +
                            std::to_string(idx.size()) + " source files; need at least 3");
        Rng rng(seed ^ std::hash<std::string>{}(key.first + "/" + key.second));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
        const std::size_t n = idx.size();
        const std::size_t n_train = static_cast<std::size_t>(std::floor(n * train_frac));
        const std::size_t n_val = static_cast<std::size_t>(std::floor(n * val_frac));
        for (std::size_t i = 0; i < n; ++i)
            out[idx[i]] = (i < n_train) ? Split::train
                                        : (i < n_train + n_val ? Split::val : Split::test);
    }
    return out;
}

// A fixed-length slice reference into a shared source buffer.
struct Segment {
    std::shared_ptr<const AudioBuffer> buffer;
    std::int64_t offset = 0;
    std::int64_t length = 0;
    Role role = Role::clean;
    std::string tone_label;
    Split split = Split::train;

    const float* samples() const { return buffer->samples.data() + offset; }
};

using SegmentPool = std::vector<Segment>;

struct PairedDataset {
    // clean[i] and rendered[i] share a source position (sample-aligned).
    std::vector<Segment> clean, rendered;
    std::int64_t segment_length = 0;

    std::size_t size() const { return clean.size(); }
    bool paired() const { return !clean.empty() && clean.size() == rendered.size(); }
};

struct LoadedSource {
    ManifestEntry entry;
    Split split;
    std::shared_ptr<const AudioBuffer> buffer;
    std::string stem;
};

inline std::string path_stem(const std::string& path) {
    std::size_t slash = path.find_last_of("/\\");
    std::string name = (slash == std::string::npos) ? path : path.substr(slash + 1);
    std::size_t dot = name.find_last_of('.');
    return (dot == std::string::npos) ? name : name.substr(0, dot);
}

inline std::vector<LoadedSource> load_sources(const std::vector<ManifestEntry>& entries,
                                              const std::vector<Split>& splits) {
    if (entries.size() != splits.size()) throw DataError("load_sources: split list mismatch");
    std::vector<LoadedSource> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        LoadedSource s;
        s.entry = entries[i];
        s.split = splits[i];
        s.buffer = std::make_shared<AudioBuffer>(load_audio(entries[i].path));
        s.stem = path_stem(entries[i].path);
        out.push_back(std::move(s));
    }
    return out;
}

inline SegmentPool segment_sources(const std::vector<LoadedSource>& sources,
                                   std::int64_t segment_length, Role role, Split split,
                                   const std::string& tone_label = "") {
    SegmentPool pool;
    for (const auto& s : sources) {
        if (s.entry.role != role || s.split != split) continue;
        if (!tone_label.empty() && s.entry.tone_label != tone_label) continue;
        for (std::int64_t off :
             segment_offsets(static_cast<std::int64_t>(s.buffer->samples.size()), segment_length)) {
            Segment seg;
            seg.buffer = s.buffer;
            seg.offset = off;
            seg.length = segment_length;
            seg.role = role;
            seg.tone_label = s.entry.tone_label;
            seg.split = split;
            pool.push_back(std::move(seg));
        }
    }
    return pool;
}

// Pairs clean and rendered sources by file stem within a tone, then pairs
// their segments index-by-index so each pair is sample-aligned.
inline PairedDataset pair_sources(const std::vector<LoadedSource>& sources,
                                  std::int64_t segment_length, Split split,
                                  const std::string& tone_label) {
    std::map<std::string, const LoadedSource*> clean_by_stem;
    for (const auto& s : sources)
        if (s.entry.role == Role::clean && s.split == split) {
            if (clean_by_stem.count(s.stem))
                throw DataError("pairing error: duplicate clean stem '" + s.stem + "'");
            clean_by_stem[s.stem] = &s;
        }
    PairedDataset out;
    out.segment_length = segment_length;
    for (const auto& s : sources) {
        if (s.entry.role != Role::rendered || s.split != split) continue;
        if (!tone_label.empty() && s.entry.tone_label != tone_label) continue;
        auto it = clean_by_stem.find(s.stem);
        if (it == clean_by_stem.end())
            throw DataError("pairing error: rendered '" + s.entry.path +
                            "' has no clean counterpart with stem '" + s.stem + "'");
        const LoadedSource& c = *it->second;
        const std::int64_t n = std::min(static_cast<std::int64_t>(c.buffer->samples.size()),
                                        static_cast<std::int64_t>(s.buffer->samples.size()));
        for (std::int64_t off : segment_offsets(n, segment_length)) {
            Segment cs, rs;
            cs.buffer = c.buffer;
            rs.buffer = s.buffer;
            cs.offset = rs.offset = off;
            cs.length = rs.length = segment_length;
            cs.role = Role::clean;
            rs.role = Role::rendered;
            cs.tone_label = c.entry.tone_label;
            rs.tone_label = s.entry.tone_label;
            cs.split = rs.split = split;
            out.clean.push_back(std::move(cs));
            out.rendered.push_back(std::move(rs));
        }
    }
    return out;
}

inline Tensor<float> segments_to_tensor(const std::vector<const Segment*>& segs) {
    if (segs.empty()) throw DataError("batch: no segments selected");
    const std::int64_t L = segs[0]->length;
    Tensor<float> t({static_cast<std::int64_t>(segs.size()), 1, L});
    for (std::size_t b = 0; b < segs.size(); ++b) {
        if (segs[b]->length != L) throw DataError("batch: inconsistent segment lengths");
        std::copy(segs[b]->samples(), segs[b]->samples() + L, &t.at(static_cast<std::int64_t>(b), 0, 0));
    }
    return t;
}

struct UnpairedBatch {
    Tensor<float> clean, rendered;
};

// Clean items drawn uniformly over the merged clean pools (weighted by pool
// size), rendered items drawn independently; no alignment between the two.
inline UnpairedBatch make_unpaired_batch(const std::vector<const SegmentPool*>& clean_pools,
                                         const SegmentPool& rendered_pool, std::int64_t batch_size,
                                         Rng& rng, bool replacement = true) {
    std::vector<const Segment*> merged;
    for (const SegmentPool* p : clean_pools)
        for (const Segment& s : *p) merged.push_back(&s);
    if (merged.empty() || rendered_pool.empty())
        throw DataError("batching error: empty clean or rendered pool");
    if (batch_size <= 0) throw DataError("batching error: non-positive batch size");

    auto draw = [&](std::size_t n) {
        if (!replacement && static_cast<std::size_t>(batch_size) > n)
            throw DataError("batching error: batch_size " + std::to_string(batch_size) +
                            " exceeds pool size " + std::to_string(n) +
                            " with replacement disabled");
        std::vector<std::size_t> idx;
        std::set<std::size_t> used;
        while (idx.size() < static_cast<std::size_t>(batch_size)) {
            const std::size_t i = rng.uniform_index(n);
            if (!replacement && used.count(i)) continue;
            used.insert(i);
            idx.push_back(i);
        }
        return idx;
    };

    UnpairedBatch out;
    std::vector<const Segment*> picks;
    for (std::size_t i : draw(merged.size())) picks.push_back(merged[i]);
    out.clean = segments_to_tensor(picks);
    picks.clear();
    for (std::size_t i : draw(rendered_pool.size())) picks.push_back(&rendered_pool[i]);
    out.rendered = segments_to_tensor(picks);
    return out;
}

// Sample-aligned batch from a paired dataset.
inline UnpairedBatch make_paired_batch(const PairedDataset& paired, std::int64_t batch_size,
                                       Rng& rng, bool replacement = true) {
    if (!paired.paired()) throw DataError("pairing error: dataset has no clean<->rendered bijection");
    if (batch_size <= 0) throw DataError("batching error: non-positive batch size");
    if (!replacement && static_cast<std::size_t>(batch_size) > paired.size())
        throw DataError("batching error: batch_size exceeds paired pool with replacement disabled");
    std::vector<const Segment*> cs, rs;
    std::set<std::size_t> used;
    while (cs.size() < static_cast<std::size_t>(batch_size)) {
        const std::size_t i = rng.uniform_index(paired.size());
        if (!replacement && used.count(i)) continue;
        used.insert(i);
        cs.push_back(&paired.clean[i]);
        rs.push_back(&paired.rendered[i]);
    }
    UnpairedBatch out;
    out.clean = segments_to_tensor(cs);
    out.rendered = segments_to_tensor(rs);
    return out;
}

}  // namespace ampgan
