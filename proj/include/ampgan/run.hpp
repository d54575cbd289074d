#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampgan/config.hpp"
#include "ampgan/dataset.hpp"
#include "ampgan/fad.hpp"
#include "ampgan/trainer.hpp"

namespace ampgan {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// normalize: write the -1 dB peak / -12 LUFS cache and a rewritten manifest.

struct NormalizeSummary {
    int processed = 0;
    int clip_clamped = 0;
    int failed = 0;
    std::string manifest_path;
};

inline NormalizeSummary normalize_command(const std::string& manifest_path,
                                          const std::string& out_dir, double peak_db = -1.0,
                                          double target_lufs = -12.0) {
    const auto entries = load_manifest(manifest_path);
    NormalizeSummary summary;
    std::vector<ManifestEntry> rewritten;
    for (const auto& e : entries) {
        try {
            AudioBuffer buf = load_audio(e.path);
            NormalizeResult norm = normalize_loudness(buf, peak_db, target_lufs);
            if (norm.clip_clamped) {
                ++summary.clip_clamped;
                std::cerr << "normalize: '" << e.path
                          << "': loudness gain clamped to unit peak\n";
            }
            const fs::path dir = fs::path(out_dir) / e.tone_label / role_name(e.role);
            fs::create_directories(dir);
            const std::string out_path = (dir / (buf.source_id + ".wav")).string();
            write_wav_f32(out_path, norm.buffer.samples, norm.buffer.sample_rate);
            rewritten.push_back({out_path, e.role, e.tone_label});
            ++summary.processed;
        } catch (const Error& err) {
            ++summary.failed;
            std::cerr << "normalize: skipping '" << e.path << "': " << err.what() << "\n";
        }
    }
    if (summary.processed == 0) throw DataError("normalize: no file could be processed");
    summary.manifest_path = (fs::path(out_dir) / "manifest.json").string();
    write_manifest(summary.manifest_path, rewritten);
    return summary;
}

// ---------------------------------------------------------------------------
// split: materialize per-split manifests.

inline void split_command(const std::string& manifest_path, std::uint64_t seed,
                          const std::string& out_dir, double train_frac = 0.8,
                          double val_frac = 0.1, double test_frac = 0.1) {
    const auto entries = load_manifest(manifest_path);
    const auto splits = split_sources(entries, seed, train_frac, val_frac, test_frac);
    fs::create_directories(out_dir);
    std::vector<ManifestEntry> per_split[3];
    for (std::size_t i = 0; i < entries.size(); ++i)
        per_split[static_cast<int>(splits[i])].push_back(entries[i]);
    write_manifest((fs::path(out_dir) / "train.json").string(), per_split[0]);
    write_manifest((fs::path(out_dir) / "val.json").string(), per_split[1]);
    write_manifest((fs::path(out_dir) / "test.json").string(), per_split[2]);
}

// ---------------------------------------------------------------------------
// train

inline std::string infer_target_tone(const std::vector<ManifestEntry>& entries,
                                     const std::string& requested) {
    if (!requested.empty()) return requested;
    std::set<std::string> tones;
    for (const auto& e : entries)
        if (e.role == Role::rendered) tones.insert(e.tone_label);
    if (tones.empty()) throw DataError("train: manifest has no rendered audio");
    if (tones.size() > 1)
        throw ConfigError("train: several rendered tones in manifest; set data.target_tone");
    return *tones.begin();
}

inline TrainDatasets build_datasets(const RunConfig& cfg, const std::string& target_tone) {
    const auto entries = load_manifest(cfg.manifest);
    const auto splits = split_sources(entries, cfg.split_seed);
    const auto sources = load_sources(entries, splits);
    const std::int64_t L = cfg.train.segment_length;

    TrainDatasets data;
    data.paired_val = pair_sources(sources, L, Split::val, target_tone);
    if (cfg.train.mode == TrainMode::supervised) {
        data.paired_train = pair_sources(sources, L, Split::train, target_tone);
    } else {
        data.clean_pools.push_back(segment_sources(sources, L, Role::clean, Split::train));
        data.rendered_pool = segment_sources(sources, L, Role::rendered, Split::train, target_tone);
        if (cfg.train.clean_pool_both) {
            if (cfg.extra_clean_manifest.empty())
                throw ConfigError(
                    "train: clean_pool_spec 'both' needs data.extra_clean_manifest");
            const auto extra = load_manifest(cfg.extra_clean_manifest);
            const auto extra_splits = split_sources(extra, cfg.split_seed);
            const auto extra_sources = load_sources(extra, extra_splits);
            data.clean_pools.push_back(
                segment_sources(extra_sources, L, Role::clean, Split::train));
        }
    }
    return data;
}

struct TrainRunResult {
    TrainResult result;
    std::string run_dir;
};

inline TrainRunResult train_command(const RunConfig& cfg,
                                    const std::string& resume_checkpoint = "") {
    const std::string target_tone = infer_target_tone(load_manifest(cfg.manifest), cfg.target_tone);
    TrainDatasets data = build_datasets(cfg, target_tone);

    TrainState st = init_train_state(cfg.train, cfg.generator, config_digest(cfg));
    st.run_config_json = resolved_config_json(cfg);
    st.run_dir = cfg.out_dir;
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream f(fs::path(cfg.out_dir) / "config.resolved.json");
        f << resolved_config_json(cfg).dump(2) << "\n";
    }
    if (!resume_checkpoint.empty()) load_checkpoint(st, resume_checkpoint);

    TrainRunResult out;
    out.run_dir = cfg.out_dir;
    out.result = train(st, data, cfg.mel);
    return out;
}

// ---------------------------------------------------------------------------
// render

inline Generator<float> generator_from_checkpoint(const std::string& path, RunConfig* cfg_out) {
    CheckpointFile ck = read_checkpoint_file(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ck.meta_json);
    } catch (const std::exception& e) {
        throw DataError("checkpoint: corrupt metadata in '" + path + "': " + e.what());
    }
    if (!meta.contains("config"))
        throw DataError("checkpoint: '" + path + "' carries no embedded config");
    RunConfig cfg = parse_run_config(meta.at("config"));
    if (cfg_out) *cfg_out = cfg;

    TrainState st = init_train_state(cfg.train, cfg.generator, config_digest(cfg));
    st.run_config_json = meta.at("config");
    load_checkpoint(st, path);
    return std::move(st.gen);
}

inline void render_command(const std::string& checkpoint, const std::string& in_wav,
                           const std::string& out_wav, std::int64_t chunk_len = 65536) {
    Generator<float> gen = generator_from_checkpoint(checkpoint, nullptr);
    AudioBuffer in = load_audio(in_wav);
    std::vector<float> rendered = render_chunked(gen, in.samples, chunk_len);
    if (!out_wav.empty()) {
        const fs::path parent = fs::path(out_wav).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        write_wav_f32(out_wav, rendered, in.sample_rate);
    }
}

// ---------------------------------------------------------------------------
// eval

struct FileMetrics {
    std::string file;
    double esr = 0.0;
    double mel_l1 = 0.0;
};

struct EvalReport {
    std::vector<FileMetrics> per_file;
    double mean_esr = 0.0;
    double mean_mel_l1 = 0.0;
    std::optional<double> fad;
    std::string fad_model;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["per_file"] = nlohmann::json::array();
        for (const auto& f : per_file)
            j["per_file"].push_back({{"file", f.file}, {"ESR", f.esr}, {"L1_mel", f.mel_l1}});
        j["aggregate"] = {{"ESR", mean_esr}, {"L1_mel", mean_mel_l1}};
        if (fad) {
            j["aggregate"]["FAD"] = *fad;
            j["aggregate"]["fad_model"] = fad_model;
        }
        return j;
    }
};

// Paired evaluation of a checkpoint: renders each clean test file, reports
// per-file ESR and mel-L1 plus corpus-level FAD when an embedder is given.
inline EvalReport eval_command(const std::string& checkpoint, const std::string& manifest_path,
                               const MelConfig& mel_cfg, bool preemph = true,
                               const Embedder* embedder = nullptr) {
    Generator<float> gen = generator_from_checkpoint(checkpoint, nullptr);
    const auto entries = load_manifest(manifest_path);

    std::map<std::string, const ManifestEntry*> clean_by_stem;
    for (const auto& e : entries)
        if (e.role == Role::clean) clean_by_stem[path_stem(e.path)] = &e;

    EvalReport report;
    std::vector<AudioBuffer> reference, generated;
    for (const auto& e : entries) {
        if (e.role != Role::rendered) continue;
        auto it = clean_by_stem.find(path_stem(e.path));
        if (it == clean_by_stem.end())
            throw DataError("eval: pairing error: no clean counterpart for '" + e.path + "'");
        AudioBuffer clean = load_audio(it->second->path);
        AudioBuffer target = load_audio(e.path);
        const std::size_t n = std::min(clean.samples.size(), target.samples.size());
        clean.samples.resize(n);
        target.samples.resize(n);
        std::vector<float> pred = render_chunked(gen, clean.samples);

        FileMetrics m;
        m.file = e.path;
        m.esr = esr(target.samples, pred, preemph);
        m.mel_l1 = mel_l1(target.samples, pred, mel_cfg);
        report.per_file.push_back(m);

        if (embedder) {
            reference.push_back(target);
            AudioBuffer gen_buf;
            gen_buf.samples = std::move(pred);
            gen_buf.sample_rate = clean.sample_rate;
            gen_buf.source_id = target.source_id + ".gen";
            generated.push_back(std::move(gen_buf));
        }
    }
    if (report.per_file.empty()) throw DataError("eval: manifest has no rendered files");
    for (const auto& f : report.per_file) {
        report.mean_esr += f.esr;
        report.mean_mel_l1 += f.mel_l1;
    }
    report.mean_esr /= static_cast<double>(report.per_file.size());
    report.mean_mel_l1 /= static_cast<double>(report.per_file.size());

    if (embedder) {
        report.fad = frechet_distance(embed_for_fad(reference, *embedder),
                                      embed_for_fad(generated, *embedder));
        report.fad_model = embedder->model_id;
    }
    return report;
}

}  // namespace ampgan
