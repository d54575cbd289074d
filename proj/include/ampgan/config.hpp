#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampgan/errors.hpp"
#include "ampgan/generator.hpp"
#include "ampgan/mel.hpp"
#include "ampgan/trainer.hpp"

namespace ampgan {

// Complete run configuration. Every field has a default; unknown keys are
// rejected with a nearest-key suggestion; the resolved form is written next
// to each run's outputs.
struct RunConfig {
    TrainConfig train;
    GeneratorConfig generator;
    MelConfig mel;
    std::string manifest;              // dataset manifest (clean + rendered)
    std::string extra_clean_manifest;  // second clean pool for the "both" setting
    std::string target_tone;           // rendered tone to model; inferred when unique
    std::uint64_t split_seed = 0;
    std::string out_dir = "run";
};

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                               prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline void check_keys(const nlohmann::json& obj, const std::vector<std::string>& known,
                       const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) != known.end()) continue;
        std::string nearest = known.front();
        std::size_t best = edit_distance(key, nearest);
        for (const auto& k : known) {
            const std::size_t d = edit_distance(key, k);
            if (d < best) {
                best = d;
                nearest = k;
            }
        }
        throw ConfigError("config: unknown key '" + where + "." + key + "'; nearest valid key is '" +
                          nearest + "'");
    }
}

template <typename T>
inline void get_if(const nlohmann::json& obj, const char* key, T& dst) {
    if (obj.contains(key)) dst = obj.at(key).get<T>();
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig cfg;
    detail::check_keys(j, {"mode", "discriminator_set", "generator", "mel", "train", "data",
                           "out_dir"},
                       "root");
    if (j.contains("mode")) {
        const std::string m = j.at("mode").get<std::string>();
        if (m == "adversarial")
            cfg.train.mode = TrainMode::adversarial;
        else if (m == "supervised")
            cfg.train.mode = TrainMode::supervised;
        else
            throw ConfigError("config: mode must be 'adversarial' or 'supervised', got '" + m + "'");
    }
    if (j.contains("discriminator_set")) {
        const std::string d = j.at("discriminator_set").get<std::string>();
        if (d == "msd_only")
            cfg.train.discriminator_set = DiscriminatorSet::msd_only;
        else if (d == "msd_mpd")
            cfg.train.discriminator_set = DiscriminatorSet::msd_mpd;
        else
            throw ConfigError("config: discriminator_set must be 'msd_only' or 'msd_mpd'");
    }
    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        detail::check_keys(g,
                           {"stacks", "layers_per_stack", "kernel_size", "dilation_growth",
                            "residual_channels", "input_channels", "output_channels"},
                           "generator");
        detail::get_if(g, "stacks", cfg.generator.stacks);
        detail::get_if(g, "layers_per_stack", cfg.generator.layers_per_stack);
        detail::get_if(g, "kernel_size", cfg.generator.kernel_size);
        detail::get_if(g, "dilation_growth", cfg.generator.dilation_growth);
        detail::get_if(g, "residual_channels", cfg.generator.residual_channels);
        detail::get_if(g, "input_channels", cfg.generator.input_channels);
        detail::get_if(g, "output_channels", cfg.generator.output_channels);
    }
    if (j.contains("mel")) {
        const auto& m = j.at("mel");
        detail::check_keys(m, {"fft_size", "hop", "n_mels", "sample_rate", "fmin", "fmax"}, "mel");
        detail::get_if(m, "fft_size", cfg.mel.fft_size);
        detail::get_if(m, "hop", cfg.mel.hop);
        detail::get_if(m, "n_mels", cfg.mel.n_mels);
        detail::get_if(m, "sample_rate", cfg.mel.sample_rate);
        detail::get_if(m, "fmin", cfg.mel.fmin);
        detail::get_if(m, "fmax", cfg.mel.fmax);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::check_keys(t,
                           {"gen_lr", "disc_lr", "weight_decay", "batch_size", "max_steps",
                            "val_interval", "seed", "clean_pool_spec", "segment_length",
                            "replacement", "aux_mel_weight", "lr_decay"},
                           "train");
        detail::get_if(t, "gen_lr", cfg.train.gen_lr);
        detail::get_if(t, "disc_lr", cfg.train.disc_lr);
        detail::get_if(t, "weight_decay", cfg.train.weight_decay);
        detail::get_if(t, "batch_size", cfg.train.batch_size);
        detail::get_if(t, "max_steps", cfg.train.max_steps);
        detail::get_if(t, "val_interval", cfg.train.val_interval);
        detail::get_if(t, "seed", cfg.train.seed);
        if (t.contains("clean_pool_spec")) {
            const std::string c = t.at("clean_pool_spec").get<std::string>();
            if (c == "single")
                cfg.train.clean_pool_both = false;
            else if (c == "both")
                cfg.train.clean_pool_both = true;
            else
                throw ConfigError("config: clean_pool_spec must be 'single' or 'both'");
        }
        detail::get_if(t, "segment_length", cfg.train.segment_length);
        detail::get_if(t, "replacement", cfg.train.replacement);
        detail::get_if(t, "aux_mel_weight", cfg.train.aux_mel_weight);
        detail::get_if(t, "lr_decay", cfg.train.lr_decay);
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::check_keys(d, {"manifest", "extra_clean_manifest", "target_tone", "split_seed"},
                           "data");
        detail::get_if(d, "manifest", cfg.manifest);
        detail::get_if(d, "extra_clean_manifest", cfg.extra_clean_manifest);
        detail::get_if(d, "target_tone", cfg.target_tone);
        detail::get_if(d, "split_seed", cfg.split_seed);
    }
    detail::get_if(j, "out_dir", cfg.out_dir);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

inline nlohmann::json resolved_config_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["mode"] = cfg.train.mode == TrainMode::adversarial ? "adversarial" : "supervised";
    j["discriminator_set"] =
        cfg.train.discriminator_set == DiscriminatorSet::msd_mpd ? "msd_mpd" : "msd_only";
    j["generator"] = {{"stacks", cfg.generator.stacks},
                      {"layers_per_stack", cfg.generator.layers_per_stack},
                      {"kernel_size", cfg.generator.kernel_size},
                      {"dilation_growth", cfg.generator.dilation_growth},
                      {"residual_channels", cfg.generator.residual_channels},
                      {"input_channels", cfg.generator.input_channels},
                      {"output_channels", cfg.generator.output_channels}};
    j["mel"] = {{"fft_size", cfg.mel.fft_size}, {"hop", cfg.mel.hop},
                {"n_mels", cfg.mel.n_mels},     {"sample_rate", cfg.mel.sample_rate},
                {"fmin", cfg.mel.fmin},         {"fmax", cfg.mel.fmax}};
    j["train"] = {{"gen_lr", cfg.train.gen_lr},
                  {"disc_lr", cfg.train.disc_lr},
                  {"weight_decay", cfg.train.weight_decay},
                  {"batch_size", cfg.train.batch_size},
                  {"max_steps", cfg.train.max_steps},
                  {"val_interval", cfg.train.val_interval},
                  {"seed", cfg.train.seed},
                  {"clean_pool_spec", cfg.train.clean_pool_both ? "both" : "single"},
                  {"segment_length", cfg.train.segment_length},
                  {"replacement", cfg.train.replacement},
                  {"aux_mel_weight", cfg.train.aux_mel_weight},
                  {"lr_decay", cfg.train.lr_decay}};
    j["data"] = {{"manifest", cfg.manifest},
                 {"extra_clean_manifest", cfg.extra_clean_manifest},
                 {"target_tone", cfg.target_tone},
                 {"split_seed", cfg.split_seed}};
    j["out_dir"] = cfg.out_dir;
    return j;
}

// FNV-1a over the canonical (sorted-key) resolved config dump.
inline std::string config_digest(const RunConfig& cfg) {
    const std::string text = resolved_config_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace ampgan
