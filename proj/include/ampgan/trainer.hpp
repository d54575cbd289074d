#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampgan/checkpoint.hpp"
#include "ampgan/dataset.hpp"
#include "ampgan/discriminator.hpp"
#include "ampgan/generator.hpp"
#include "ampgan/losses.hpp"
#include "ampgan/mel.hpp"
#include "ampgan/nn/adamw.hpp"
#include "ampgan/rng.hpp"

namespace ampgan {

enum class TrainMode { adversarial, supervised };
enum class DiscriminatorSet { msd_only, msd_mpd };

struct TrainConfig {
    TrainMode mode = TrainMode::adversarial;
    DiscriminatorSet discriminator_set = DiscriminatorSet::msd_mpd;
    double gen_lr = 5e-5;
    double disc_lr = 1e-5;
    double weight_decay = 0.01;
    std::int64_t batch_size = 8;
    std::int64_t max_steps = 200000;
    std::int64_t val_interval = 500;
    std::uint64_t seed = 0;
    bool clean_pool_both = false;   // "both": merge the extra clean pool
    std::int64_t segment_length = 88200;
    bool replacement = true;
    double aux_mel_weight = 0.0;    // supervised-only auxiliary mel loss
    double lr_decay = 1.0;          // per-step multiplicative decay; 1 = constant

    void validate() const {
        if (gen_lr < 0 || disc_lr < 0) throw ConfigError("train: learning rates must be >= 0");
        if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
        if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
        if (val_interval <= 0) throw ConfigError("train: val_interval must be positive");
        if (segment_length <= 0) throw ConfigError("train: segment_length must be positive");
        if (lr_decay <= 0 || lr_decay > 1) throw ConfigError("train: lr_decay must be in (0, 1]");
        if (aux_mel_weight != 0.0 && mode != TrainMode::supervised)
            throw ConfigError("train: the auxiliary mel loss needs paired data; "
                              "it is disabled in unpaired (adversarial) mode");
    }
};

struct TrainDatasets {
    std::vector<SegmentPool> clean_pools;  // adversarial input pools
    SegmentPool rendered_pool;             // adversarial target pool
    PairedDataset paired_train;            // supervised mode
    PairedDataset paired_val;              // validation (always paired)
};

struct BestRecord {
    std::string metric = "val_mel_l1";
    double value = 0.0;
    std::int64_t step = -1;
    bool valid = false;
};

struct StepLog {
    std::int64_t step = 0;
    double g_loss = 0.0;
    double d_loss = 0.0;
    std::vector<double> real_means, fake_means;  // per-sub logit means
};

struct ValRecord {
    std::int64_t step = 0;
    double esr = 0.0;
    double mel_l1 = 0.0;
};

struct TrainState {
    TrainConfig cfg;
    std::string config_digest;
    std::int64_t step = 0;
    Generator<float> gen;
    std::optional<DiscriminatorEnsemble<float>> disc;
    nn::AdamW<float> g_opt, d_opt;
    Rng data_rng;
    BestRecord best;
    nlohmann::json run_config_json;  // resolved config, embedded in checkpoints
    std::string run_dir;             // not serialized; divergence dumps land here
};

inline TrainState init_train_state(const TrainConfig& cfg, const GeneratorConfig& gen_cfg,
                                   const std::string& config_digest) {
    cfg.validate();
    TrainState st;
    st.cfg = cfg;
    st.config_digest = config_digest;
    Rng init_rng(cfg.seed);
    st.gen = Generator<float>::build(gen_cfg, init_rng);
    if (cfg.mode == TrainMode::adversarial)
        st.disc = DiscriminatorEnsemble<float>::build(
            init_rng, cfg.discriminator_set == DiscriminatorSet::msd_mpd);
    st.g_opt.lr = cfg.gen_lr;
    st.g_opt.weight_decay = cfg.weight_decay;
    st.d_opt.lr = cfg.disc_lr;
    st.d_opt.weight_decay = cfg.weight_decay;
    st.data_rng = Rng(cfg.seed ^ 0xda7a5eedULL);
    return st;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

inline void save_checkpoint(TrainState& st, const std::string& path) {
    CheckpointFile ck;
    auto add_params = [&](std::vector<nn::ParamRef<float>> params) {
        for (auto& p : params) ck.blobs[p.name] = *p.value;
        return params;
    };
    auto g_params = add_params(st.gen.params());
    st.g_opt.ensure_moments(g_params);
    for (std::size_t i = 0; i < g_params.size(); ++i) {
        ck.blobs[g_params[i].name + "#m"] = st.g_opt.m[i];
        ck.blobs[g_params[i].name + "#v"] = st.g_opt.v[i];
    }
    if (st.disc) {
        auto d_params = add_params(st.disc->params());
        st.d_opt.ensure_moments(d_params);
        for (std::size_t i = 0; i < d_params.size(); ++i) {
            ck.blobs[d_params[i].name + "#m"] = st.d_opt.m[i];
            ck.blobs[d_params[i].name + "#v"] = st.d_opt.v[i];
        }
        for (auto& s : st.disc->states()) ck.blobs[s.name] = *s.value;
    }

    nlohmann::json meta;
    meta["config_digest"] = st.config_digest;
    meta["config"] = st.run_config_json;
    meta["step"] = st.step;
    meta["adam_t_gen"] = st.g_opt.t;
    meta["adam_t_disc"] = st.d_opt.t;
    meta["rng"] = st.data_rng.serialize();
    meta["best"] = {{"metric", st.best.metric},
                    {"value", st.best.value},
                    {"step", st.best.step},
                    {"valid", st.best.valid}};
    ck.meta_json = meta.dump();
    write_checkpoint_file(path, ck);
}

// Restores parameters, optimizer moments, normalization state, counters and
// the sampler RNG into a freshly initialized state. The stored config digest
// must match.
inline void load_checkpoint(TrainState& st, const std::string& path) {
    CheckpointFile ck = read_checkpoint_file(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ck.meta_json);
    } catch (const std::exception& e) {
        throw DataError("checkpoint: corrupt metadata block in '" + path + "': " + e.what());
    }
    const std::string stored_digest = meta.at("config_digest").get<std::string>();
    if (stored_digest != st.config_digest)
        throw ConfigError("checkpoint: config digest mismatch: checkpoint has " + stored_digest +
                          ", runtime config has " + st.config_digest);

    auto restore = [&](const std::string& name, std::vector<float>& dst) {
        auto it = ck.blobs.find(name);
        if (it == ck.blobs.end())
            throw DataError("checkpoint: missing blob '" + name + "' in '" + path + "'");
        if (it->second.size() != dst.size())
            throw DataError("checkpoint: blob '" + name + "' has " +
                            std::to_string(it->second.size()) + " values, expected " +
                            std::to_string(dst.size()));
        dst = it->second;
    };

    auto g_params = st.gen.params();
    st.g_opt.ensure_moments(g_params);
    for (std::size_t i = 0; i < g_params.size(); ++i) {
        restore(g_params[i].name, *g_params[i].value);
        restore(g_params[i].name + "#m", st.g_opt.m[i]);
        restore(g_params[i].name + "#v", st.g_opt.v[i]);
    }
    if (st.disc) {
        auto d_params = st.disc->params();
        st.d_opt.ensure_moments(d_params);
        for (std::size_t i = 0; i < d_params.size(); ++i) {
            restore(d_params[i].name, *d_params[i].value);
            restore(d_params[i].name + "#m", st.d_opt.m[i]);
            restore(d_params[i].name + "#v", st.d_opt.v[i]);
        }
        for (auto& s : st.disc->states()) restore(s.name, *s.value);
    }
    st.step = meta.at("step").get<std::int64_t>();
    if (meta.contains("config")) st.run_config_json = meta.at("config");
    st.g_opt.t = meta.at("adam_t_gen").get<std::int64_t>();
    st.d_opt.t = meta.at("adam_t_disc").get<std::int64_t>();
    st.data_rng = Rng::deserialize(meta.at("rng").get<std::string>());
    const auto& best = meta.at("best");
    st.best.metric = best.at("metric").get<std::string>();
    st.best.value = best.at("value").get<double>();
    st.best.step = best.at("step").get<std::int64_t>();
    st.best.valid = best.at("valid").get<bool>();
}

// ---------------------------------------------------------------------------
// Steps

namespace detail {

inline void dump_divergence(TrainState& st, const std::string& what, double value) {
    std::string path;
    if (!st.run_dir.empty()) {
        path = st.run_dir + "/diverged.ckpt";
        save_checkpoint(st, path);
    }
    throw DivergenceError("divergence: " + what + " is " + std::to_string(value) + " at step " +
                              std::to_string(st.step),
                          path);
}

template <typename T>
inline std::vector<T> row(const Tensor<T>& t, std::int64_t b) {
    return std::vector<T>(&t.at(b, 0, 0), &t.at(b, 0, 0) + t.dim(2));
}

}  // namespace detail

// Discriminator update on (real, G(clean)) with gradients blocked from G,
// then a generator update against fresh logits. Strict D-then-G alternation.
inline StepLog adversarial_step(TrainState& st, const Tensor<float>& clean_batch,
                                const Tensor<float>& rendered_batch) {
    if (st.cfg.mode != TrainMode::adversarial)
        throw ConfigError("adversarial_step: trainer is not in adversarial mode");
    if (!st.disc) throw ConfigError("adversarial_step: no discriminator built");
    StepLog log;
    log.step = st.step;

    // Phase 1: discriminator. The fake batch comes from an inference-only
    // generator pass, so no gradient can flow into G.
    st.disc->zero_grad();
    Tensor<float> fake = st.gen.forward_inference(clean_batch);
    LogitMaps<float> real_maps = st.disc->forward(rendered_batch, true);
    LogitMaps<float> fake_maps = st.disc->forward(fake, true);
    for (const auto& m : real_maps.maps) log.real_means.push_back(m.mean());
    for (const auto& m : fake_maps.maps) log.fake_means.push_back(m.mean());
    HingeDLoss<float> dl = hinge_d_loss(real_maps, fake_maps, true);
    log.d_loss = dl.value;
    if (!std::isfinite(dl.value)) detail::dump_divergence(st, "hinge discriminator loss", dl.value);
    st.disc->backward(dl.dfake, false, true);  // fake pass sits on top of the stack
    st.disc->backward(dl.dreal, false, true);
    auto d_params = st.disc->params();
    st.d_opt.step(d_params);

    // Phase 2: generator, against the updated discriminator.
    st.gen.zero_grad();
    Tensor<float> fake2 = st.gen.forward(clean_batch);
    LogitMaps<float> fake_maps2 = st.disc->forward(fake2, true);
    HingeGLoss<float> gl = hinge_g_loss(fake_maps2, true);
    log.g_loss = gl.value;
    if (!std::isfinite(gl.value)) {
        st.gen.drop_last_pass();
        st.disc->clear_cache();
        detail::dump_divergence(st, "hinge generator loss", gl.value);
    }
    Tensor<float> dfake = st.disc->backward(gl.dfake, true, false);
    st.gen.backward(dfake);
    auto g_params = st.gen.params();
    st.g_opt.step(g_params);
    st.disc->zero_grad();

    st.g_opt.lr *= st.cfg.lr_decay;
    st.d_opt.lr *= st.cfg.lr_decay;
    ++st.step;
    return log;
}

// Generator-only ESR step on an aligned batch (mean of per-item ESR,
// pre-emphasis on), plus the optional auxiliary mel term.
inline StepLog supervised_step(TrainState& st, const Tensor<float>& clean_batch,
                               const Tensor<float>& rendered_batch) {
    if (st.cfg.mode != TrainMode::supervised)
        throw ConfigError("supervised_step: trainer is not in supervised mode");
    StepLog log;
    log.step = st.step;

    st.gen.zero_grad();
    Tensor<float> y = st.gen.forward(clean_batch);
    const std::int64_t B = y.dim(0);
    Tensor<float> dy(y.shape);
    double loss = 0.0;
    for (std::int64_t b = 0; b < B; ++b) {
        const std::vector<float> target = detail::row(rendered_batch, b);
        const std::vector<float> pred = detail::row(y, b);
        loss += esr(target, pred, true) / static_cast<double>(B);
        std::vector<float> g = esr_backward(target, pred, true);
        for (std::int64_t t = 0; t < y.dim(2); ++t)
            dy.at(b, 0, t) += g[static_cast<std::size_t>(t)] / static_cast<float>(B);
        if (st.cfg.aux_mel_weight > 0.0) {
            loss += st.cfg.aux_mel_weight * mel_l1(target, pred, MelConfig{}) /
                    static_cast<double>(B);
            std::vector<float> gm = mel_l1_backward(target, pred, MelConfig{});
            const float w = static_cast<float>(st.cfg.aux_mel_weight / static_cast<double>(B));
            for (std::int64_t t = 0; t < y.dim(2); ++t)
                dy.at(b, 0, t) += w * gm[static_cast<std::size_t>(t)];
        }
    }
    log.g_loss = loss;
    if (!std::isfinite(loss)) {
        st.gen.drop_last_pass();
        detail::dump_divergence(st, "supervised loss", loss);
    }
    st.gen.backward(dy);
    auto g_params = st.gen.params();
    st.g_opt.step(g_params);

    st.g_opt.lr *= st.cfg.lr_decay;
    ++st.step;
    return log;
}

// Paired validation: render each clean segment, report mean ESR and mel-L1.
inline ValRecord validate(TrainState& st, const PairedDataset& val, const MelConfig& mel_cfg) {
    if (!val.paired()) throw DataError("validate: validation set is not paired");
    ValRecord rec;
    rec.step = st.step;
    for (std::size_t i = 0; i < val.size(); ++i) {
        Tensor<float> x({1, 1, val.segment_length});
        std::copy(val.clean[i].samples(), val.clean[i].samples() + val.segment_length,
                  &x.at(0, 0, 0));
        Tensor<float> y = st.gen.forward_inference(x);
        const std::vector<float> pred = detail::row(y, 0);
        const std::vector<float> target(val.rendered[i].samples(),
                                        val.rendered[i].samples() + val.segment_length);
        rec.esr += esr(target, pred, true);
        rec.mel_l1 += mel_l1(target, pred, mel_cfg);
    }
    rec.esr /= static_cast<double>(val.size());
    rec.mel_l1 /= static_cast<double>(val.size());
    return rec;
}

struct TrainResult {
    std::string last_checkpoint;
    std::string best_checkpoint;
    std::vector<ValRecord> history;
};

// Full loop: unpaired (or paired) batches, periodic paired validation,
// best-checkpoint tracking by validation mel-L1.
inline TrainResult train(TrainState& st, const TrainDatasets& data, const MelConfig& mel_cfg) {
    const TrainConfig& cfg = st.cfg;
    cfg.validate();
    if (cfg.mode == TrainMode::adversarial) {
        if (data.clean_pools.empty() || data.rendered_pool.empty())
            throw DataError("train: adversarial mode needs clean pool(s) and a rendered pool");
        if (!data.paired_val.paired())
            throw DataError("train: adversarial mode needs a paired validation set");
    } else if (!data.paired_train.paired()) {
        throw DataError("train: supervised mode needs a paired training set");
    }

    TrainResult result;
    std::ofstream log_stream;
    if (!st.run_dir.empty()) {
        std::filesystem::create_directories(st.run_dir);
        log_stream.open(st.run_dir + "/steps.jsonl", std::ios::app);
    }
    auto log_line = [&](const nlohmann::json& j) {
        if (log_stream.is_open()) log_stream << j.dump() << "\n";
    };

    std::vector<const SegmentPool*> clean_ptrs;
    for (const auto& p : data.clean_pools) clean_ptrs.push_back(&p);

    const std::string last_path =
        st.run_dir.empty() ? std::string() : st.run_dir + "/last.ckpt";
    const std::string best_path =
        st.run_dir.empty() ? std::string() : st.run_dir + "/best.ckpt";

    std::int64_t last_validated = -1;
    auto run_validation = [&]() {
        if (!data.paired_val.paired() || st.step == last_validated) return;
        last_validated = st.step;
        ValRecord rec = validate(st, data.paired_val, mel_cfg);
        result.history.push_back(rec);
        log_line({{"step", rec.step}, {"val_esr", rec.esr}, {"val_mel_l1", rec.mel_l1}});
        if (!st.best.valid || rec.mel_l1 < st.best.value) {
            st.best.valid = true;
            st.best.value = rec.mel_l1;
            st.best.step = rec.step;
            if (!best_path.empty()) save_checkpoint(st, best_path);
        }
        if (!last_path.empty()) save_checkpoint(st, last_path);
    };

    while (st.step < cfg.max_steps) {
        StepLog log;
        if (cfg.mode == TrainMode::adversarial) {
            UnpairedBatch batch = make_unpaired_batch(clean_ptrs, data.rendered_pool,
                                                      cfg.batch_size, st.data_rng, cfg.replacement);
            log = adversarial_step(st, batch.clean, batch.rendered);
            log_line({{"step", log.step},
                      {"d_loss", log.d_loss},
                      {"g_loss", log.g_loss},
                      {"real_means", log.real_means},
                      {"fake_means", log.fake_means}});
        } else {
            UnpairedBatch batch =
                make_paired_batch(data.paired_train, cfg.batch_size, st.data_rng, cfg.replacement);
            log = supervised_step(st, batch.clean, batch.rendered);
            log_line({{"step", log.step}, {"loss", log.g_loss}});
        }
        if (st.step % cfg.val_interval == 0 || st.step == cfg.max_steps) run_validation();
    }
    if (!last_path.empty()) {
        save_checkpoint(st, last_path);
        result.last_checkpoint = last_path;
        result.best_checkpoint = st.best.valid ? best_path : last_path;
    }
    return result;
}

}  // namespace ampgan
