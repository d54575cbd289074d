// Command-line surface: normalize, split, train, render, eval.
// Exit codes: 0 success, 2 config error, 3 data error, 4 divergence.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ampgan/run.hpp"

namespace fs = std::filesystem;

namespace {

std::string with_root(const std::string& root, const std::string& path) {
    if (root.empty() || path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(root) / path).string();
}

// "--set a.b=value" overrides on top of the config file.
void apply_override(nlohmann::json& j, const std::string& kv) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
        throw ampgan::ConfigError("override '" + kv + "' is not of the form key.path=value");
    const std::string value = kv.substr(eq + 1);
    nlohmann::json* node = &j;
    std::string keypath = kv.substr(0, eq);
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = keypath.find('.', pos);
        const std::string key = keypath.substr(pos, dot - pos);
        if (dot == std::string::npos) {
            nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
            break;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

int run(int argc, char** argv) {
    CLI::App app{"ampgan: unsupervised guitar amplifier modeling toolkit"};
    app.require_subcommand(1);
    std::string root;
    app.add_option("--root", root, "Prefix applied to relative paths");

    // normalize
    auto* norm = app.add_subcommand("normalize", "Loudness-normalize a corpus into a cache dir");
    std::string norm_manifest, norm_out;
    double peak_db = -1.0, target_lufs = -12.0;
    norm->add_option("--manifest", norm_manifest, "Input manifest JSON")->required();
    norm->add_option("--out", norm_out, "Cache directory")->required();
    norm->add_option("--peak-db", peak_db, "Stage-1 sample-peak target in dBFS");
    norm->add_option("--target-lufs", target_lufs, "Stage-2 integrated loudness target");

    // split
    auto* split = app.add_subcommand("split", "Write train/val/test manifests");
    std::string split_manifest, split_out;
    std::uint64_t split_seed = 0;
    std::vector<double> ratios{0.8, 0.1, 0.1};
    split->add_option("--manifest", split_manifest, "Input manifest JSON")->required();
    split->add_option("--out", split_out, "Output directory")->required();
    split->add_option("--seed", split_seed, "Shuffle seed");
    split->add_option("--ratios", ratios, "train val test fractions")->expected(3);

    // train
    auto* train = app.add_subcommand("train", "Run a training loop from a config file");
    std::string train_config, train_out, resume;
    std::vector<std::string> overrides;
    train->add_option("--config", train_config, "Run configuration JSON")->required();
    train->add_option("--out", train_out, "Override out_dir");
    train->add_option("--resume", resume, "Checkpoint to resume from");
    train->add_option("--set", overrides, "key.path=value config overrides");

    // render
    auto* render = app.add_subcommand("render", "Stream a WAV file through a trained generator");
    std::string render_ckpt, render_in, render_out;
    std::int64_t chunk = 65536;
    render->add_option("--checkpoint", render_ckpt, "Checkpoint path")->required();
    render->add_option("--in", render_in, "Input WAV")->required();
    render->add_option("--out", render_out, "Output WAV")->required();
    render->add_option("--chunk", chunk, "Streaming chunk length in samples");

    // eval
    auto* eval = app.add_subcommand("eval", "Paired-set metrics for a checkpoint");
    std::string eval_ckpt, eval_manifest, eval_report, fad_mode = "none";
    bool no_preemph = false;
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
    eval->add_option("--manifest", eval_manifest, "Paired test manifest")->required();
    eval->add_option("--out", eval_report, "Report JSON path");
    eval->add_option("--fad", fad_mode, "FAD embedder: 'toy' or 'none'");
    eval->add_flag("--no-preemph", no_preemph, "Disable ESR pre-emphasis");

    CLI11_PARSE(app, argc, argv);

    if (norm->parsed()) {
        auto summary = ampgan::normalize_command(with_root(root, norm_manifest),
                                                 with_root(root, norm_out), peak_db, target_lufs);
        std::printf("normalized %d file(s), %d clip-clamped, %d failed -> %s\n",
                    summary.processed, summary.clip_clamped, summary.failed,
                    summary.manifest_path.c_str());
        return summary.failed == 0 ? 0 : 3;
    }
    if (split->parsed()) {
        ampgan::split_command(with_root(root, split_manifest), split_seed,
                              with_root(root, split_out), ratios[0], ratios[1], ratios[2]);
        std::printf("split manifests written to %s\n", with_root(root, split_out).c_str());
        return 0;
    }
    if (train->parsed()) {
        std::ifstream f(with_root(root, train_config));
        if (!f) throw ampgan::ConfigError("config: cannot open '" + train_config + "'");
        nlohmann::json j;
        try {
            f >> j;
        } catch (const std::exception& e) {
            throw ampgan::ConfigError("config: invalid JSON: " + std::string(e.what()));
        }
        for (const auto& kv : overrides) apply_override(j, kv);
        ampgan::RunConfig cfg = ampgan::parse_run_config(j);
        if (!train_out.empty()) cfg.out_dir = train_out;
        cfg.out_dir = with_root(root, cfg.out_dir);
        cfg.manifest = with_root(root, cfg.manifest);
        if (!cfg.extra_clean_manifest.empty())
            cfg.extra_clean_manifest = with_root(root, cfg.extra_clean_manifest);
        auto out = ampgan::train_command(cfg, with_root(root, resume));
        std::printf("training done: last=%s best=%s\n", out.result.last_checkpoint.c_str(),
                    out.result.best_checkpoint.c_str());
        return 0;
    }
    if (render->parsed()) {
        ampgan::render_command(with_root(root, render_ckpt), with_root(root, render_in),
                               with_root(root, render_out), chunk);
        std::printf("rendered %s -> %s\n", render_in.c_str(), render_out.c_str());
        return 0;
    }
    if (eval->parsed()) {
        ampgan::MelConfig mel_cfg;
        std::optional<ampgan::Embedder> embedder;
        if (fad_mode == "toy")
            embedder = ampgan::toy_embedder();
        else if (fad_mode != "none")
            throw ampgan::ConfigError("eval: --fad must be 'toy' or 'none'");
        auto report =
            ampgan::eval_command(with_root(root, eval_ckpt), with_root(root, eval_manifest),
                                 mel_cfg, !no_preemph, embedder ? &*embedder : nullptr);
        std::printf("%-40s %10s %10s\n", "file", "L1_mel", "ESR");
        for (const auto& fm : report.per_file)
            std::printf("%-40s %10.4f %10.4f\n", fm.file.c_str(), fm.mel_l1, fm.esr);
        std::printf("%-40s %10.4f %10.4f", "mean", report.mean_mel_l1, report.mean_esr);
        if (report.fad)
            std::printf("   FAD %.4f (%s)", *report.fad, report.fad_model.c_str());
        std::printf("\n");
        if (!eval_report.empty()) {
            std::ofstream out(with_root(root, eval_report));
            out << report.to_json().dump(2) << "\n";
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ampgan::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (!e.last_good_checkpoint.empty())
            std::cerr << "last good checkpoint: " << e.last_good_checkpoint << "\n";
        return 4;
    } catch (const ampgan::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ampgan::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
