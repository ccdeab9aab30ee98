#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stego/codec/latent_codec.hpp"
#include "stego/core/config.hpp"
#include "stego/core/errors.hpp"
#include "stego/harness/harness.hpp"
#include "stego/message/message_codec.hpp"
#include "stego/metrics/metrics.hpp"
#include "stego/nn/kernels.hpp"
#include "stego/train/dataset.hpp"
#include "stego/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace stego;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return kExitIo;
        case ErrorKind::Numeric: return kExitNumeric;
        default: return kExitUsage;
    }
}

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string checkpoint;
    std::string out_dir = ".";
    int workers = 1;
    std::vector<std::string> overrides;
    std::optional<int> blur_kernel, jpeg_quality;
    std::optional<double> blur_sigma, noise_mean, noise_sigma;
};

RunConfig resolve_config(const Globals& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
    for (const auto& kv : g.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail(ErrorKind::Usage, "--set expects key=value, got " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed) cfg.seed = *g.seed;
    if (g.blur_kernel) cfg.blur_kernel = *g.blur_kernel;
    if (g.blur_sigma) cfg.blur_sigma = *g.blur_sigma;
    if (g.noise_mean) cfg.noise_mean = *g.noise_mean;
    if (g.noise_sigma) cfg.noise_sigma = *g.noise_sigma;
    if (g.jpeg_quality) cfg.jpeg_quality = *g.jpeg_quality;
    cfg.validate();
    return cfg;
}

std::string require_checkpoint(const Globals& g) {
    if (g.checkpoint.empty()) fail(ErrorKind::Usage, "--checkpoint is required");
    return g.checkpoint;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent-space image steganography: training, embedding, extraction and evaluation"};
    app.fallthrough();
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "key = value run configuration file");
    app.add_option("--seed", g.seed, "overrides the configured seed");
    app.add_option("--checkpoint", g.checkpoint, "model or codec checkpoint");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--workers", g.workers, "OpenMP worker threads (1 = deterministic reference setting)");
    app.add_option("--set", g.overrides, "config override key=value (repeatable)");
    app.add_option("--blur_kernel", g.blur_kernel);
    app.add_option("--blur_sigma", g.blur_sigma);
    app.add_option("--noise_mean", g.noise_mean);
    app.add_option("--noise_sigma", g.noise_sigma);
    app.add_option("--jpeg_quality", g.jpeg_quality);

    // make-dataset
    auto* make = app.add_subcommand("make-dataset", "write procedurally generated images");
    int count = 2000;
    std::string size = "32x32", style = "smooth";
    make->add_option("--count", count);
    make->add_option("--size", size, "HxW");
    make->add_option("--style", style)->check(CLI::IsMember({"smooth", "textured"}));

    auto* pretrain = app.add_subcommand("pretrain-codec", "train and freeze the reference latent codec");
    std::string dataset;
    pretrain->add_option("--dataset", dataset, "image folder (default: config dataset_path)");

    auto* train_cmd = app.add_subcommand("train", "train the message encoder and decoder");
    train_cmd->add_option("--dataset", dataset);
    std::string codec_path;
    train_cmd->add_option("--codec", codec_path, "frozen codec checkpoint (default: config codec_path)");

    auto* embed = app.add_subcommand("embed", "hide a message in an image");
    std::string image, message_hex, out_path;
    embed->add_option("--image", image)->required();
    embed->add_option("--message", message_hex, "hex, MSB first")->required();
    embed->add_option("--out", out_path)->required();

    auto* extract = app.add_subcommand("extract", "recover a message from an image");
    extract->add_option("--image", image)->required();

    int per_image = 1;
    auto* evaluate = app.add_subcommand("evaluate", "cover-mode evaluation report");
    evaluate->add_option("--dataset", dataset, "image folder (default: config dataset_path)");
    evaluate->add_option("--messages-per-image", per_image);

    auto* robust = app.add_subcommand("robustness", "five-row robustness table");
    robust->add_option("--dataset", dataset, "image folder (default: config dataset_path)");
    robust->add_option("--messages-per-image", per_image);

    auto* sweep = app.add_subcommand("sweep", "train one run per grid point");
    std::string grid, eval_dataset;
    sweep->add_option("--grid", grid, "key=v1,v2;key2=v3,...")->required();
    sweep->add_option("--eval-dataset", eval_dataset, "evaluation images (default: config dataset_path)");
    sweep->add_option("--messages-per-image", per_image);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        nn::set_num_workers(g.workers);
        const fs::path out_dir = g.out_dir;

        if (make->parsed()) {
            const auto x = size.find('x');
            if (x == std::string::npos) fail(ErrorKind::Usage, "--size must be HxW");
            const int h = std::stoi(size.substr(0, x)), w = std::stoi(size.substr(x + 1));
            if (h <= 0 || w <= 0 || h % 8 || w % 8) fail(ErrorKind::Usage, "--size must be positive multiples of 8");
            train::write_procedural_dataset(out_dir, count, h, w, g.seed.value_or(0),
                                            style == "textured" ? train::ImageStyle::Textured : train::ImageStyle::Smooth);
            print_json({{"out_dir", out_dir.string()}, {"count", count}, {"size", size}, {"style", style}});
            return kExitOk;
        }

        if (pretrain->parsed()) {
            RunConfig cfg = resolve_config(g);
            if (!dataset.empty()) cfg.dataset_path = dataset;
            const auto data = train::load_dataset(cfg.dataset_path, cfg.image_height, cfg.image_width);
            codec::PretrainReport report;
            auto codec = codec::pretrain_reference_codec(data.images, cfg, &report, [](int step, double loss) {
                std::cerr << nlohmann::json{{"step", step}, {"mse", loss}}.dump() << std::endl;
            });
            const fs::path dst = g.checkpoint.empty() ? out_dir / "codec.ckpt" : fs::path(g.checkpoint);
            if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
            codec::save_codec(*codec, dst);
            print_json({{"checkpoint", dst.string()},
                        {"codec_id", codec->codec_id()},
                        {"param_hash", codec->parameter_hash()},
                        {"steps", report.steps},
                        {"final_train_mse", report.final_train_mse},
                        {"heldout_psnr", report.heldout_psnr},
                        {"heldout_count", report.heldout_count}});
            return kExitOk;
        }

        if (train_cmd->parsed()) {
            RunConfig cfg = resolve_config(g);
            if (!dataset.empty()) cfg.dataset_path = dataset;
            if (!codec_path.empty()) cfg.codec_path = codec_path;
            const auto result = train::train(cfg, out_dir, [&](const train::StepMetrics& m) {
                if (m.iteration % cfg.log_interval == 0) std::cerr << m.to_json(cfg.lse_enabled).dump() << std::endl;
            });
            print_json({{"iterations", result.iterations},
                        {"final_phase", losses::to_string(result.final_state.phase)},
                        {"final_ema_bit_acc", result.final_state.running_bit_acc},
                        {"iterations_to_tau1", result.iterations_to_tau1 ? *result.iterations_to_tau1 : -1},
                        {"iterations_to_tau2", result.iterations_to_tau2 ? *result.iterations_to_tau2 : -1},
                        {"probe_message_accuracy_pct", result.final_probe.message_accuracy_pct},
                        {"best_iteration", result.best_iteration},
                        {"codec_hash", result.codec_hash_after},
                        {"final_checkpoint", result.final_checkpoint.string()},
                        {"best_checkpoint", result.best_checkpoint.string()},
                        {"log", result.log_path.string()}});
            return kExitOk;
        }

        if (embed->parsed()) {
            const auto model = message::load_model(require_checkpoint(g));
            const int d = model.d();
            if (message_hex.size() != hex_length(d)) {
                fail(ErrorKind::Usage, "message has " + std::to_string(message_hex.size() * 4) +
                                           " bits of hex but the checkpoint expects d = " + std::to_string(d) + " (" +
                                           std::to_string(hex_length(d)) + " hex digits)");
            }
            const Message m = hex_to_message(message_hex, d);
            const ImageTensor cover = load_image(image, model.image_height(), model.image_width());
            const LatentCode z = codec::encode(*model.codec, cover);
            const ImageTensor stego = message::embed(*model.encoder, *model.codec, m, z);
            save_image(stego, out_path);
            print_json({{"out", out_path},
                        {"d", d},
                        {"message", message_to_hex(m)},
                        {"psnr", metrics::psnr(cover, stego)},
                        {"ssim", metrics::ssim(cover, stego)}});
            return kExitOk;
        }

        if (extract->parsed()) {
            const auto model = message::load_model(require_checkpoint(g));
            const ImageTensor img = load_image(image, model.image_height(), model.image_width());
            const auto ex = message::extract(*model.decoder, img);
            std::vector<double> confidence;
            for (double l : ex.logits) confidence.push_back(1.0 / (1.0 + std::exp(-l)));
            print_json({{"message", message_to_hex(ex.bits)}, {"logits", ex.logits}, {"confidence", confidence}});
            return kExitOk;
        }

        if (evaluate->parsed()) {
            const RunConfig cfg = resolve_config(g);
            const auto model = message::load_model(require_checkpoint(g));
            const auto data = train::load_dataset(dataset.empty() ? cfg.dataset_path : dataset, model.image_height(),
                                                  model.image_width());
            harness::EvalOptions opts;
            opts.messages_per_image = per_image;
            opts.seed = cfg.seed;
            const auto report = harness::evaluate(model, data, opts);
            harness::write_eval_outputs(report, out_dir);
            std::cout << report.summary_csv();
            return kExitOk;
        }

        if (robust->parsed()) {
            RunConfig cfg = resolve_config(g);
            const auto model = message::load_model(require_checkpoint(g));
            const auto data = train::load_dataset(dataset.empty() ? cfg.dataset_path : dataset, model.image_height(),
                                                  model.image_width());
            const auto report = harness::robustness(model, data, cfg, per_image, cfg.seed);
            fs::create_directories(out_dir);
            std::ofstream(out_dir / "robustness.json") << report.to_json().dump(2) << '\n';
            std::ofstream(out_dir / "robustness.csv") << report.to_csv();
            std::cout << report.to_csv();
            return kExitOk;
        }

        if (sweep->parsed()) {
            RunConfig cfg = resolve_config(g);
            const auto parsed = harness::parse_grid(grid);
            const std::string eval_dir = eval_dataset.empty() ? cfg.dataset_path : eval_dataset;
            const auto eval_data = train::load_dataset(eval_dir, cfg.image_height, cfg.image_width);
            fs::create_directories(out_dir);
            const auto rows = harness::sweep(cfg, parsed, out_dir, eval_data, per_image);
            std::cout << harness::sweep_summary_csv(rows);
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << std::endl;
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error [io-error]: " << e.what() << std::endl;
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUsage;
    }
    return kExitUsage;
}
