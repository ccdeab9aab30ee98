#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stego/losses/weights.hpp"

namespace stego {

// Full run configuration. Every field is addressable as a flat `key = value`
// entry; keys are the field names below (loss weights and transform
// parameters are flattened to their own field names).
struct RunConfig {
    int d = 16;
    int image_height = 32;  // key: image_size = HxW
    int image_width = 32;
    std::uint64_t seed = 0;
    double learning_rate = 8e-5;
    LossWeights loss_weights;
    double tau1 = 0.90;
    double tau2 = 0.95;
    int max_iterations = 20000;
    std::string dataset_path;
    std::string checkpoint_path;

    // Desk-scale training knobs.
    int batch_size = 8;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    double ema_decay = 0.99;
    bool lse_enabled = true;
    bool transforms_enabled = true;
    std::string perceptual = "proxy";  // none | proxy | external
    int log_interval = 100;
    int checkpoint_interval = 1000;
    int probe_size = 64;
    std::string codec_path;
    int encoder_width = 16;
    int decoder_width = 16;
    std::string decoder_head = "flatten";  // flatten | gap

    // Transform parameters (mirroring TransformSpec).
    int blur_kernel = 5;
    double blur_sigma = 2.0;
    double noise_mean = 0.0;
    double noise_sigma = 0.2;
    int jpeg_quality = 80;

    // Reference codec pretraining.
    int codec_steps = 10000;
    int codec_batch_size = 16;
    double codec_learning_rate = 2e-3;
    int codec_width = 16;
    int min_dataset_size = 1000;

    /// Throws config-error on violated invariants.
    void validate() const;

    /// Sets one field from its textual form. Unknown key -> usage-error; bad value -> config-error.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;

    static const std::vector<std::string>& keys();
    static bool has_key(const std::string& key);

    /// All keys in canonical order, one `key = value` per line.
    std::string to_text() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace stego
