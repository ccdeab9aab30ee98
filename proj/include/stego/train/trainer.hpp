#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stego/core/config.hpp"
#include "stego/losses/losses.hpp"
#include "stego/message/message_codec.hpp"
#include "stego/nn/optim.hpp"
#include "stego/train/dataset.hpp"

namespace stego::train {

struct StepMetrics {
    long iteration = 0;                      // 1-based index of the step just taken
    losses::Phase phase = losses::Phase::FixedBatch;  // phase the step ran in
    losses::LossBreakdown loss;
    double batch_bit_acc = 0.0;
    double ema_bit_acc = 0.0;
    std::string transform = "none";
    double grad_norm = 0.0;
    bool promoted = false;

    nlohmann::json to_json(bool lse_enabled) const;
};

struct ProbeResult {
    double bit_accuracy = 0.0;
    double message_accuracy_pct = 0.0;
};

// Mutable state of one training run. Only the message encoder and decoder are
// optimized; the codec is frozen and its latents for every dataset image are
// computed once up front.
class TrainRun {
public:
    TrainRun(RunConfig config, std::unique_ptr<codec::LatentCodec> codec, Dataset data);

    StepMetrics step();

    const RunConfig& config() const { return config_; }
    const losses::CurriculumState& curriculum() const { return state_; }
    const message::StegoModel& model() const { return model_; }
    message::StegoModel& model() { return model_; }
    const Split& split() const { return split_; }
    const Dataset& data() const { return data_; }
    /// Dataset indices used by the most recent step.
    const std::vector<int>& last_batch() const { return last_batch_; }
    std::optional<long> iterations_to_tau1() const { return iter_tau1_; }
    std::optional<long> iterations_to_tau2() const { return iter_tau2_; }

    /// Clean (untransformed) accuracy on the held-out probe images with fixed probe messages.
    ProbeResult probe() const;

private:
    RunConfig config_;
    message::StegoModel model_;
    Dataset data_;
    Split split_;
    nn::Tensor latents_;  // (N, 4, h, w) for every dataset image
    losses::LossOptions loss_options_;
    losses::CurriculumState state_;
    nn::AdamW enc_opt_, dec_opt_;
    Rng data_rng_, msg_rng_, transform_rng_;
    std::vector<int> fixed_batch_;
    std::vector<int> epoch_order_;
    std::size_t epoch_pos_ = 0;
    std::vector<int> last_batch_;
    std::vector<Message> probe_messages_;
    std::optional<long> iter_tau1_, iter_tau2_;

    std::vector<int> next_batch();
};

struct TrainResult {
    long iterations = 0;
    losses::CurriculumState final_state;
    std::optional<long> iterations_to_tau1, iterations_to_tau2;
    ProbeResult final_probe;
    ProbeResult best_probe;
    long best_iteration = 0;
    std::string codec_hash_before, codec_hash_after;
    std::filesystem::path final_checkpoint, best_checkpoint, log_path, manifest_path;
};

/// Full run: reads config.dataset_path and config.codec_path, writes into
/// `out_dir` a JSON-lines log, a run manifest, a checkpoint every
/// checkpoint_interval steps, the best-by-probe-message-accuracy checkpoint,
/// and the final checkpoint. Missing codec -> config-error.
TrainResult train(const RunConfig& config, const std::filesystem::path& out_dir,
                  const std::function<void(const StepMetrics&)>& on_step = {});

/// Same loop over already-loaded inputs.
TrainResult train(TrainRun& run, const std::filesystem::path& out_dir,
                  const std::function<void(const StepMetrics&)>& on_step = {});

/// Loads the codec named by config.codec_path (config-error when missing).
std::unique_ptr<codec::LatentCodec> load_frozen_codec(const RunConfig& config);

}  // namespace stego::train
