#include "stego/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "stego/core/errors.hpp"
#include "stego/metrics/metrics.hpp"
#include "stego/nn/kernels.hpp"
#include "stego/transforms/transforms.hpp"

namespace stego::train {

namespace {

nn::AdamW::Options optimizer_options(const RunConfig& c) {
    nn::AdamW::Options o;
    o.lr = c.learning_rate;
    o.weight_decay = c.weight_decay;
    return o;
}

nn::Tensor gather_images(const Dataset& data, const std::vector<int>& idx) {
    std::vector<ImageTensor> picked;
    picked.reserve(idx.size());
    for (int i : idx) picked.push_back(data.images[static_cast<std::size_t>(i)]);
    return to_tensor(std::span<const ImageTensor>(picked));
}

nn::Tensor gather_samples(const nn::Tensor& t, const std::vector<int>& idx) {
    nn::Tensor out(static_cast<int>(idx.size()), t.c(), t.h(), t.w());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        auto src = t.sample(idx[k]);
        std::copy(src.begin(), src.end(), out.sample(static_cast<int>(k)).data());
    }
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

int count_correct(const nn::Tensor& logits, const nn::Tensor& targets) {
    int ok = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) ok += (logits.data()[i] > 0.0) == (targets.data()[i] > 0.5);
    return ok;
}

}  // namespace

nlohmann::json StepMetrics::to_json(bool lse_enabled) const {
    nlohmann::json j = {{"event", "step"},
                        {"iteration", iteration},
                        {"phase", losses::to_string(phase)},
                        {"loss", loss.to_json(lse_enabled)},
                        {"batch_bit_acc", batch_bit_acc},
                        {"ema_bit_acc", ema_bit_acc},
                        {"transform", transform},
                        {"grad_norm", grad_norm}};
    return j;
}

TrainRun::TrainRun(RunConfig config, std::unique_ptr<codec::LatentCodec> codec, Dataset data)
    : config_(std::move(config)),
      data_(std::move(data)),
      enc_opt_(0, optimizer_options(config_)),
      dec_opt_(0, optimizer_options(config_)),
      data_rng_(make_stream(config_.seed, stream::kData)),
      msg_rng_(make_stream(config_.seed, stream::kMessages)),
      transform_rng_(make_stream(config_.seed, stream::kTransforms)) {
    config_.validate();
    if (!codec) fail(ErrorKind::Config, "no latent codec supplied");
    if (!codec->frozen()) fail(ErrorKind::Config, "latent codec must be frozen before steganography training");
    for (const auto& img : data_.images) {
        if (img.height() != config_.image_height || img.width() != config_.image_width) {
            fail(ErrorKind::Config, "dataset image size does not match image_size");
        }
    }
    split_ = split_dataset(data_.size(), config_.probe_size, config_.seed);
    model_ = message::make_model(config_, std::move(codec));
    enc_opt_ = nn::AdamW(model_.encoder->param_count(), optimizer_options(config_));
    dec_opt_ = nn::AdamW(model_.decoder->param_count(), optimizer_options(config_));

    loss_options_.weights = config_.loss_weights;
    loss_options_.lse_enabled = config_.lse_enabled;
    loss_options_.perceptual = losses::resolve_perceptual(config_.perceptual);

    // The codec is frozen and deterministic, so every latent is computed once.
    constexpr int kChunk = 64;
    std::vector<nn::Tensor> parts;
    for (std::size_t start = 0; start < data_.size(); start += kChunk) {
        const std::size_t end = std::min(data_.size(), start + kChunk);
        parts.push_back(model_.codec->encode(
            to_tensor(std::span<const ImageTensor>(data_.images.data() + start, end - start))));
    }
    latents_ = nn::stack(parts);

    std::vector<int> order = split_.train;
    std::shuffle(order.begin(), order.end(), data_rng_);
    const auto b = std::min<std::size_t>(static_cast<std::size_t>(config_.batch_size), order.size());
    fixed_batch_.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b));

    Rng probe_rng = make_stream(config_.seed, stream::kProbe);
    for (std::size_t i = 0; i < split_.probe.size(); ++i) probe_messages_.push_back(generate_message(config_.d, probe_rng));
}

std::vector<int> TrainRun::next_batch() {
    std::vector<int> batch;
    while (static_cast<int>(batch.size()) < config_.batch_size) {
        if (epoch_pos_ >= epoch_order_.size()) {
            epoch_order_ = split_.train;
            std::shuffle(epoch_order_.begin(), epoch_order_.end(), data_rng_);
            epoch_pos_ = 0;
        }
        batch.push_back(epoch_order_[epoch_pos_++]);
    }
    return batch;
}

StepMetrics TrainRun::step() {
    StepMetrics out;
    out.phase = state_.phase;
    const auto& enc = *model_.encoder;
    const auto& dec = *model_.decoder;
    const auto& codec = *model_.codec;

    last_batch_ = state_.phase == losses::Phase::FixedBatch ? fixed_batch_ : next_batch();
    const int n = static_cast<int>(last_batch_.size());
    const nn::Tensor covers = gather_images(data_, last_batch_);
    const nn::Tensor z = gather_samples(latents_, last_batch_);
    std::vector<Message> msgs;
    for (int i = 0; i < n; ++i) msgs.push_back(generate_message(config_.d, msg_rng_));
    const nn::Tensor signs = message::message_signs(msgs);
    const nn::Tensor targets = message::message_targets(msgs);

    message::MessageEncoder::Trace enc_trace;
    nn::Tensor stego_latent = enc.forward(signs, z, &enc_trace);
    stego_latent += z;
    codec::DecodeTrace dec_trace;
    const nn::Tensor stego = codec.decode(stego_latent, &dec_trace);

    const bool transformed = config_.transforms_enabled && state_.phase == losses::Phase::RobustLse;
    transforms::TransformTrace t_trace;
    nn::Tensor seen;
    if (transformed) {
        const auto spec = transforms::sample_train_transform(transform_rng_, config_);
        out.transform = spec.describe();
        seen = transforms::apply_batch(spec, stego, /*differentiable=*/true, &t_trace);
    }
    const nn::Tensor& dec_input = transformed ? seen : stego;

    nn::Trace msg_trace;
    const nn::Tensor logits = dec.forward(dec_input, &msg_trace);
    nn::Tensor probs(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) probs.data()[i] = sigmoid(logits.data()[i]);

    losses::LossGrads grads;
    out.loss = losses::total_loss(covers, stego, probs, targets, loss_options_, state_, &grads);
    if (!out.loss.finite()) {
        fail(ErrorKind::Numeric, "non-finite loss at iteration " + std::to_string(state_.iteration + 1) + ": " +
                                     out.loss.to_json().dump());
    }

    nn::Tensor dlogits = grads.d_probs;
    for (std::size_t i = 0; i < dlogits.size(); ++i) {
        const double p = probs.data()[i];
        dlogits.data()[i] *= p * (1.0 - p);
    }
    std::vector<double> ddec(dec.param_count(), 0.0), denc(enc.param_count(), 0.0);
    nn::Tensor dx = dec.backward(msg_trace, dlogits, ddec);
    nn::Tensor dstego = std::move(grads.d_stego);
    if (transformed) {
        dstego += transforms::backward_batch(t_trace, dx);
    } else {
        dstego += dx;
    }
    const nn::Tensor dlatent = codec.decode_backward(dec_trace, dstego);
    enc.backward(enc_trace, dlatent, denc, nullptr);

    out.grad_norm = nn::clip_global_norm({std::span<double>(denc), std::span<double>(ddec)}, config_.grad_clip);
    if (!std::isfinite(out.grad_norm)) {
        fail(ErrorKind::Numeric, "non-finite gradient at iteration " + std::to_string(state_.iteration + 1) + ": " +
                                     out.loss.to_json().dump());
    }
    enc_opt_.step(model_.encoder->mutable_parameters(), denc);
    dec_opt_.step(model_.decoder->mutable_parameters(), ddec);

    out.batch_bit_acc = static_cast<double>(count_correct(logits, targets)) / static_cast<double>(targets.size());
    const auto before = state_.phase;
    state_ = losses::advance_curriculum(state_, out.batch_bit_acc, config_);
    out.promoted = state_.phase != before;
    if (state_.phase == losses::Phase::FullData && !iter_tau1_) iter_tau1_ = state_.iteration;
    if (state_.phase == losses::Phase::RobustLse && !iter_tau2_) {
        iter_tau2_ = state_.iteration;
        if (!iter_tau1_) iter_tau1_ = state_.iteration;
    }
    out.iteration = state_.iteration;
    out.ema_bit_acc = state_.running_bit_acc;
    return out;
}

ProbeResult TrainRun::probe() const {
    ProbeResult r;
    if (split_.probe.empty()) return r;
    constexpr std::size_t kChunk = 32;
    long bits_ok = 0, msgs_ok = 0;
    for (std::size_t start = 0; start < split_.probe.size(); start += kChunk) {
        const std::size_t end = std::min(split_.probe.size(), start + kChunk);
        std::vector<int> idx(split_.probe.begin() + static_cast<std::ptrdiff_t>(start),
                             split_.probe.begin() + static_cast<std::ptrdiff_t>(end));
        std::span<const Message> msgs(probe_messages_.data() + start, end - start);
        nn::Tensor z = gather_samples(latents_, idx);
        nn::Tensor stego_latent = model_.encoder->forward(message::message_signs(msgs), z);
        stego_latent += z;
        const nn::Tensor logits = model_.decoder->forward(model_.codec->decode(stego_latent));
        const nn::Tensor targets = message::message_targets(msgs);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            int ok = 0;
            for (int b = 0; b < config_.d; ++b) {
                ok += (logits.sample(static_cast<int>(k))[b] > 0.0) == (targets.sample(static_cast<int>(k))[b] > 0.5);
            }
            bits_ok += ok;
            msgs_ok += ok == config_.d;
        }
    }
    const double n = static_cast<double>(split_.probe.size());
    r.bit_accuracy = static_cast<double>(bits_ok) / (n * config_.d);
    r.message_accuracy_pct = 100.0 * static_cast<double>(msgs_ok) / n;
    return r;
}

std::unique_ptr<codec::LatentCodec> load_frozen_codec(const RunConfig& config) {
    if (config.codec_path.empty()) fail(ErrorKind::Config, "codec_path is not set");
    if (!std::filesystem::exists(config.codec_path)) {
        fail(ErrorKind::Config, "codec checkpoint not found: " + config.codec_path);
    }
    auto codec = codec::load_codec(config.codec_path);
    codec->freeze();
    return codec;
}

TrainResult train(const RunConfig& config, const std::filesystem::path& out_dir,
                  const std::function<void(const StepMetrics&)>& on_step) {
    config.validate();
    auto codec = load_frozen_codec(config);
    if (config.dataset_path.empty()) fail(ErrorKind::Config, "dataset_path is not set");
    Dataset data = load_dataset(config.dataset_path, config.image_height, config.image_width);
    TrainRun run(config, std::move(codec), std::move(data));
    return train(run, out_dir, on_step);
}

TrainResult train(TrainRun& run, const std::filesystem::path& out_dir,
                  const std::function<void(const StepMetrics&)>& on_step) {
    const RunConfig& cfg = run.config();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

    TrainResult result;
    result.codec_hash_before = run.model().codec->parameter_hash();
    result.log_path = out_dir / "train_log.jsonl";
    result.manifest_path = out_dir / "run_manifest.json";
    result.final_checkpoint = out_dir / "final.ckpt";
    result.best_checkpoint = out_dir / "best.ckpt";

    {
        nlohmann::json manifest = {{"config", cfg.to_text()},
                                   {"seed", cfg.seed},
                                   {"codec_id", run.model().codec->codec_id()},
                                   {"codec_hash", result.codec_hash_before},
                                   {"dataset_size", run.data().size()},
                                   {"train_size", run.split().train.size()},
                                   {"probe_indices", run.split().probe},
                                   {"encoder_params", run.model().encoder->param_count()},
                                   {"decoder_params", run.model().decoder->param_count()},
                                   {"workers", nn::num_workers()}};
        std::ofstream mf(result.manifest_path);
        if (!mf) fail(ErrorKind::Io, "cannot write " + result.manifest_path.string());
        mf << manifest.dump(2) << '\n';
    }
    std::ofstream log(result.log_path);
    if (!log) fail(ErrorKind::Io, "cannot write " + result.log_path.string());

    auto extra = [&](long it) {
        return nlohmann::json{{"iteration", it},
                              {"phase", losses::to_string(run.curriculum().phase)},
                              {"ema_bit_acc", run.curriculum().running_bit_acc},
                              {"config", cfg.to_text()}};
    };

    double best = -1.0;
    for (long it = 1; it <= cfg.max_iterations; ++it) {
        const StepMetrics m = run.step();
        if (on_step) on_step(m);
        if (m.promoted) {
            log << nlohmann::json{{"event", "phase"}, {"iteration", m.iteration},
                                  {"phase", losses::to_string(run.curriculum().phase)},
                                  {"ema_bit_acc", m.ema_bit_acc}}.dump()
                << '\n';
        }
        if (it == 1 || it % cfg.log_interval == 0 || it == cfg.max_iterations) log << m.to_json(cfg.lse_enabled).dump() << '\n';
        if (it % cfg.checkpoint_interval == 0 || it == cfg.max_iterations) {
            const ProbeResult p = run.probe();
            log << nlohmann::json{{"event", "probe"}, {"iteration", it}, {"bit_accuracy", p.bit_accuracy},
                                  {"message_accuracy_pct", p.message_accuracy_pct}}.dump()
                << '\n';
            char name[32];
            std::snprintf(name, sizeof name, "step_%06ld.ckpt", it);
            message::save_model(run.model(), out_dir / name, extra(it));
            if (p.message_accuracy_pct > best) {
                best = p.message_accuracy_pct;
                result.best_probe = p;
                result.best_iteration = it;
                message::save_model(run.model(), result.best_checkpoint, extra(it));
            }
        }
        log.flush();
    }
    result.iterations = run.curriculum().iteration;
    message::save_model(run.model(), result.final_checkpoint, extra(result.iterations));
    if (best < 0.0) {
        message::save_model(run.model(), result.best_checkpoint, extra(result.iterations));
        result.best_probe = run.probe();
    }
    result.final_probe = run.probe();
    result.final_state = run.curriculum();
    result.iterations_to_tau1 = run.iterations_to_tau1();
    result.iterations_to_tau2 = run.iterations_to_tau2();
    result.codec_hash_after = run.model().codec->parameter_hash();
    if (result.codec_hash_after != result.codec_hash_before) {
        fail(ErrorKind::Numeric, "latent codec parameters changed during training");
    }
    log << nlohmann::json{{"event", "done"},
                          {"iterations", result.iterations},
                          {"codec_hash", result.codec_hash_after},
                          {"iterations_to_tau1", result.iterations_to_tau1 ? *result.iterations_to_tau1 : -1},
                          {"final_ema_bit_acc", result.final_state.running_bit_acc},
                          {"final_phase", losses::to_string(result.final_state.phase)},
                          {"final_probe_message_accuracy_pct", result.final_probe.message_accuracy_pct}}.dump()
        << '\n';
    return result;
}

}  // namespace stego::train
