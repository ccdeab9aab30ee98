#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stego/core/config.hpp"
#include "stego/core/image.hpp"
#include "stego/nn/checkpoint.hpp"
#include "stego/nn/layers.hpp"

namespace stego::codec {

// Record of a decode pass, needed to backpropagate to the latent input.
struct DecodeTrace {
    nn::Trace net;
    nn::Tensor raw;  // unclamped decoder output
};

// Frozen image encoder/decoder pair mapping H x W x 3 images to
// (H/8) x (W/8) x 4 latents. Implementations are looked up by codec_id.
class LatentCodec {
public:
    virtual ~LatentCodec() = default;

    virtual std::string codec_id() const = 0;
    virtual nlohmann::json architecture() const = 0;

    std::span<const double> parameters() const { return params_; }
    /// Throws invalid-argument once frozen.
    std::span<double> mutable_parameters();
    bool frozen() const noexcept { return frozen_; }
    void freeze() noexcept { frozen_ = true; }
    std::string parameter_hash() const { return nn::params_hash(params_); }

    /// Batched encode of (n, 3, H, W) images to (n, 4, H/8, W/8).
    nn::Tensor encode(const nn::Tensor& images, nn::Trace* trace = nullptr) const;
    /// dL/dimages given dL/dz; parameters receive no gradient.
    nn::Tensor encode_backward(const nn::Trace& trace, const nn::Tensor& dz) const;

    /// Batched decode to images clamped into [0, 1].
    nn::Tensor decode(const nn::Tensor& z, DecodeTrace* trace = nullptr) const;
    /// dL/dz given dL/dimage; zero gradient where the clamp was active.
    nn::Tensor decode_backward(const DecodeTrace& trace, const nn::Tensor& dimage) const;

    /// Unclamped decoder output; used for pretraining.
    nn::Tensor decode_raw(const nn::Tensor& z, nn::Trace* trace) const { return decode_impl(z, trace); }
    /// Full backward through the raw decoder. `dparams` may be empty.
    nn::Tensor decode_raw_backward(const nn::Trace& trace, const nn::Tensor& dy, std::span<double> dparams) const {
        return decode_backward_impl(trace, dy, dparams);
    }
    nn::Tensor encode_raw_backward(const nn::Trace& trace, const nn::Tensor& dz, std::span<double> dparams) const {
        return encode_backward_impl(trace, dz, dparams);
    }

protected:
    virtual nn::Tensor encode_impl(const nn::Tensor& images, nn::Trace* trace) const = 0;
    virtual nn::Tensor encode_backward_impl(const nn::Trace& trace, const nn::Tensor& dz,
                                            std::span<double> dparams) const = 0;
    virtual nn::Tensor decode_impl(const nn::Tensor& z, nn::Trace* trace) const = 0;
    virtual nn::Tensor decode_backward_impl(const nn::Trace& trace, const nn::Tensor& dy,
                                            std::span<double> dparams) const = 0;

    std::vector<double> params_;

private:
    bool frozen_ = false;
};

/// Single-image convenience wrappers.
LatentCode encode(const LatentCodec& codec, const ImageTensor& image);
ImageTensor decode(const LatentCodec& codec, const LatentCode& z);

// Plain convolutional autoencoder: three stride-2 stages down to 1/8 and a
// 4-channel bottleneck; mirrored nearest-upsample decoder. Deterministic.
class ConvAutoencoder final : public LatentCodec {
public:
    static constexpr const char* kId = "conv-ae-v1";

    explicit ConvAutoencoder(int width, std::uint64_t seed = 0);

    std::string codec_id() const override { return kId; }
    nlohmann::json architecture() const override { return {{"width", width_}}; }
    std::size_t encoder_param_count() const { return encoder_.param_count(); }

protected:
    nn::Tensor encode_impl(const nn::Tensor& images, nn::Trace* trace) const override;
    nn::Tensor encode_backward_impl(const nn::Trace& trace, const nn::Tensor& dz,
                                    std::span<double> dparams) const override;
    nn::Tensor decode_impl(const nn::Tensor& z, nn::Trace* trace) const override;
    nn::Tensor decode_backward_impl(const nn::Trace& trace, const nn::Tensor& dy,
                                    std::span<double> dparams) const override;

private:
    int width_;
    nn::Sequential encoder_;
    nn::Sequential decoder_;
};

// No-training fallback: 8x8 average pool, fixed orthonormal 3->4 channel
// projection; decode applies the transpose and nearest-upsamples by 8.
class PoolingCodec final : public LatentCodec {
public:
    static constexpr const char* kId = "identity-pool";

    PoolingCodec() { freeze(); }

    std::string codec_id() const override { return kId; }
    nlohmann::json architecture() const override { return nlohmann::json::object(); }

protected:
    nn::Tensor encode_impl(const nn::Tensor& images, nn::Trace* trace) const override;
    nn::Tensor encode_backward_impl(const nn::Trace& trace, const nn::Tensor& dz,
                                    std::span<double> dparams) const override;
    nn::Tensor decode_impl(const nn::Tensor& z, nn::Trace* trace) const override;
    nn::Tensor decode_backward_impl(const nn::Trace& trace, const nn::Tensor& dy,
                                    std::span<double> dparams) const override;
};

using CodecFactory = std::function<std::unique_ptr<LatentCodec>(const nlohmann::json& architecture)>;

/// Registers a codec implementation under `codec_id` (e.g. a full-scale autoencoder).
void register_codec(const std::string& codec_id, CodecFactory factory);
std::unique_ptr<LatentCodec> make_codec(const std::string& codec_id, const nlohmann::json& architecture);

/// Checkpoint section named "codec".
nn::CheckpointSection codec_section(const LatentCodec& codec);
std::unique_ptr<LatentCodec> codec_from_section(const nn::CheckpointSection& section);
void save_codec(const LatentCodec& codec, const std::filesystem::path& path);
std::unique_ptr<LatentCodec> load_codec(const std::filesystem::path& path);

struct PretrainReport {
    int steps = 0;
    double final_train_mse = 0.0;
    double heldout_psnr = 0.0;
    int heldout_count = 0;
};

/// Trains a ConvAutoencoder on `images` and returns it frozen. Requires at
/// least config.min_dataset_size images (config-error otherwise).
std::unique_ptr<ConvAutoencoder> pretrain_reference_codec(const std::vector<ImageTensor>& images,
                                                          const RunConfig& config, PretrainReport* report = nullptr,
                                                          const std::function<void(int, double)>& on_log = {});

/// Mean PSNR of decode(encode(x)) over `images`.
double reconstruction_psnr(const LatentCodec& codec, const std::vector<ImageTensor>& images);

}  // namespace stego::codec
