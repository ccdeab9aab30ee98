#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stego/codec/latent_codec.hpp"
#include "stego/core/config.hpp"
#include "stego/core/image.hpp"
#include "stego/core/message.hpp"
#include "stego/nn/checkpoint.hpp"
#include "stego/nn/layers.hpp"

namespace stego::message {

/// (n, d, 1, 1) tensor of bits mapped to -1 / +1.
nn::Tensor message_signs(std::span<const Message> messages);
/// (n, d, 1, 1) tensor of bits as 0 / 1.
nn::Tensor message_targets(std::span<const Message> messages);

// Latent-aware message encoder. A linear layer lifts the +-1 message to one
// latent-sized plane; a UNet (4 down, 4 up, skip concatenation) maps
// [plane | z] (5 channels) to an additive latent perturbation with z's shape.
// The UNet's last layer starts at zero, so a fresh encoder embeds nothing.
class MessageEncoder {
public:
    static constexpr int kLevels = 4;

    MessageEncoder(int d, int image_height, int image_width, int width = 16);

    int d() const { return d_; }
    int image_height() const { return image_h_; }
    int image_width() const { return image_w_; }
    int width() const { return width_; }

    void init(std::uint64_t seed);
    std::size_t param_count() const { return total_; }
    std::span<const double> parameters() const { return params_; }
    std::span<double> mutable_parameters() { return params_; }
    void set_parameters(std::vector<double> params);

    struct Trace {
        nn::Tensor lifted;          // fc output, (n, h*w, 1, 1)
        nn::Trace fc;
        nn::Trace in;
        std::array<nn::Trace, kLevels> down;
        std::array<nn::Trace, kLevels> up;
        nn::Trace out;
        std::array<nn::Shape, kLevels> up_src;  // shape of the tensor resized into each up block
    };

    /// signs (n, d, 1, 1) and z (n, 4, h, w) -> e (n, 4, h, w).
    nn::Tensor forward(const nn::Tensor& signs, const nn::Tensor& z, Trace* trace = nullptr) const;
    /// Accumulates parameter gradients (skipped when `dparams` is empty); writes dz when non-null.
    void backward(const Trace& trace, const nn::Tensor& de, std::span<double> dparams, nn::Tensor* dz) const;

private:
    int d_, image_h_, image_w_, width_;
    int latent_h_, latent_w_;
    nn::Sequential fc_, in_, out_;
    std::array<nn::Sequential, kLevels> down_, up_;
    std::vector<std::size_t> offsets_;  // fc, in, down[0..3], up[0..3], out
    std::size_t total_ = 0;
    std::vector<double> params_;

    std::span<const double> block(std::span<const double> all, std::size_t i, const nn::Sequential& s) const {
        return all.subspan(offsets_[i], s.param_count());
    }
    std::span<double> block(std::span<double> all, std::size_t i, const nn::Sequential& s) const {
        return all.subspan(offsets_[i], s.param_count());
    }
};

// Convolutional bit classifier: five 3x3 conv blocks (strides 1, 2, 2, 2, 1),
// then global average pooling ("gap") or flattening ("flatten"), then a
// linear layer with one logit per bit.
class MessageDecoder {
public:
    MessageDecoder(int d, int image_height, int image_width, int width = 16, std::string head = "gap");

    int d() const { return d_; }
    int image_height() const { return image_h_; }
    int image_width() const { return image_w_; }
    int width() const { return width_; }
    const std::string& head() const { return head_; }

    void init(std::uint64_t seed);
    std::size_t param_count() const { return net_.param_count(); }
    std::span<const double> parameters() const { return params_; }
    std::span<double> mutable_parameters() { return params_; }
    void set_parameters(std::vector<double> params);

    /// images (n, 3, H, W) -> logits (n, d, 1, 1).
    nn::Tensor forward(const nn::Tensor& images, nn::Trace* trace = nullptr) const;
    nn::Tensor backward(const nn::Trace& trace, const nn::Tensor& dlogits, std::span<double> dparams,
                        bool want_dx = true) const;

private:
    int d_, image_h_, image_w_, width_;
    std::string head_;
    nn::Sequential net_;
    std::vector<double> params_;
};

/// e for one message and latent.
LatentCode encode_message(const MessageEncoder& enc, const Message& m, const LatentCode& z);

/// decode(codec, z + e), clamped to [0, 1].
ImageTensor embed(const MessageEncoder& enc, const codec::LatentCodec& codec, const Message& m, const LatentCode& z);

struct Extraction {
    std::vector<double> logits;
    Message bits;  // bit i is 1 iff logits[i] > 0
};

Extraction extract(const MessageDecoder& dec, const ImageTensor& image);
Message threshold_logits(std::span<const double> logits);

/// Batched embed: returns stego images (n, 3, H, W) for cover images (n, 3, H, W).
nn::Tensor embed_batch(const MessageEncoder& enc, const codec::LatentCodec& codec, std::span<const Message> messages,
                       const nn::Tensor& covers);

nn::CheckpointSection encoder_section(const MessageEncoder& enc);
nn::CheckpointSection decoder_section(const MessageDecoder& dec);
/// `expected_d` < 0 accepts any d; otherwise a mismatch is an invalid-argument error.
MessageEncoder encoder_from_section(const nn::CheckpointSection& s, int expected_d = -1);
MessageDecoder decoder_from_section(const nn::CheckpointSection& s, int expected_d = -1);

// Everything needed to embed and extract: the frozen codec plus both message networks.
struct StegoModel {
    std::unique_ptr<codec::LatentCodec> codec;
    std::unique_ptr<MessageEncoder> encoder;
    std::unique_ptr<MessageDecoder> decoder;

    int d() const { return encoder->d(); }
    int image_height() const { return encoder->image_height(); }
    int image_width() const { return encoder->image_width(); }
};

/// Fresh networks for `config` around an existing codec.
StegoModel make_model(const RunConfig& config, std::unique_ptr<codec::LatentCodec> codec);

nn::Checkpoint model_checkpoint(const StegoModel& model, const nlohmann::json& extra = {});
void save_model(const StegoModel& model, const std::filesystem::path& path, const nlohmann::json& extra = {});
StegoModel load_model(const std::filesystem::path& path, int expected_d = -1);
StegoModel model_from_checkpoint(const nn::Checkpoint& ckpt, int expected_d = -1);

}  // namespace stego::message
