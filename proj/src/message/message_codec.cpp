#include "stego/message/message_codec.hpp"

#include <algorithm>

#include "stego/core/errors.hpp"

namespace stego::message {

namespace {

constexpr std::uint64_t kEncoderInitTag = (stream::kInit << 8) | 1;
constexpr std::uint64_t kDecoderInitTag = (stream::kInit << 8) | 2;

void check_message_batch(std::span<const Message> messages, int d) {
    if (messages.empty()) fail(ErrorKind::InvalidArgument, "empty message batch");
    for (const auto& m : messages) {
        if (static_cast<int>(m.size()) != d) {
            fail(ErrorKind::InvalidArgument,
                 "message length " + std::to_string(m.size()) + " does not match d = " + std::to_string(d));
        }
    }
}

nlohmann::json image_size_json(int h, int w) { return nlohmann::json::array({h, w}); }

}  // namespace

nn::Tensor message_signs(std::span<const Message> messages) {
    const int d = messages.empty() ? 0 : static_cast<int>(messages.front().size());
    check_message_batch(messages, d);
    nn::Tensor t(static_cast<int>(messages.size()), d, 1, 1);
    for (std::size_t i = 0; i < messages.size(); ++i)
        for (int k = 0; k < d; ++k) t.sample(static_cast<int>(i))[k] = messages[i][k] ? 1.0 : -1.0;
    return t;
}

nn::Tensor message_targets(std::span<const Message> messages) {
    const int d = messages.empty() ? 0 : static_cast<int>(messages.front().size());
    check_message_batch(messages, d);
    nn::Tensor t(static_cast<int>(messages.size()), d, 1, 1);
    for (std::size_t i = 0; i < messages.size(); ++i)
        for (int k = 0; k < d; ++k) t.sample(static_cast<int>(i))[k] = messages[i][k];
    return t;
}

MessageEncoder::MessageEncoder(int d, int image_height, int image_width, int width)
    : d_(d), image_h_(image_height), image_w_(image_width), width_(width) {
    if (d < 1) fail(ErrorKind::InvalidArgument, "d must be >= 1");
    if (image_height <= 0 || image_width <= 0 || image_height % 8 || image_width % 8) {
        fail(ErrorKind::InvalidArgument, "image dims must be positive multiples of 8");
    }
    if (width < 1) fail(ErrorKind::InvalidArgument, "encoder width must be >= 1");
    latent_h_ = image_height / 8;
    latent_w_ = image_width / 8;
    const int c[kLevels + 1] = {width, 2 * width, 4 * width, 4 * width, 4 * width};

    fc_.emplace<nn::Linear>(d, latent_h_ * latent_w_);
    in_.emplace<nn::Conv2d>(1 + LatentCode::kChannels, c[0], 3, 1, 1).emplace<nn::SiLU>();
    for (int i = 0; i < kLevels; ++i) {
        down_[i].emplace<nn::Downsample>().emplace<nn::Conv2d>(c[i], c[i + 1], 3, 1, 1).emplace<nn::SiLU>();
        up_[i].emplace<nn::Conv2d>(c[i + 1] + c[i], c[i], 3, 1, 1).emplace<nn::SiLU>();
    }
    out_.emplace<nn::Conv2d>(c[0], LatentCode::kChannels, 1, 1, 0, /*zero_init=*/true);

    auto push = [&](const nn::Sequential& s) {
        offsets_.push_back(total_);
        total_ += s.param_count();
    };
    push(fc_);
    push(in_);
    for (const auto& s : down_) push(s);
    for (const auto& s : up_) push(s);
    push(out_);
    params_.assign(total_, 0.0);
}

void MessageEncoder::init(std::uint64_t seed) {
    Rng rng = make_stream(seed, kEncoderInitTag);
    std::span<double> p(params_);
    fc_.init_params(block(p, 0, fc_), rng);
    in_.init_params(block(p, 1, in_), rng);
    for (int i = 0; i < kLevels; ++i) down_[i].init_params(block(p, 2 + i, down_[i]), rng);
    for (int i = 0; i < kLevels; ++i) up_[i].init_params(block(p, 2 + kLevels + i, up_[i]), rng);
    out_.init_params(block(p, 2 + 2 * kLevels, out_), rng);
}

void MessageEncoder::set_parameters(std::vector<double> params) {
    if (params.size() != total_) fail(ErrorKind::InvalidArgument, "encoder parameter count mismatch");
    params_ = std::move(params);
}

nn::Tensor MessageEncoder::forward(const nn::Tensor& signs, const nn::Tensor& z, Trace* trace) const {
    if (signs.shape().sample_size() != static_cast<std::size_t>(d_)) {
        fail(ErrorKind::InvalidArgument, "message length mismatch: expected d = " + std::to_string(d_));
    }
    if (z.c() != LatentCode::kChannels || z.h() != latent_h_ || z.w() != latent_w_ || z.n() != signs.n()) {
        fail(ErrorKind::InvalidArgument, "latent shape " + z.shape().str() + " does not match encoder");
    }
    std::span<const double> p(params_);
    Trace local;
    Trace& t = trace ? *trace : local;
    const bool keep = trace != nullptr;

    nn::Tensor lifted = fc_.forward(block(p, 0, fc_), signs, keep ? &t.fc : nullptr);
    lifted.reshape({signs.n(), 1, latent_h_, latent_w_});
    nn::Tensor x = in_.forward(block(p, 1, in_), nn::concat_channels(lifted, z), keep ? &t.in : nullptr);

    std::array<nn::Tensor, kLevels + 1> skips;
    skips[0] = x;
    for (int i = 0; i < kLevels; ++i) {
        skips[i + 1] = down_[i].forward(block(p, 2 + i, down_[i]), skips[i], keep ? &t.down[i] : nullptr);
    }
    nn::Tensor u = skips[kLevels];
    for (int i = kLevels - 1; i >= 0; --i) {
        nn::Tensor resized;
        nn::kernels::resize_nearest_forward(u, skips[i].h(), skips[i].w(), resized);
        t.up_src[i] = u.shape();
        u = up_[i].forward(block(p, 2 + kLevels + i, up_[i]), nn::concat_channels(resized, skips[i]),
                           keep ? &t.up[i] : nullptr);
    }
    return out_.forward(block(p, 2 + 2 * kLevels, out_), u, keep ? &t.out : nullptr);
}

void MessageEncoder::backward(const Trace& t, const nn::Tensor& de, std::span<double> dparams, nn::Tensor* dz) const {
    std::span<const double> p(params_);
    const bool frozen = dparams.empty();
    auto grad_block = [&](std::size_t i, const nn::Sequential& s) {
        return frozen ? std::span<double>{} : block(dparams, i, s);
    };

    nn::Tensor du = out_.backward(block(p, 2 + 2 * kLevels, out_), t.out, de, grad_block(2 + 2 * kLevels, out_));
    std::array<nn::Tensor, kLevels + 1> dskip;
    for (int i = 0; i < kLevels; ++i) {
        nn::Tensor dcat = up_[i].backward(block(p, 2 + kLevels + i, up_[i]), t.up[i], du,
                                          grad_block(2 + kLevels + i, up_[i]));
        nn::Tensor dresized;
        nn::split_channels(dcat, t.up_src[i].c, dresized, dskip[i]);
        nn::kernels::resize_nearest_backward(dresized, t.up_src[i], du);
    }
    // du now holds the gradient w.r.t. the deepest down output.
    nn::Tensor dx = du;
    for (int i = kLevels - 1; i >= 0; --i) {
        nn::Tensor g = down_[i].backward(block(p, 2 + i, down_[i]), t.down[i], dx, grad_block(2 + i, down_[i]));
        g += dskip[i];
        dx = std::move(g);
    }
    nn::Tensor dinput = in_.backward(block(p, 1, in_), t.in, dx, grad_block(1, in_));
    nn::Tensor dlifted, dlatent;
    nn::split_channels(dinput, 1, dlifted, dlatent);
    if (dz) *dz = std::move(dlatent);
    if (!frozen) {
        dlifted.reshape({dlifted.n(), latent_h_ * latent_w_, 1, 1});
        fc_.backward(block(p, 0, fc_), t.fc, dlifted, grad_block(0, fc_), /*want_dx=*/false);
    }
}

MessageDecoder::MessageDecoder(int d, int image_height, int image_width, int width, std::string head)
    : d_(d), image_h_(image_height), image_w_(image_width), width_(width), head_(std::move(head)) {
    if (d < 1) fail(ErrorKind::InvalidArgument, "d must be >= 1");
    if (image_height <= 0 || image_width <= 0 || image_height % 8 || image_width % 8) {
        fail(ErrorKind::InvalidArgument, "image dims must be positive multiples of 8");
    }
    if (head_ != "gap" && head_ != "flatten") fail(ErrorKind::InvalidArgument, "decoder head must be gap or flatten");
    const int w = width;
    net_.emplace<nn::Conv2d>(3, w, 3, 1, 1).emplace<nn::SiLU>();
    net_.emplace<nn::Conv2d>(w, 2 * w, 3, 2, 1).emplace<nn::SiLU>();
    net_.emplace<nn::Conv2d>(2 * w, 4 * w, 3, 2, 1).emplace<nn::SiLU>();
    net_.emplace<nn::Conv2d>(4 * w, 4 * w, 3, 2, 1).emplace<nn::SiLU>();
    net_.emplace<nn::Conv2d>(4 * w, 4 * w, 3, 1, 1).emplace<nn::SiLU>();
    if (head_ == "gap") {
        net_.emplace<nn::GlobalAvgPool>().emplace<nn::Linear>(4 * w, d);
    } else {
        net_.emplace<nn::Linear>(4 * w * (image_height / 8) * (image_width / 8), d);
    }
    params_.assign(net_.param_count(), 0.0);
}

void MessageDecoder::init(std::uint64_t seed) {
    Rng rng = make_stream(seed, kDecoderInitTag);
    net_.init_params(params_, rng);
}

void MessageDecoder::set_parameters(std::vector<double> params) {
    if (params.size() != params_.size()) fail(ErrorKind::InvalidArgument, "decoder parameter count mismatch");
    params_ = std::move(params);
}

nn::Tensor MessageDecoder::forward(const nn::Tensor& images, nn::Trace* trace) const {
    if (images.c() != 3 || images.h() != image_h_ || images.w() != image_w_) {
        fail(ErrorKind::InvalidArgument, "image shape " + images.shape().str() + " does not match decoder " +
                                             std::to_string(image_h_) + "x" + std::to_string(image_w_));
    }
    return net_.forward(params_, images, trace);
}

nn::Tensor MessageDecoder::backward(const nn::Trace& trace, const nn::Tensor& dlogits, std::span<double> dparams,
                                    bool want_dx) const {
    return net_.backward(params_, trace, dlogits, dparams, want_dx);
}

LatentCode encode_message(const MessageEncoder& enc, const Message& m, const LatentCode& z) {
    const nn::Tensor e = enc.forward(message_signs({&m, 1}), to_tensor(z));
    return latent_from_tensor(e);
}

ImageTensor embed(const MessageEncoder& enc, const codec::LatentCodec& codec, const Message& m, const LatentCode& z) {
    nn::Tensor zt = to_tensor(z);
    nn::Tensor stego_latent = enc.forward(message_signs({&m, 1}), zt);
    stego_latent += zt;
    return image_from_tensor(codec.decode(stego_latent));
}

Message threshold_logits(std::span<const double> logits) {
    std::vector<std::uint8_t> bits(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) bits[i] = logits[i] > 0.0 ? 1 : 0;
    return Message(std::move(bits));
}

Extraction extract(const MessageDecoder& dec, const ImageTensor& image) {
    const nn::Tensor logits = dec.forward(to_tensor(image));
    Extraction out;
    out.logits.assign(logits.vec().begin(), logits.vec().end());
    out.bits = threshold_logits(out.logits);
    return out;
}

nn::Tensor embed_batch(const MessageEncoder& enc, const codec::LatentCodec& codec, std::span<const Message> messages,
                       const nn::Tensor& covers) {
    check_message_batch(messages, enc.d());
    nn::Tensor z = codec.encode(covers);
    nn::Tensor stego_latent = enc.forward(message_signs(messages), z);
    stego_latent += z;
    return codec.decode(stego_latent);
}

nn::CheckpointSection encoder_section(const MessageEncoder& enc) {
    nn::CheckpointSection s;
    s.name = "message_encoder";
    s.meta = {{"d", enc.d()},
              {"image_size", image_size_json(enc.image_height(), enc.image_width())},
              {"width", enc.width()}};
    s.params.assign(enc.parameters().begin(), enc.parameters().end());
    return s;
}

nn::CheckpointSection decoder_section(const MessageDecoder& dec) {
    nn::CheckpointSection s;
    s.name = "message_decoder";
    s.meta = {{"d", dec.d()},
              {"image_size", image_size_json(dec.image_height(), dec.image_width())},
              {"width", dec.width()},
              {"head", dec.head()}};
    s.params.assign(dec.parameters().begin(), dec.parameters().end());
    return s;
}

namespace {
void check_d(const nn::CheckpointSection& s, int expected_d) {
    const int d = s.meta.at("d").get<int>();
    if (expected_d >= 0 && d != expected_d) {
        fail(ErrorKind::InvalidArgument, "checkpoint " + s.name + " has d = " + std::to_string(d) + ", expected " +
                                             std::to_string(expected_d));
    }
}
}  // namespace

MessageEncoder encoder_from_section(const nn::CheckpointSection& s, int expected_d) {
    check_d(s, expected_d);
    try {
        MessageEncoder enc(s.meta.at("d").get<int>(), s.meta.at("image_size").at(0).get<int>(),
                           s.meta.at("image_size").at(1).get<int>(), s.meta.at("width").get<int>());
        enc.set_parameters(s.params);
        return enc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, std::string("malformed message_encoder metadata: ") + e.what());
    }
}

MessageDecoder decoder_from_section(const nn::CheckpointSection& s, int expected_d) {
    check_d(s, expected_d);
    try {
        MessageDecoder dec(s.meta.at("d").get<int>(), s.meta.at("image_size").at(0).get<int>(),
                           s.meta.at("image_size").at(1).get<int>(), s.meta.at("width").get<int>(),
                           s.meta.value("head", std::string("gap")));
        dec.set_parameters(s.params);
        return dec;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, std::string("malformed message_decoder metadata: ") + e.what());
    }
}

StegoModel make_model(const RunConfig& config, std::unique_ptr<codec::LatentCodec> codec) {
    StegoModel m;
    m.codec = std::move(codec);
    m.encoder = std::make_unique<MessageEncoder>(config.d, config.image_height, config.image_width, config.encoder_width);
    m.decoder = std::make_unique<MessageDecoder>(config.d, config.image_height, config.image_width,
                                                 config.decoder_width, config.decoder_head);
    m.encoder->init(config.seed);
    m.decoder->init(config.seed);
    return m;
}

nn::Checkpoint model_checkpoint(const StegoModel& model, const nlohmann::json& extra) {
    nn::Checkpoint ckpt;
    ckpt.put(codec::codec_section(*model.codec));
    ckpt.put(encoder_section(*model.encoder));
    ckpt.put(decoder_section(*model.decoder));
    if (!extra.is_null()) ckpt.put({"run", extra, {}});
    return ckpt;
}

void save_model(const StegoModel& model, const std::filesystem::path& path, const nlohmann::json& extra) {
    nn::save_checkpoint(model_checkpoint(model, extra), path);
}

StegoModel model_from_checkpoint(const nn::Checkpoint& ckpt, int expected_d) {
    StegoModel m;
    m.codec = codec::codec_from_section(ckpt.section("codec"));
    m.encoder = std::make_unique<MessageEncoder>(encoder_from_section(ckpt.section("message_encoder"), expected_d));
    m.decoder = std::make_unique<MessageDecoder>(decoder_from_section(ckpt.section("message_decoder"), expected_d));
    if (m.encoder->d() != m.decoder->d()) fail(ErrorKind::Io, "encoder and decoder disagree on d");
    return m;
}

StegoModel load_model(const std::filesystem::path& path, int expected_d) {
    return model_from_checkpoint(nn::load_checkpoint(path), expected_d);
}

}  // namespace stego::message
