#include "stego/codec/latent_codec.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "stego/core/errors.hpp"
#include "stego/metrics/metrics.hpp"
#include "stego/nn/optim.hpp"

namespace stego::codec {

namespace {

void check_images(const nn::Tensor& images) {
    if (images.c() != 3 || images.h() % 8 != 0 || images.w() % 8 != 0 || images.h() == 0 || images.w() == 0) {
        fail(ErrorKind::InvalidArgument, "codec expects (n,3,H,W) with H,W divisible by 8, got " +
                                             images.shape().str());
    }
}

void check_latent(const nn::Tensor& z) {
    if (z.c() != LatentCode::kChannels || z.h() == 0 || z.w() == 0) {
        fail(ErrorKind::InvalidArgument, "codec expects (n,4,h,w) latents, got " + z.shape().str());
    }
}

}  // namespace

std::span<double> LatentCodec::mutable_parameters() {
    if (frozen_) fail(ErrorKind::InvalidArgument, "codec '" + codec_id() + "' is frozen");
    return params_;
}

nn::Tensor LatentCodec::encode(const nn::Tensor& images, nn::Trace* trace) const {
    check_images(images);
    nn::Tensor z = encode_impl(images, trace);
    if (z.c() != LatentCode::kChannels || z.h() * 8 != images.h() || z.w() * 8 != images.w()) {
        fail(ErrorKind::InvalidArgument, "codec produced latent of shape " + z.shape().str());
    }
    return z;
}

nn::Tensor LatentCodec::encode_backward(const nn::Trace& trace, const nn::Tensor& dz) const {
    return encode_backward_impl(trace, dz, {});
}

nn::Tensor LatentCodec::decode(const nn::Tensor& z, DecodeTrace* trace) const {
    check_latent(z);
    nn::Tensor raw = decode_impl(z, trace ? &trace->net : nullptr);
    nn::Tensor out = raw;
    for (double& v : out.vec()) v = std::clamp(v, 0.0, 1.0);
    if (trace) trace->raw = std::move(raw);
    return out;
}

nn::Tensor LatentCodec::decode_backward(const DecodeTrace& trace, const nn::Tensor& dimage) const {
    nn::Tensor masked = dimage;
    const auto& raw = trace.raw.vec();
    auto& g = masked.vec();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (raw[i] < 0.0 || raw[i] > 1.0) g[i] = 0.0;
    }
    return decode_backward_impl(trace.net, masked, {});
}

LatentCode encode(const LatentCodec& codec, const ImageTensor& image) {
    return latent_from_tensor(codec.encode(to_tensor(image)));
}

ImageTensor decode(const LatentCodec& codec, const LatentCode& z) {
    return image_from_tensor(codec.decode(to_tensor(z)));
}

// --- ConvAutoencoder -------------------------------------------------------

ConvAutoencoder::ConvAutoencoder(int width, std::uint64_t seed) : width_(width) {
    if (width < 1) fail(ErrorKind::InvalidArgument, "codec width must be >= 1");
    const int w1 = width, w2 = 2 * width;
    encoder_.emplace<nn::Conv2d>(3, w1, 3, 2, 1)
        .emplace<nn::SiLU>()
        .emplace<nn::Conv2d>(w1, w2, 3, 2, 1)
        .emplace<nn::SiLU>()
        .emplace<nn::Conv2d>(w2, w2, 3, 2, 1)
        .emplace<nn::SiLU>()
        .emplace<nn::Conv2d>(w2, LatentCode::kChannels, 1, 1, 0);
    decoder_.emplace<nn::Conv2d>(LatentCode::kChannels, w2, 3, 1, 1)
        .emplace<nn::SiLU>()
        .emplace<nn::Upsample>(2)
        .emplace<nn::Conv2d>(w2, w2, 3, 1, 1)
        .emplace<nn::SiLU>()
        .emplace<nn::Upsample>(2)
        .emplace<nn::Conv2d>(w2, w1, 3, 1, 1)
        .emplace<nn::SiLU>()
        .emplace<nn::Upsample>(2)
        .emplace<nn::Conv2d>(w1, 3, 3, 1, 1);
    params_.assign(encoder_.param_count() + decoder_.param_count(), 0.0);
    Rng rng = make_stream(seed, stream::kInit);
    encoder_.init_params(std::span(params_).first(encoder_.param_count()), rng);
    decoder_.init_params(std::span(params_).subspan(encoder_.param_count()), rng);
}

nn::Tensor ConvAutoencoder::encode_impl(const nn::Tensor& images, nn::Trace* trace) const {
    return encoder_.forward(parameters().first(encoder_.param_count()), images, trace);
}

nn::Tensor ConvAutoencoder::encode_backward_impl(const nn::Trace& trace, const nn::Tensor& dz,
                                                 std::span<double> dparams) const {
    std::span<double> dp = dparams.empty() ? dparams : dparams.first(encoder_.param_count());
    return encoder_.backward(parameters().first(encoder_.param_count()), trace, dz, dp, true);
}

nn::Tensor ConvAutoencoder::decode_impl(const nn::Tensor& z, nn::Trace* trace) const {
    return decoder_.forward(parameters().subspan(encoder_.param_count()), z, trace);
}

nn::Tensor ConvAutoencoder::decode_backward_impl(const nn::Trace& trace, const nn::Tensor& dy,
                                                 std::span<double> dparams) const {
    std::span<double> dp = dparams.empty() ? dparams : dparams.subspan(encoder_.param_count());
    return decoder_.backward(parameters().subspan(encoder_.param_count()), trace, dy, dp, true);
}

// --- PoolingCodec ------------------------------------------------------------

namespace {
// Columns are orthonormal in R^4 (first three Hadamard columns).
constexpr double kProjection[4][3] = {
    {0.5, 0.5, 0.5},
    {0.5, -0.5, 0.5},
    {0.5, 0.5, -0.5},
    {0.5, -0.5, -0.5},
};

// out[n][4] = P * in[n][3]
void project_up(const nn::Tensor& in, nn::Tensor& out) {
    out = nn::Tensor(in.n(), 4, in.h(), in.w());
    const std::size_t plane = in.shape().plane();
    for (int i = 0; i < in.n(); ++i)
        for (int o = 0; o < 4; ++o) {
            double* dst = out.sample(i).data() + o * plane;
            for (int c = 0; c < 3; ++c) {
                const double* src = in.sample(i).data() + c * plane;
                for (std::size_t p = 0; p < plane; ++p) dst[p] += kProjection[o][c] * src[p];
            }
        }
}

// out[n][3] = P^T * in[n][4]
void project_down(const nn::Tensor& in, nn::Tensor& out) {
    out = nn::Tensor(in.n(), 3, in.h(), in.w());
    const std::size_t plane = in.shape().plane();
    for (int i = 0; i < in.n(); ++i)
        for (int c = 0; c < 3; ++c) {
            double* dst = out.sample(i).data() + c * plane;
            for (int o = 0; o < 4; ++o) {
                const double* src = in.sample(i).data() + o * plane;
                for (std::size_t p = 0; p < plane; ++p) dst[p] += kProjection[o][c] * src[p];
            }
        }
}
}  // namespace

nn::Tensor PoolingCodec::encode_impl(const nn::Tensor& images, nn::Trace* trace) const {
    nn::Tensor pooled, z;
    nn::kernels::adaptive_avg_pool_forward(images, images.h() / 8, images.w() / 8, pooled);
    project_up(pooled, z);
    if (trace) trace->acts = {images, pooled, z};
    return z;
}

nn::Tensor PoolingCodec::encode_backward_impl(const nn::Trace& trace, const nn::Tensor& dz,
                                              std::span<double>) const {
    nn::Tensor dpooled, dx;
    project_down(dz, dpooled);
    nn::kernels::adaptive_avg_pool_backward(dpooled, trace.acts.at(0).shape(), dx);
    return dx;
}

nn::Tensor PoolingCodec::decode_impl(const nn::Tensor& z, nn::Trace* trace) const {
    nn::Tensor small, out;
    project_down(z, small);
    nn::kernels::resize_nearest_forward(small, z.h() * 8, z.w() * 8, out);
    if (trace) trace->acts = {z, small, out};
    return out;
}

nn::Tensor PoolingCodec::decode_backward_impl(const nn::Trace& trace, const nn::Tensor& dy,
                                              std::span<double>) const {
    nn::Tensor dsmall, dz;
    nn::kernels::resize_nearest_backward(dy, trace.acts.at(1).shape(), dsmall);
    project_up(dsmall, dz);
    return dz;
}

// --- registry & checkpoints ----------------------------------------------------

namespace {
std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}
std::map<std::string, CodecFactory>& registry() {
    static std::map<std::string, CodecFactory> r = [] {
        std::map<std::string, CodecFactory> init;
        init[ConvAutoencoder::kId] = [](const nlohmann::json& arch) -> std::unique_ptr<LatentCodec> {
            return std::make_unique<ConvAutoencoder>(arch.at("width").get<int>());
        };
        init[PoolingCodec::kId] = [](const nlohmann::json&) -> std::unique_ptr<LatentCodec> {
            return std::make_unique<PoolingCodec>();
        };
        return init;
    }();
    return r;
}
}  // namespace

void register_codec(const std::string& codec_id, CodecFactory factory) {
    std::lock_guard lock(registry_mutex());
    registry()[codec_id] = std::move(factory);
}

std::unique_ptr<LatentCodec> make_codec(const std::string& codec_id, const nlohmann::json& architecture) {
    CodecFactory factory;
    {
        std::lock_guard lock(registry_mutex());
        auto it = registry().find(codec_id);
        if (it == registry().end()) fail(ErrorKind::Config, "unknown codec_id '" + codec_id + "'");
        factory = it->second;
    }
    try {
        return factory(architecture);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, "bad architecture for codec '" + codec_id + "': " + e.what());
    }
}

nn::CheckpointSection codec_section(const LatentCodec& codec) {
    nn::CheckpointSection s;
    s.name = "codec";
    s.meta = {{"codec_id", codec.codec_id()},
              {"architecture", codec.architecture()},
              {"frozen", codec.frozen()},
              {"param_hash", codec.parameter_hash()}};
    s.params.assign(codec.parameters().begin(), codec.parameters().end());
    return s;
}

std::unique_ptr<LatentCodec> codec_from_section(const nn::CheckpointSection& section) {
    std::unique_ptr<LatentCodec> codec;
    try {
        codec = make_codec(section.meta.at("codec_id").get<std::string>(), section.meta.at("architecture"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, std::string("codec section metadata incomplete: ") + e.what());
    }
    if (codec->parameters().size() != section.params.size()) {
        fail(ErrorKind::Io, "codec parameter count mismatch: expected " + std::to_string(codec->parameters().size()) +
                                ", checkpoint has " + std::to_string(section.params.size()));
    }
    if (!section.params.empty()) {
        auto dst = codec->mutable_parameters();
        std::copy(section.params.begin(), section.params.end(), dst.begin());
    }
    if (section.meta.value("param_hash", "") != codec->parameter_hash()) {
        fail(ErrorKind::Io, "codec parameter hash mismatch");
    }
    if (section.meta.value("frozen", true)) codec->freeze();
    return codec;
}

void save_codec(const LatentCodec& codec, const std::filesystem::path& path) {
    nn::Checkpoint ckpt;
    ckpt.put(codec_section(codec));
    nn::save_checkpoint(ckpt, path);
}

std::unique_ptr<LatentCodec> load_codec(const std::filesystem::path& path) {
    return codec_from_section(nn::load_checkpoint(path).section("codec"));
}

// --- pretraining -------------------------------------------------------------

std::unique_ptr<ConvAutoencoder> pretrain_reference_codec(const std::vector<ImageTensor>& images,
                                                          const RunConfig& config, PretrainReport* report,
                                                          const std::function<void(int, double)>& on_log) {
    if (static_cast<int>(images.size()) < config.min_dataset_size) {
        fail(ErrorKind::Config, "codec pretraining needs >= " + std::to_string(config.min_dataset_size) +
                                    " images, got " + std::to_string(images.size()));
    }
    auto codec = std::make_unique<ConvAutoencoder>(config.codec_width, config.seed);

    // Hold out 5% for the reconstruction gate.
    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split = make_stream(config.seed, stream::kSplit);
    std::shuffle(order.begin(), order.end(), split);
    const std::size_t n_hold = std::max<std::size_t>(16, images.size() / 20);
    std::vector<ImageTensor> heldout;
    for (std::size_t i = 0; i < n_hold; ++i) heldout.push_back(images[order[i]]);
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());

    auto params = codec->mutable_parameters();
    std::vector<double> grads(params.size());
    nn::AdamW opt(params.size(), {.lr = config.codec_learning_rate, .weight_decay = 0.0});
    Rng data = make_stream(config.seed, stream::kData);
    const int batch = config.codec_batch_size;
    const int steps = config.codec_steps;
    double ema_loss = 0.0;

    std::vector<ImageTensor> batch_images(static_cast<std::size_t>(batch));
    for (int step = 0; step < steps; ++step) {
        for (int b = 0; b < batch; ++b) batch_images[b] = images[train_idx[data() % train_idx.size()]];
        const nn::Tensor x = to_tensor(std::span<const ImageTensor>(batch_images));

        nn::Trace enc_trace, dec_trace;
        const nn::Tensor z = codec->encode(x, &enc_trace);
        const nn::Tensor y = codec->decode_raw(z, &dec_trace);

        nn::Tensor dy(y.shape());
        double loss = 0.0;
        const double inv = 1.0 / static_cast<double>(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double diff = y.vec()[i] - x.vec()[i];
            loss += diff * diff * inv;
            dy.vec()[i] = 2.0 * diff * inv;
        }
        if (!std::isfinite(loss)) fail(ErrorKind::Numeric, "codec pretraining loss is not finite");

        std::fill(grads.begin(), grads.end(), 0.0);
        const nn::Tensor dz = codec->decode_raw_backward(dec_trace, dy, grads);
        codec->encode_raw_backward(enc_trace, dz, grads);

        // Cosine decay to 5% of the base rate.
        const double progress = static_cast<double>(step) / std::max(1, steps);
        const double lr_scale = 0.05 + 0.95 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        opt.set_lr(config.codec_learning_rate * lr_scale);
        opt.step(params, grads);

        ema_loss = step == 0 ? loss : 0.98 * ema_loss + 0.02 * loss;
        if (on_log && (step % 500 == 0 || step + 1 == steps)) on_log(step, ema_loss);
    }
    codec->freeze();
    if (report) {
        report->steps = steps;
        report->final_train_mse = ema_loss;
        report->heldout_psnr = reconstruction_psnr(*codec, heldout);
        report->heldout_count = static_cast<int>(heldout.size());
    }
    return codec;
}

double reconstruction_psnr(const LatentCodec& codec, const std::vector<ImageTensor>& images) {
    if (images.empty()) fail(ErrorKind::InvalidArgument, "no images");
    double total = 0.0;
    constexpr std::size_t kChunk = 32;
    for (std::size_t start = 0; start < images.size(); start += kChunk) {
        const std::size_t end = std::min(images.size(), start + kChunk);
        std::span<const ImageTensor> chunk(images.data() + start, end - start);
        const nn::Tensor recon = codec.decode(codec.encode(to_tensor(chunk)));
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            total += metrics::psnr(chunk[i], image_from_tensor(recon, static_cast<int>(i)));
        }
    }
    return total / static_cast<double>(images.size());
}

}  // namespace stego::codec
