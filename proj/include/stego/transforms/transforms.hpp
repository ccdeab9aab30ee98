#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stego/core/config.hpp"
#include "stego/core/image.hpp"
#include "stego/core/rng.hpp"
#include "stego/nn/tensor.hpp"

namespace stego::transforms {

enum class Kind { None, GaussianBlur, GaussianNoise, Rgb2Bgr, Jpeg };

inline constexpr std::array<Kind, 5> kAllKinds = {Kind::None, Kind::GaussianBlur, Kind::GaussianNoise, Kind::Rgb2Bgr,
                                                  Kind::Jpeg};

const char* to_string(Kind k);
Kind kind_from_string(const std::string& name);

struct TransformSpec {
    Kind kind = Kind::None;
    int blur_kernel = 5;
    double blur_sigma = 2.0;
    double noise_mean = 0.0;
    double noise_sigma = 0.2;
    int jpeg_quality = 80;
    std::uint64_t seed = 0;  // noise draw

    /// Throws invalid-argument for out-of-range parameters.
    void validate() const;
    std::string describe() const;

    static TransformSpec of(Kind kind, const RunConfig& config, std::uint64_t seed = 0);
};

/// Normalized 1-D Gaussian taps; `size` odd.
std::vector<double> gaussian_kernel(int size, double sigma);

/// IJG quality-scaled quantization table (64 entries, row-major) for luma or chroma.
std::array<double, 64> quant_table(int quality, bool chroma);

// Record of a batched application, needed for backward.
struct TransformTrace {
    TransformSpec spec;
    nn::Tensor raw;     // output before the final clamp
    nn::Tensor coeffs;  // jpeg only: quantized-domain DCT coefficients before rounding
};

/// Applies `spec` to (n, 3, H, W) images in [0, 1]. With `differentiable`,
/// JPEG uses the soft-rounding surrogate; otherwise each image goes through a
/// real 8-bit JPEG codec. Output is clamped into [0, 1].
nn::Tensor apply_batch(const TransformSpec& spec, const nn::Tensor& images, bool differentiable,
                       TransformTrace* trace = nullptr);

/// Gradient w.r.t. the input of a differentiable apply_batch. Noise is a
/// constant offset; the clamp passes gradient only where raw output was in [0, 1].
nn::Tensor backward_batch(const TransformTrace& trace, const nn::Tensor& dy);

ImageTensor apply(const TransformSpec& spec, const ImageTensor& image, bool differentiable);

/// One of the five kinds, uniformly, with parameters from `config` and a fresh noise seed.
TransformSpec sample_train_transform(Rng& rng, const RunConfig& config);

}  // namespace stego::transforms
