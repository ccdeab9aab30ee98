#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "stego/nn/tensor.hpp"

namespace stego {

// H x W x 3 image, interleaved RGB, values in [0, 1]. H and W are multiples of 8.
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int height, int width, std::vector<double> data);
    ImageTensor(int height, int width, double fill);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    static constexpr int channels() noexcept { return 3; }

    double at(int y, int x, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

// (H/8) x (W/8) x 4 latent, interleaved channels. Values finite.
class LatentCode {
public:
    static constexpr int kChannels = 4;

    LatentCode() = default;
    LatentCode(int height, int width, std::vector<double> data);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    double at(int y, int x, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
    }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const LatentCode&, const LatentCode&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Batch conversions between interleaved domain types and planar NCHW tensors.
nn::Tensor to_tensor(std::span<const ImageTensor> images);
nn::Tensor to_tensor(std::span<const LatentCode> latents);
nn::Tensor to_tensor(const ImageTensor& image);
nn::Tensor to_tensor(const LatentCode& latent);

/// Converts sample `i`; image values are clamped into [0, 1].
ImageTensor image_from_tensor(const nn::Tensor& t, int i = 0);
LatentCode latent_from_tensor(const nn::Tensor& t, int i = 0);

/// Decodes PNG/JPEG, resizes (bilinear) to height x width, normalizes to [0, 1].
ImageTensor load_image(const std::filesystem::path& path, int height, int width);

/// Clamps to [0, 1], quantizes to 8 bits and writes PNG or JPEG based on the extension.
void save_image(const ImageTensor& image, const std::filesystem::path& path);

/// 8-bit RGB round trip through an in-memory codec ("png" or "jpeg").
ImageTensor encode_decode(const ImageTensor& image, const std::string& format, int jpeg_quality = 95);

/// Sorted list of image files (png/jpg/jpeg) in a directory.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace stego
