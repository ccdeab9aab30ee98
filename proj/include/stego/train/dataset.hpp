#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stego/core/image.hpp"
#include "stego/core/rng.hpp"

namespace stego::train {

struct Dataset {
    std::vector<ImageTensor> images;
    std::vector<std::string> names;

    std::size_t size() const { return images.size(); }
};

/// Loads every png/jpg in `dir` resized to height x width. Empty directory -> usage-error.
Dataset load_dataset(const std::filesystem::path& dir, int height, int width);

enum class ImageStyle { Smooth, Textured };

/// Random colour gradient with soft elliptical blobs; Textured adds
/// mid-frequency stripes and fine grain.
ImageTensor procedural_image(Rng& rng, int height, int width, ImageStyle style = ImageStyle::Smooth);

/// Writes `count` PNGs named img_00000.png ... into `dir` (created if needed).
void write_procedural_dataset(const std::filesystem::path& dir, int count, int height, int width, std::uint64_t seed,
                              ImageStyle style = ImageStyle::Smooth);

struct Split {
    std::vector<int> train;
    std::vector<int> probe;
};

/// Seeded permutation; the first `probe_size` indices form the probe set.
Split split_dataset(std::size_t count, int probe_size, std::uint64_t seed);

}  // namespace stego::train
