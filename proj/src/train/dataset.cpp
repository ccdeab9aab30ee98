#include "stego/train/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "stego/core/errors.hpp"

namespace stego::train {

Dataset load_dataset(const std::filesystem::path& dir, int height, int width) {
    Dataset ds;
    for (const auto& path : list_images(dir)) {
        ds.images.push_back(load_image(path, height, width));
        ds.names.push_back(path.filename().string());
    }
    if (ds.images.empty()) fail(ErrorKind::Usage, "no images found in " + dir.string());
    return ds;
}

namespace {
double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
}  // namespace

ImageTensor procedural_image(Rng& rng, int height, int width, ImageStyle style) {
    const double scale = std::max(height, width);
    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = uniform(rng, 0.2, 0.8);
        gx[c] = uniform(rng, -0.3, 0.3);
        gy[c] = uniform(rng, -0.3, 0.3);
    }
    struct Blob {
        double cx, cy, sx, sy, rot, amp[3];
    };
    const int n_blobs = 2 + static_cast<int>(uniform01(rng) * 3);
    std::vector<Blob> blobs(static_cast<std::size_t>(n_blobs));
    for (auto& b : blobs) {
        b.cx = uniform(rng, 0.0, width);
        b.cy = uniform(rng, 0.0, height);
        b.sx = uniform(rng, 0.15, 0.35) * scale;
        b.sy = uniform(rng, 0.15, 0.35) * scale;
        b.rot = uniform(rng, 0.0, std::numbers::pi);
        for (double& a : b.amp) a = uniform(rng, -0.35, 0.35);
    }
    double stripe_f = 0, stripe_phase = 0, stripe_dir = 0, stripe_amp[3] = {0, 0, 0};
    if (style == ImageStyle::Textured) {
        stripe_f = uniform(rng, 0.15, 0.6);
        stripe_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        stripe_dir = uniform(rng, 0.0, std::numbers::pi);
        for (double& a : stripe_amp) a = uniform(rng, 0.03, 0.1);
    }

    std::vector<double> data(static_cast<std::size_t>(height) * width * 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double u = x / scale - 0.5, v = y / scale - 0.5;
            double px[3];
            for (int c = 0; c < 3; ++c) px[c] = base[c] + gx[c] * u + gy[c] * v;
            for (const auto& b : blobs) {
                const double dx = x - b.cx, dy = y - b.cy;
                const double rx = std::cos(b.rot) * dx + std::sin(b.rot) * dy;
                const double ry = -std::sin(b.rot) * dx + std::cos(b.rot) * dy;
                const double g = std::exp(-0.5 * (rx * rx / (b.sx * b.sx) + ry * ry / (b.sy * b.sy)));
                for (int c = 0; c < 3; ++c) px[c] += b.amp[c] * g;
            }
            if (style == ImageStyle::Textured) {
                const double t = std::cos(stripe_dir) * x + std::sin(stripe_dir) * y;
                const double s = std::sin(stripe_f * t + stripe_phase);
                const double grain = uniform(rng, -0.02, 0.02);
                for (int c = 0; c < 3; ++c) px[c] += stripe_amp[c] * s + grain;
            }
            for (int c = 0; c < 3; ++c) data[(static_cast<std::size_t>(y) * width + x) * 3 + c] = std::clamp(px[c], 0.0, 1.0);
        }
    }
    return ImageTensor(height, width, std::move(data));
}

void write_procedural_dataset(const std::filesystem::path& dir, int count, int height, int width, std::uint64_t seed,
                              ImageStyle style) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    Rng rng = make_stream(seed, stream::kData);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img_%05d.png", i);
        save_image(procedural_image(rng, height, width, style), dir / name);
    }
}

Split split_dataset(std::size_t count, int probe_size, std::uint64_t seed) {
    if (probe_size < 0 || static_cast<std::size_t>(probe_size) >= count) {
        fail(ErrorKind::Config, "probe_size " + std::to_string(probe_size) + " leaves no training images out of " +
                                    std::to_string(count));
    }
    std::vector<int> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = static_cast<int>(i);
    Rng rng = make_stream(seed, stream::kSplit);
    std::shuffle(order.begin(), order.end(), rng);
    Split s;
    s.probe.assign(order.begin(), order.begin() + probe_size);
    s.train.assign(order.begin() + probe_size, order.end());
    std::sort(s.probe.begin(), s.probe.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

}  // namespace stego::train
