#include "stego/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "stego/core/errors.hpp"

namespace stego {

namespace {

void check_image_dims(int height, int width) {
    if (height <= 0 || width <= 0 || height % 8 != 0 || width % 8 != 0) {
        fail(ErrorKind::InvalidArgument, "image dims " + std::to_string(height) + "x" + std::to_string(width) +
                                             " must be positive multiples of 8");
    }
}

cv::Mat to_mat8(const ImageTensor& image) {
    cv::Mat mat(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
                // OpenCV stores BGR.
                row[x][2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return mat;
}

ImageTensor from_mat8(const cv::Mat& bgr) {
    std::vector<double> data(static_cast<std::size_t>(bgr.rows) * bgr.cols * 3);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            for (int c = 0; c < 3; ++c) {
                data[(static_cast<std::size_t>(y) * bgr.cols + x) * 3 + c] = row[x][2 - c] / 255.0;
            }
        }
    }
    return ImageTensor(bgr.rows, bgr.cols, std::move(data));
}

}  // namespace

ImageTensor::ImageTensor(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    check_image_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * width * 3) {
        fail(ErrorKind::InvalidArgument, "image data size does not match dims");
    }
    for (double v : data_) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) fail(ErrorKind::InvalidArgument, "image value outside [0,1]");
    }
}

ImageTensor::ImageTensor(int height, int width, double fill)
    : ImageTensor(height, width, std::vector<double>(static_cast<std::size_t>(height) * width * 3, fill)) {}

LatentCode::LatentCode(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (height <= 0 || width <= 0) fail(ErrorKind::InvalidArgument, "latent dims must be positive");
    if (data_.size() != static_cast<std::size_t>(height) * width * kChannels) {
        fail(ErrorKind::InvalidArgument, "latent data size does not match dims");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "latent value is not finite");
    }
}

namespace {

template <typename T>
nn::Tensor interleaved_to_tensor(std::span<const T> items, int channels) {
    if (items.empty()) fail(ErrorKind::InvalidArgument, "empty batch");
    const int h = items.front().height(), w = items.front().width();
    nn::Tensor out(static_cast<int>(items.size()), channels, h, w);
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].height() != h || items[i].width() != w) fail(ErrorKind::InvalidArgument, "ragged batch");
        auto src = items[i].data();
        for (int c = 0; c < channels; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.at(static_cast<int>(i), c, y, x) = src[(static_cast<std::size_t>(y) * w + x) * channels + c];
    }
    return out;
}

std::vector<double> tensor_to_interleaved(const nn::Tensor& t, int i, bool clamp01) {
    std::vector<double> data(t.shape().sample_size());
    const int c_n = t.c(), h = t.h(), w = t.w();
    for (int c = 0; c < c_n; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = t.at(i, c, y, x);
                if (clamp01) v = std::clamp(v, 0.0, 1.0);
                data[(static_cast<std::size_t>(y) * w + x) * c_n + c] = v;
            }
    return data;
}

}  // namespace

nn::Tensor to_tensor(std::span<const ImageTensor> images) { return interleaved_to_tensor(images, 3); }
nn::Tensor to_tensor(std::span<const LatentCode> latents) {
    return interleaved_to_tensor(latents, LatentCode::kChannels);
}
nn::Tensor to_tensor(const ImageTensor& image) { return to_tensor(std::span<const ImageTensor>(&image, 1)); }
nn::Tensor to_tensor(const LatentCode& latent) { return to_tensor(std::span<const LatentCode>(&latent, 1)); }

ImageTensor image_from_tensor(const nn::Tensor& t, int i) {
    if (t.c() != 3) fail(ErrorKind::InvalidArgument, "image tensor must have 3 channels, got " + t.shape().str());
    return ImageTensor(t.h(), t.w(), tensor_to_interleaved(t, i, true));
}

LatentCode latent_from_tensor(const nn::Tensor& t, int i) {
    if (t.c() != LatentCode::kChannels) {
        fail(ErrorKind::InvalidArgument, "latent tensor must have 4 channels, got " + t.shape().str());
    }
    return LatentCode(t.h(), t.w(), tensor_to_interleaved(t, i, false));
}

ImageTensor load_image(const std::filesystem::path& path, int height, int width) {
    if (height <= 0 || width <= 0 || height % 8 != 0 || width % 8 != 0) {
        fail(ErrorKind::Config, "target size " + std::to_string(height) + "x" + std::to_string(width) +
                                    " is not divisible by 8");
    }
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty()) fail(ErrorKind::Io, "cannot read image " + path.string());
    if (mat.rows != height || mat.cols != width) {
        cv::Mat resized;
        cv::resize(mat, resized, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
        mat = resized;
    }
    return from_mat8(mat);
}

void save_image(const ImageTensor& image, const std::filesystem::path& path) {
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), to_mat8(image));
    } catch (const cv::Exception& e) {
        fail(ErrorKind::Io, "cannot write image " + path.string() + ": " + e.what());
    }
    if (!ok) fail(ErrorKind::Io, "cannot write image " + path.string());
}

ImageTensor encode_decode(const ImageTensor& image, const std::string& format, int jpeg_quality) {
    std::vector<std::uint8_t> buf;
    std::vector<int> params;
    std::string ext;
    if (format == "png") {
        ext = ".png";
    } else if (format == "jpeg") {
        ext = ".jpg";
        params = {cv::IMWRITE_JPEG_QUALITY, jpeg_quality};
    } else {
        fail(ErrorKind::InvalidArgument, "unknown image format " + format);
    }
    if (!cv::imencode(ext, to_mat8(image), buf, params)) fail(ErrorKind::Io, "in-memory encode failed");
    cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (decoded.empty()) fail(ErrorKind::Io, "in-memory decode failed");
    return from_mat8(decoded);
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) fail(ErrorKind::Io, "not a directory: " + dir.string());
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace stego
