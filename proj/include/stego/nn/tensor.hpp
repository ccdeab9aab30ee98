#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stego::nn {

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
    std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
    std::string str() const;
};

// Dense NCHW tensor of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape_(s), data_(s.size(), fill) {}
    Tensor(int n, int c, int h, int w, double fill = 0.0) : Tensor(Shape{n, c, h, w}, fill) {}

    const Shape& shape() const noexcept { return shape_; }
    int n() const noexcept { return shape_.n; }
    int c() const noexcept { return shape_.c; }
    int h() const noexcept { return shape_.h; }
    int w() const noexcept { return shape_.w; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& vec() noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    std::span<double> sample(int i) {
        return {data_.data() + static_cast<std::size_t>(i) * shape_.sample_size(), shape_.sample_size()};
    }
    std::span<const double> sample(int i) const {
        return {data_.data() + static_cast<std::size_t>(i) * shape_.sample_size(), shape_.sample_size()};
    }

    double& at(int i, int ch, int y, int x) {
        return data_[((static_cast<std::size_t>(i) * shape_.c + ch) * shape_.h + y) * shape_.w + x];
    }
    double at(int i, int ch, int y, int x) const {
        return data_[((static_cast<std::size_t>(i) * shape_.c + ch) * shape_.h + y) * shape_.w + x];
    }

    void reshape(Shape s);
    void fill(double v);

private:
    Shape shape_{};
    std::vector<double> data_;
};

Tensor& operator+=(Tensor& a, const Tensor& b);

/// Copies sample `i` of `t` into a single-sample tensor.
Tensor slice_sample(const Tensor& t, int i);

/// Stacks single-sample tensors of equal shape along the batch axis.
Tensor stack(std::span<const Tensor> samples);

/// Concatenates along channels; batch and spatial dims must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Inverse of concat_channels: the first `first_channels` go to `a`, the rest to `b`.
void split_channels(const Tensor& t, int first_channels, Tensor& a, Tensor& b);

}  // namespace stego::nn
