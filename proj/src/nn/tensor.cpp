#include "stego/nn/tensor.hpp"

#include <algorithm>

#include "stego/core/errors.hpp"

namespace stego::nn {

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) +
           ")";
}

void Tensor::reshape(Shape s) {
    if (s.size() != data_.size()) fail(ErrorKind::InvalidArgument, "reshape " + shape_.str() + " -> " + s.str());
    shape_ = s;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& operator+=(Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) fail(ErrorKind::InvalidArgument, "tensor add shape mismatch");
    double* pa = a.data();
    const double* pb = b.data();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) pa[i] += pb[i];
    return a;
}

Tensor slice_sample(const Tensor& t, int i) {
    Tensor out(1, t.c(), t.h(), t.w());
    auto src = t.sample(i);
    std::copy(src.begin(), src.end(), out.data());
    return out;
}

Tensor stack(std::span<const Tensor> samples) {
    if (samples.empty()) fail(ErrorKind::InvalidArgument, "stack of zero tensors");
    int n = 0;
    const Shape s = samples.front().shape();
    for (const auto& t : samples) {
        if (t.c() != s.c || t.h() != s.h || t.w() != s.w) fail(ErrorKind::InvalidArgument, "stack shape mismatch");
        n += t.n();
    }
    Tensor out(n, s.c, s.h, s.w);
    double* dst = out.data();
    for (const auto& t : samples) dst = std::copy(t.vec().begin(), t.vec().end(), dst);
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        fail(ErrorKind::InvalidArgument, "concat shape mismatch " + a.shape().str() + " " + b.shape().str());
    }
    Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
    for (int i = 0; i < a.n(); ++i) {
        auto sa = a.sample(i);
        auto sb = b.sample(i);
        double* dst = out.sample(i).data();
        dst = std::copy(sa.begin(), sa.end(), dst);
        std::copy(sb.begin(), sb.end(), dst);
    }
    return out;
}

void split_channels(const Tensor& t, int first_channels, Tensor& a, Tensor& b) {
    if (first_channels < 0 || first_channels > t.c()) fail(ErrorKind::InvalidArgument, "split channel count");
    a = Tensor(t.n(), first_channels, t.h(), t.w());
    b = Tensor(t.n(), t.c() - first_channels, t.h(), t.w());
    const std::size_t na = a.shape().sample_size();
    for (int i = 0; i < t.n(); ++i) {
        auto src = t.sample(i);
        std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(na), a.sample(i).data());
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(na), src.end(), b.sample(i).data());
    }
}

}  // namespace stego::nn
