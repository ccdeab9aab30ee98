#include "stego/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "stego/core/errors.hpp"

namespace stego::nn {

namespace {
// Symmetric uniform init with variance 2/fan_in scaled down for SiLU nets.
void uniform_init(std::span<double> w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(3.0 / fan_in);
    for (double& v : w) v = (2.0 * uniform01(rng) - 1.0) * bound;
}
}  // namespace

void Conv2d::init_params(std::span<double> params, Rng& rng) const {
    auto w = params.first(g_.weight_count());
    auto b = params.subspan(g_.weight_count());
    std::fill(b.begin(), b.end(), 0.0);
    if (zero_init_) {
        std::fill(w.begin(), w.end(), 0.0);
        return;
    }
    uniform_init(w, g_.in_channels * g_.kernel * g_.kernel, rng);
}

void Conv2d::forward(std::span<const double> params, const Tensor& x, Tensor& y) const {
    kernels::conv2d_forward(g_, params.first(g_.weight_count()), params.subspan(g_.weight_count()), x, y);
}

void Conv2d::backward(std::span<const double> params, const Tensor& x, const Tensor&, const Tensor& dy, Tensor* dx,
                      std::span<double> dparams) const {
    std::span<double> dw, db;
    if (!dparams.empty()) {
        dw = dparams.first(g_.weight_count());
        db = dparams.subspan(g_.weight_count());
    }
    kernels::conv2d_backward(g_, params.first(g_.weight_count()), x, dy, dx, dw, db);
}

void Linear::init_params(std::span<double> params, Rng& rng) const {
    const std::size_t nw = static_cast<std::size_t>(in_) * out_;
    uniform_init(params.first(nw), in_, rng);
    std::fill(params.begin() + static_cast<std::ptrdiff_t>(nw), params.end(), 0.0);
}

void Linear::forward(std::span<const double> params, const Tensor& x, Tensor& y) const {
    const std::size_t nw = static_cast<std::size_t>(in_) * out_;
    kernels::linear_forward(in_, out_, params.first(nw), params.subspan(nw), x, y);
}

void Linear::backward(std::span<const double> params, const Tensor& x, const Tensor&, const Tensor& dy, Tensor* dx,
                      std::span<double> dparams) const {
    const std::size_t nw = static_cast<std::size_t>(in_) * out_;
    std::span<double> dw, db;
    if (!dparams.empty()) {
        dw = dparams.first(nw);
        db = dparams.subspan(nw);
    }
    kernels::linear_backward(in_, out_, params.first(nw), x, dy, dx, dw, db);
}

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
    offsets_.push_back(total_);
    total_ += layer->param_count();
    layers_.push_back(std::move(layer));
    return *this;
}

void Sequential::init_params(std::span<double> params, Rng& rng) const {
    if (params.size() != total_) fail(ErrorKind::InvalidArgument, "parameter buffer size mismatch");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->init_params(params.subspan(offsets_[i], layers_[i]->param_count()), rng);
    }
}

Tensor Sequential::forward(std::span<const double> params, const Tensor& x, Trace* trace) const {
    if (params.size() != total_) fail(ErrorKind::InvalidArgument, "parameter buffer size mismatch");
    if (trace) {
        trace->acts.resize(layers_.size() + 1);
        trace->acts[0] = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->forward(params.subspan(offsets_[i], layers_[i]->param_count()), trace->acts[i],
                                trace->acts[i + 1]);
        }
        return trace->acts.back();
    }
    Tensor cur = x, next;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->forward(params.subspan(offsets_[i], layers_[i]->param_count()), cur, next);
        std::swap(cur, next);
    }
    return cur;
}

Tensor Sequential::backward(std::span<const double> params, const Trace& trace, const Tensor& dy,
                            std::span<double> dparams, bool want_dx) const {
    if (trace.acts.size() != layers_.size() + 1) fail(ErrorKind::InvalidArgument, "trace does not match network");
    Tensor grad = dy, next;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto n = layers_[li]->param_count();
        std::span<double> dp = dparams.empty() ? std::span<double>{} : dparams.subspan(offsets_[li], n);
        const bool need_dx = want_dx || li > 0;
        layers_[li]->backward(params.subspan(offsets_[li], n), trace.acts[li], trace.acts[li + 1], grad,
                              need_dx ? &next : nullptr, dp);
        if (need_dx) std::swap(grad, next);
    }
    return want_dx ? grad : Tensor{};
}

}  // namespace stego::nn
