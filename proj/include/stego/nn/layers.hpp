#pragma once

#include <memory>
#include <span>
#include <vector>

#include "stego/core/rng.hpp"
#include "stego/nn/kernels.hpp"
#include "stego/nn/tensor.hpp"

namespace stego::nn {

// Stateless layer: parameters live in a caller-owned flat buffer, so a network
// is safe to evaluate concurrently from several threads.
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::size_t param_count() const { return 0; }
    virtual void init_params(std::span<double> /*params*/, Rng& /*rng*/) const {}
    virtual void forward(std::span<const double> params, const Tensor& x, Tensor& y) const = 0;
    /// Accumulates parameter gradients into `dparams`; writes `dx` when non-null.
    virtual void backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                          Tensor* dx, std::span<double> dparams) const = 0;
};

class Conv2d final : public Layer {
public:
    Conv2d(int in, int out, int kernel, int stride, int pad, bool zero_init = false)
        : g_{in, out, kernel, stride, pad}, zero_init_(zero_init) {}
    std::size_t param_count() const override { return g_.weight_count() + g_.out_channels; }
    void init_params(std::span<double> params, Rng& rng) const override;
    void forward(std::span<const double> params, const Tensor& x, Tensor& y) const override;
    void backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy, Tensor* dx,
                  std::span<double> dparams) const override;
    const ConvGeometry& geometry() const { return g_; }

private:
    ConvGeometry g_;
    bool zero_init_;
};

class Linear final : public Layer {
public:
    Linear(int in, int out) : in_(in), out_(out) {}
    std::size_t param_count() const override { return static_cast<std::size_t>(in_) * out_ + out_; }
    void init_params(std::span<double> params, Rng& rng) const override;
    void forward(std::span<const double> params, const Tensor& x, Tensor& y) const override;
    void backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy, Tensor* dx,
                  std::span<double> dparams) const override;

private:
    int in_, out_;
};

class SiLU final : public Layer {
public:
    void forward(std::span<const double>, const Tensor& x, Tensor& y) const override { kernels::silu_forward(x, y); }
    void backward(std::span<const double>, const Tensor& x, const Tensor&, const Tensor& dy, Tensor* dx,
                  std::span<double>) const override {
        if (dx) kernels::silu_backward(x, dy, *dx);
    }
};

// Nearest-neighbour resize by an integer factor.
class Upsample final : public Layer {
public:
    explicit Upsample(int factor) : factor_(factor) {}
    void forward(std::span<const double>, const Tensor& x, Tensor& y) const override {
        kernels::resize_nearest_forward(x, x.h() * factor_, x.w() * factor_, y);
    }
    void backward(std::span<const double>, const Tensor& x, const Tensor&, const Tensor& dy, Tensor* dx,
                  std::span<double>) const override {
        if (dx) kernels::resize_nearest_backward(dy, x.shape(), *dx);
    }

private:
    int factor_;
};

// Average pool to ceil(h/2) x ceil(w/2); identity on 1x1 planes.
class Downsample final : public Layer {
public:
    void forward(std::span<const double>, const Tensor& x, Tensor& y) const override {
        kernels::adaptive_avg_pool_forward(x, (x.h() + 1) / 2, (x.w() + 1) / 2, y);
    }
    void backward(std::span<const double>, const Tensor& x, const Tensor&, const Tensor& dy, Tensor* dx,
                  std::span<double>) const override {
        if (dx) kernels::adaptive_avg_pool_backward(dy, x.shape(), *dx);
    }
};

class GlobalAvgPool final : public Layer {
public:
    void forward(std::span<const double>, const Tensor& x, Tensor& y) const override {
        kernels::adaptive_avg_pool_forward(x, 1, 1, y);
    }
    void backward(std::span<const double>, const Tensor& x, const Tensor&, const Tensor& dy, Tensor* dx,
                  std::span<double>) const override {
        if (dx) kernels::adaptive_avg_pool_backward(dy, x.shape(), *dx);
    }
};

// Activations recorded by Sequential::forward: acts[0] is the input,
// acts[i + 1] the output of layer i.
struct Trace {
    std::vector<Tensor> acts;
    const Tensor& output() const { return acts.back(); }
};

class Sequential {
public:
    Sequential& add(std::unique_ptr<Layer> layer);
    template <typename L, typename... Args>
    Sequential& emplace(Args&&... args) {
        return add(std::make_unique<L>(std::forward<Args>(args)...));
    }

    std::size_t param_count() const { return total_; }
    std::size_t layer_count() const { return layers_.size(); }
    void init_params(std::span<double> params, Rng& rng) const;

    /// Runs the chain; fills `trace` when non-null (needed for backward).
    Tensor forward(std::span<const double> params, const Tensor& x, Trace* trace = nullptr) const;

    /// Backpropagates `dy` through the recorded trace. Returns dL/dx when `want_dx`.
    Tensor backward(std::span<const double> params, const Trace& trace, const Tensor& dy, std::span<double> dparams,
                    bool want_dx = true) const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
};

}  // namespace stego::nn
