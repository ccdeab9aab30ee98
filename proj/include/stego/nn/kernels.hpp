#pragma once

#include <span>

#include "stego/nn/tensor.hpp"

// Compute kernels for the small convnets used throughout the project.
//
// `kernels::` is the production path: im2col + register-friendly loops, parallel
// over the batch with OpenMP. Reductions across the batch (weight gradients)
// are accumulated per sample and summed in sample order, so results are
// bit-identical for any thread count.
//
// `reference::` is a direct serial transcription of the same math, kept for
// tests and the kernel benchmark.

namespace stego::nn {

struct ConvGeometry {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;

    int out_size(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
    std::size_t weight_count() const {
        return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
    }
};

namespace kernels {

// weight layout: [out][in][k][k]; y is resized to (n, out, oh, ow).
void conv2d_forward(const ConvGeometry& g, std::span<const double> weight, std::span<const double> bias,
                    const Tensor& x, Tensor& y);

// Accumulates into dweight/dbias; writes dx when non-null.
void conv2d_backward(const ConvGeometry& g, std::span<const double> weight, const Tensor& x, const Tensor& dy,
                     Tensor* dx, std::span<double> dweight, std::span<double> dbias);

// x is viewed as (n, in) regardless of its c/h/w split; y is (n, out, 1, 1).
void linear_forward(int in, int out, std::span<const double> weight, std::span<const double> bias, const Tensor& x,
                    Tensor& y);
void linear_backward(int in, int out, std::span<const double> weight, const Tensor& x, const Tensor& dy, Tensor* dx,
                     std::span<double> dweight, std::span<double> dbias);

void silu_forward(const Tensor& x, Tensor& y);
void silu_backward(const Tensor& x, const Tensor& dy, Tensor& dx);

void resize_nearest_forward(const Tensor& x, int out_h, int out_w, Tensor& y);
void resize_nearest_backward(const Tensor& dy, const Shape& in_shape, Tensor& dx);

void adaptive_avg_pool_forward(const Tensor& x, int out_h, int out_w, Tensor& y);
void adaptive_avg_pool_backward(const Tensor& dy, const Shape& in_shape, Tensor& dx);

}  // namespace kernels

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> weight, std::span<const double> bias,
                    const Tensor& x, Tensor& y);
void conv2d_backward(const ConvGeometry& g, std::span<const double> weight, const Tensor& x, const Tensor& dy,
                     Tensor* dx, std::span<double> dweight, std::span<double> dbias);
void linear_forward(int in, int out, std::span<const double> weight, std::span<const double> bias, const Tensor& x,
                    Tensor& y);
void linear_backward(int in, int out, std::span<const double> weight, const Tensor& x, const Tensor& dy, Tensor* dx,
                     std::span<double> dweight, std::span<double> dbias);

}  // namespace reference

/// Sets the OpenMP worker count (no-op without OpenMP). Values < 1 are ignored.
void set_num_workers(int workers);
int num_workers();

}  // namespace stego::nn
