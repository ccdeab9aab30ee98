#pragma once

#include <span>
#include <vector>

namespace stego::nn {

// Decoupled-weight-decay Adam over one flat parameter buffer.
class AdamW {
public:
    struct Options {
        double lr = 8e-5;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW(std::size_t size, Options opts) : opts_(opts), m_(size, 0.0), v_(size, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads);
    long steps() const { return t_; }
    const Options& options() const { return opts_; }
    void set_lr(double lr) { opts_.lr = lr; }

private:
    Options opts_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

double global_norm(std::initializer_list<std::span<const double>> grads);

/// Scales all gradients so their joint L2 norm is at most `max_norm`. Returns the pre-clip norm.
double clip_global_norm(std::initializer_list<std::span<double>> grads, double max_norm);

}  // namespace stego::nn
