#include "stego/nn/optim.hpp"

#include <cmath>

#include "stego/core/errors.hpp"

namespace stego::nn {

void AdamW::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        fail(ErrorKind::InvalidArgument, "optimizer buffer size mismatch");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    const double step = opts_.lr / bc1;
    const double decay = 1.0 - opts_.lr * opts_.weight_decay;
    const std::size_t n = params.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
        v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g * g;
        params[i] *= decay;
        params[i] -= step * m_[i] / (std::sqrt(v_[i] / bc2) + opts_.eps);
    }
}

double global_norm(std::initializer_list<std::span<const double>> grads) {
    double s = 0.0;
    for (auto g : grads)
        for (double v : g) s += v * v;
    return std::sqrt(s);
}

double clip_global_norm(std::initializer_list<std::span<double>> grads, double max_norm) {
    double s = 0.0;
    for (auto g : grads)
        for (double v : g) s += v * v;
    const double norm = std::sqrt(s);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto g : grads)
            for (double& v : g) v *= scale;
    }
    return norm;
}

}  // namespace stego::nn
