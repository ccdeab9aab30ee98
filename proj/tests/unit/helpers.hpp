#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "stego/core/image.hpp"
#include "stego/core/rng.hpp"
#include "stego/nn/tensor.hpp"

namespace testutil {

inline stego::nn::Tensor random_tensor(stego::nn::Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    stego::nn::Tensor t(s);
    for (double& v : t.vec()) v = u(rng);
    return t;
}

inline stego::ImageTensor random_image(int h, int w, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> px(static_cast<std::size_t>(h) * w * 3);
    for (double& v : px) v = u(rng);
    return stego::ImageTensor(h, w, std::move(px));
}

// Central differences of a scalar function at `x` (which is restored).
inline std::vector<double> numeric_grad(std::vector<double>& x, const std::function<double()>& f, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

// ||a - b|| / max(||a||, ||b||, floor)
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace testutil
