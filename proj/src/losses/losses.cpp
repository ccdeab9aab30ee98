#include "stego/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <vector>

#include "stego/core/errors.hpp"

namespace stego::losses {

namespace {

std::vector<double> bits_as_doubles(const Message& m) {
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i];
    return out;
}

void check_pair(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
    if (pred.size() != target.size()) {
        fail(ErrorKind::InvalidArgument, "length mismatch: " + std::to_string(pred.size()) + " vs " +
                                             std::to_string(target.size()));
    }
    if (pred.empty()) fail(ErrorKind::InvalidArgument, "empty message prediction");
    if (!grad.empty() && grad.size() != pred.size()) fail(ErrorKind::InvalidArgument, "gradient buffer length");
}

void check_same(const nn::Tensor& a, const nn::Tensor& b) {
    if (a.shape() != b.shape()) fail(ErrorKind::InvalidArgument, "shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
}

std::mutex g_external_mu;
PerceptualFn g_external;

}  // namespace

double lse_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
    check_pair(pred, target, grad);
    const std::size_t d = pred.size();
    std::vector<double> sq(d);
    double peak = -INFINITY;
    for (std::size_t i = 0; i < d; ++i) {
        if (std::isnan(pred[i]) || std::isnan(target[i])) fail(ErrorKind::Numeric, "NaN in LSE input");
        const double e = pred[i] - target[i];
        sq[i] = e * e;
        peak = std::max(peak, sq[i]);
    }
    if (!std::isfinite(peak)) fail(ErrorKind::Numeric, "non-finite LSE input");
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) sum += std::exp(sq[i] - peak);
    if (!grad.empty()) {
        for (std::size_t i = 0; i < d; ++i) grad[i] = std::exp(sq[i] - peak) / sum * 2.0 * (pred[i] - target[i]);
    }
    return peak + std::log(sum);
}

double lse_loss(std::span<const double> pred, const Message& target, std::span<double> grad) {
    const auto t = bits_as_doubles(target);
    return lse_loss(pred, t, grad);
}

double message_mse(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
    check_pair(pred, target, grad);
    const double n = static_cast<double>(pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        sum += e * e;
        if (!grad.empty()) grad[i] = 2.0 * e / n;
    }
    return sum / n;
}

double message_mse(std::span<const double> pred, const Message& target, std::span<double> grad) {
    const auto t = bits_as_doubles(target);
    return message_mse(pred, t, grad);
}

double image_mse(const nn::Tensor& a, const nn::Tensor& b, nn::Tensor* grad_b) {
    check_same(a, b);
    const double n = static_cast<double>(a.size());
    if (grad_b) *grad_b = nn::Tensor(b.shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = b.data()[i] - a.data()[i];
        sum += e * e;
        if (grad_b) grad_b->data()[i] = 2.0 * e / n;
    }
    return sum / n;
}

double image_mse(const ImageTensor& a, const ImageTensor& b) {
    if (a.height() != b.height() || a.width() != b.width()) fail(ErrorKind::InvalidArgument, "image shape mismatch");
    return image_mse(to_tensor(a), to_tensor(b));
}

namespace {

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
};

Plane pool2(const Plane& p) {
    Plane q{p.h / 2, p.w / 2, {}};
    q.v.assign(static_cast<std::size_t>(q.h) * q.w, 0.0);
    for (int y = 0; y < q.h; ++y)
        for (int x = 0; x < q.w; ++x) {
            const auto at = [&](int yy, int xx) { return p.v[static_cast<std::size_t>(yy) * p.w + xx]; };
            q.v[static_cast<std::size_t>(y) * q.w + x] =
                0.25 * (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1));
        }
    return q;
}

// Adds the pool2 adjoint of `g` into `out`.
void unpool2_add(const Plane& g, Plane& out) {
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            const double v = 0.25 * g.v[static_cast<std::size_t>(y) * g.w + x];
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) out.v[static_cast<std::size_t>(2 * y + dy) * out.w + 2 * x + dx] += v;
        }
}

// Quadratic form on a difference plane: mean(p^2) + mean(gx^2) + mean(gy^2).
// Adds scale * gradient into `grad` when non-null.
double level_energy(const Plane& p, double scale, Plane* grad) {
    const auto idx = [&](int y, int x) { return static_cast<std::size_t>(y) * p.w + x; };
    const double n = static_cast<double>(p.v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        s += p.v[i] * p.v[i];
        if (grad) grad->v[i] += scale * 2.0 * p.v[i] / n;
    }
    double value = s / n;
    if (p.w > 1) {
        const double nx = static_cast<double>(p.h) * (p.w - 1);
        s = 0.0;
        for (int y = 0; y < p.h; ++y)
            for (int x = 0; x + 1 < p.w; ++x) {
                const double g = p.v[idx(y, x + 1)] - p.v[idx(y, x)];
                s += g * g;
                if (grad) {
                    grad->v[idx(y, x + 1)] += scale * 2.0 * g / nx;
                    grad->v[idx(y, x)] -= scale * 2.0 * g / nx;
                }
            }
        value += s / nx;
    }
    if (p.h > 1) {
        const double ny = static_cast<double>(p.h - 1) * p.w;
        s = 0.0;
        for (int y = 0; y + 1 < p.h; ++y)
            for (int x = 0; x < p.w; ++x) {
                const double g = p.v[idx(y + 1, x)] - p.v[idx(y, x)];
                s += g * g;
                if (grad) {
                    grad->v[idx(y + 1, x)] += scale * 2.0 * g / ny;
                    grad->v[idx(y, x)] -= scale * 2.0 * g / ny;
                }
            }
        value += s / ny;
    }
    return value;
}

constexpr int kScales = 3;
constexpr double kScaleWeight[kScales] = {1.0, 0.5, 0.25};

}  // namespace

double perceptual_proxy(const nn::Tensor& a, const nn::Tensor& b, nn::Tensor* grad_b) {
    check_same(a, b);
    if (grad_b) *grad_b = nn::Tensor(b.shape());
    const int n = a.n(), c = a.c(), h = a.h(), w = a.w();
    const double norm = 1.0 / (static_cast<double>(c) * n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            std::vector<Plane> levels;
            Plane base{h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    base.v[static_cast<std::size_t>(y) * w + x] = b.at(i, ch, y, x) - a.at(i, ch, y, x);
            levels.push_back(std::move(base));
            for (int s = 1; s < kScales && levels.back().h >= 2 && levels.back().w >= 2; ++s)
                levels.push_back(pool2(levels.back()));

            std::vector<Plane> grads;
            for (const auto& l : levels) grads.push_back({l.h, l.w, std::vector<double>(l.v.size(), 0.0)});
            for (std::size_t s = 0; s < levels.size(); ++s) {
                const double wt = kScaleWeight[s] * norm;
                total += wt * level_energy(levels[s], wt, grad_b ? &grads[s] : nullptr);
            }
            if (grad_b) {
                for (std::size_t s = levels.size() - 1; s > 0; --s) unpool2_add(grads[s], grads[s - 1]);
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) grad_b->at(i, ch, y, x) = grads[0].v[static_cast<std::size_t>(y) * w + x];
            }
        }
    }
    return total;
}

double perceptual_loss(const ImageTensor& a, const ImageTensor& b) {
    if (a.height() != b.height() || a.width() != b.width()) fail(ErrorKind::InvalidArgument, "image shape mismatch");
    return perceptual_proxy(to_tensor(a), to_tensor(b));
}

void set_external_perceptual(PerceptualFn fn) {
    std::lock_guard lock(g_external_mu);
    g_external = std::move(fn);
}

PerceptualFn resolve_perceptual(const std::string& mode) {
    if (mode == "none") return {};
    if (mode == "proxy") return [](const nn::Tensor& a, const nn::Tensor& b, nn::Tensor* g) { return perceptual_proxy(a, b, g); };
    if (mode == "external") {
        std::lock_guard lock(g_external_mu);
        if (!g_external) fail(ErrorKind::Config, "perceptual = external but no external metric is installed");
        return g_external;
    }
    fail(ErrorKind::Config, "unknown perceptual mode: " + mode);
}

const char* to_string(Phase p) {
    switch (p) {
        case Phase::FixedBatch: return "FIXED_BATCH";
        case Phase::FullData: return "FULL_DATA";
        case Phase::RobustLse: return "ROBUST_LSE";
    }
    return "?";
}

CurriculumState advance_curriculum(CurriculumState state, double batch_bit_acc, const RunConfig& config) {
    if (!(batch_bit_acc >= 0.0 && batch_bit_acc <= 1.0)) {
        fail(ErrorKind::InvalidArgument, "batch bit accuracy outside [0, 1]");
    }
    if (!state.primed) {
        state.running_bit_acc = batch_bit_acc;
        state.primed = true;
    } else {
        state.running_bit_acc = config.ema_decay * state.running_bit_acc + (1.0 - config.ema_decay) * batch_bit_acc;
    }
    ++state.iteration;
    if (state.phase == Phase::FixedBatch && state.running_bit_acc >= config.tau1) {
        state.phase = Phase::FullData;
    } else if (state.phase == Phase::FullData && state.running_bit_acc >= config.tau2) {
        state.phase = Phase::RobustLse;
    }
    return state;
}

bool LossBreakdown::finite() const {
    return std::isfinite(perceptual) && std::isfinite(image_mse) && std::isfinite(lse) && std::isfinite(message_mse) &&
           std::isfinite(total);
}

nlohmann::json LossBreakdown::to_json(bool include_lse) const {
    nlohmann::json j = {{"perceptual_proxy", perceptual}, {"image_mse", image_mse}, {"message_mse", message_mse},
                        {"total", total}};
    if (include_lse) {
        j["lse"] = lse;
        j["lse_active"] = lse_active;
    }
    return j;
}

LossBreakdown total_loss(const nn::Tensor& cover, const nn::Tensor& stego, const nn::Tensor& probs,
                         const nn::Tensor& targets, const LossOptions& options, const CurriculumState& state,
                         LossGrads* grads) {
    check_same(cover, stego);
    check_same(probs, targets);
    if (probs.n() != stego.n()) fail(ErrorKind::InvalidArgument, "batch size mismatch between images and messages");
    const auto& w = options.weights;
    LossBreakdown out;

    nn::Tensor g_img;
    if (grads) {
        grads->d_stego = nn::Tensor(stego.shape());
        grads->d_probs = nn::Tensor(probs.shape());
    }

    if (options.perceptual) {
        out.perceptual = options.perceptual(cover, stego, grads ? &g_img : nullptr);
        if (grads) {
            for (std::size_t i = 0; i < g_img.size(); ++i) grads->d_stego.data()[i] += w.alpha1 * g_img.data()[i];
        }
    }
    out.image_mse = image_mse(cover, stego, grads ? &g_img : nullptr);
    if (grads) {
        for (std::size_t i = 0; i < g_img.size(); ++i) grads->d_stego.data()[i] += w.alpha2 * g_img.data()[i];
    }

    const int n = probs.n();
    const std::size_t d = probs.shape().sample_size();
    std::vector<double> g(d);
    out.message_mse = message_mse(probs.vec(), targets.vec(), grads ? std::span<double>(grads->d_probs.vec()) : std::span<double>{});
    if (grads) {
        for (double& v : grads->d_probs.vec()) v *= w.alpha4;
    }

    out.lse_active = options.lse_enabled && state.phase == Phase::RobustLse;
    if (out.lse_active) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            sum += lse_loss(probs.sample(i), targets.sample(i), grads ? std::span<double>(g) : std::span<double>{});
            if (grads) {
                auto dst = grads->d_probs.sample(i);
                for (std::size_t k = 0; k < d; ++k) dst[k] += w.alpha3 * g[k] / n;
            }
        }
        out.lse = sum / n;
    }

    out.total = w.alpha1 * out.perceptual + w.alpha2 * out.image_mse + w.alpha4 * out.message_mse;
    if (out.lse_active) out.total += w.alpha3 * out.lse;
    return out;
}

LossBreakdown total_loss(const ImageTensor& cover, const ImageTensor& stego, std::span<const double> probs,
                         const Message& target, const LossWeights& weights, const CurriculumState& state) {
    if (probs.size() != target.size()) fail(ErrorKind::InvalidArgument, "message length mismatch");
    const int d = static_cast<int>(target.size());
    nn::Tensor p(1, d, 1, 1), t(1, d, 1, 1);
    for (int i = 0; i < d; ++i) {
        p.data()[i] = probs[i];
        t.data()[i] = target[i];
    }
    LossOptions opts;
    opts.weights = weights;
    opts.perceptual = resolve_perceptual("proxy");
    return total_loss(to_tensor(cover), to_tensor(stego), p, t, opts, state);
}

}  // namespace stego::losses
