#pragma once

#include <functional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "stego/core/config.hpp"
#include "stego/core/image.hpp"
#include "stego/core/message.hpp"
#include "stego/losses/weights.hpp"
#include "stego/nn/tensor.hpp"

namespace stego::losses {

/// log sum_i exp((pred_i - target_i)^2), evaluated with a max shift.
/// `grad` (optional, same length) receives d/dpred.
double lse_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad = {});
double lse_loss(std::span<const double> pred, const Message& target, std::span<double> grad = {});

double message_mse(std::span<const double> pred, std::span<const double> target, std::span<double> grad = {});
double message_mse(std::span<const double> pred, const Message& target, std::span<double> grad = {});

double image_mse(const ImageTensor& a, const ImageTensor& b);
/// Batched image MSE; `grad_b` (optional) receives d/db.
double image_mse(const nn::Tensor& a, const nn::Tensor& b, nn::Tensor* grad_b = nullptr);

// Pluggable perceptual distance on (n, 3, H, W) batches in [0, 1]. Returns the
// batch mean; writes d/db into `grad_b` when non-null.
using PerceptualFn = std::function<double(const nn::Tensor& a, const nn::Tensor& b, nn::Tensor* grad_b)>;

/// Built-in proxy: three-scale (2x2 average pyramid, weights 1, 1/2, 1/4) mean
/// squared difference of pixel values plus of horizontal and vertical finite
/// differences. Not a learned metric.
double perceptual_proxy(const nn::Tensor& a, const nn::Tensor& b, nn::Tensor* grad_b = nullptr);
double perceptual_loss(const ImageTensor& a, const ImageTensor& b);

/// Installs the implementation used when perceptual = external.
void set_external_perceptual(PerceptualFn fn);
/// Resolves a config `perceptual` value (none | proxy | external) to a metric; none yields an empty function.
PerceptualFn resolve_perceptual(const std::string& mode);

enum class Phase { FixedBatch = 0, FullData = 1, RobustLse = 2 };
const char* to_string(Phase p);

struct CurriculumState {
    Phase phase = Phase::FixedBatch;
    double running_bit_acc = 0.0;
    long iteration = 0;
    bool primed = false;  // EMA seeded by the first observation
};

/// EMA update (first observation seeds the average), then at most one promotion:
/// FIXED_BATCH -> FULL_DATA at tau1, FULL_DATA -> ROBUST_LSE at tau2.
CurriculumState advance_curriculum(CurriculumState state, double batch_bit_acc, const RunConfig& config);

struct LossBreakdown {
    double perceptual = 0.0;
    double image_mse = 0.0;
    double lse = 0.0;  // 0 unless active
    double message_mse = 0.0;
    bool lse_active = false;
    double total = 0.0;

    bool finite() const;
    nlohmann::json to_json(bool include_lse = true) const;
};

struct LossGrads {
    nn::Tensor d_stego;  // d total / d stego image
    nn::Tensor d_probs;  // d total / d bit probabilities, shape (n, d, 1, 1)
};

struct LossOptions {
    LossWeights weights;
    bool lse_enabled = true;
    PerceptualFn perceptual;  // empty: perceptual term is 0
};

/// Batched composite loss. `probs` and `targets` are (n, d, 1, 1); images (n, 3, H, W).
/// The LSE term is the batch mean of per-sample LSE and enters only in ROBUST_LSE.
LossBreakdown total_loss(const nn::Tensor& cover, const nn::Tensor& stego, const nn::Tensor& probs,
                         const nn::Tensor& targets, const LossOptions& options, const CurriculumState& state,
                         LossGrads* grads = nullptr);

/// Single-sample form with the proxy perceptual term.
LossBreakdown total_loss(const ImageTensor& cover, const ImageTensor& stego, std::span<const double> probs,
                         const Message& target, const LossWeights& weights, const CurriculumState& state);

}  // namespace stego::losses
