#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stego/core/image.hpp"
#include "stego/core/message.hpp"

namespace stego::metrics {

inline constexpr double kPsnrCap = 100.0;

/// Fraction of positions where the two messages agree.
double bit_accuracy(const Message& m, const Message& recovered);

/// 1 iff every bit agrees (exact-match message accuracy), else 0.
int message_accuracy(const Message& m, const Message& recovered);

/// Hamming distance.
int wrong_bits(const Message& m, const Message& recovered);

/// 10*log10(1/MSE) for [0,1] images; kPsnrCap when MSE < 1e-10.
double psnr(const ImageTensor& a, const ImageTensor& b);

/// Mean SSIM over the three channels: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1, valid-region averaging. Images
/// smaller than the window use the largest odd window that fits.
double ssim(const ImageTensor& a, const ImageTensor& b);

using WrongBitHistogram = std::map<int, std::size_t>;

WrongBitHistogram wrong_bit_histogram(std::span<const std::pair<Message, Message>> pairs);

struct ImageRow {
    std::string image;
    int message_index = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double perceptual = 0.0;
    double bit_accuracy = 0.0;
    bool message_correct = false;
    int wrong_bits = 0;
};

struct Aggregate {
    std::size_t count = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double perceptual = 0.0;
    double bit_accuracy = 0.0;        // fraction
    double message_accuracy_pct = 0.0;  // percent of messages recovered exactly
    WrongBitHistogram histogram;
};

/// Sequential (row-order) reduction so aggregates are reproducible.
Aggregate aggregate(std::span<const ImageRow> rows);

struct EvalReport {
    int d = 0;
    std::vector<ImageRow> per_image;
    Aggregate summary;

    static EvalReport from_rows(int d, std::vector<ImageRow> rows);

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    /// Per-image table followed by nothing else; columns mirror the summary table.
    std::string to_csv() const;
    /// One-line summary table: PSNR, SSIM, perceptual (proxy), Bit Acc (%), Message Acc (%).
    std::string summary_csv() const;
    std::string histogram_csv() const;
};

}  // namespace stego::metrics
