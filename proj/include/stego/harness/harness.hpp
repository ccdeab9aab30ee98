#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stego/core/config.hpp"
#include "stego/message/message_codec.hpp"
#include "stego/metrics/metrics.hpp"
#include "stego/train/dataset.hpp"
#include "stego/train/trainer.hpp"
#include "stego/transforms/transforms.hpp"

namespace stego::harness {

struct EvalOptions {
    int messages_per_image = 1;
    std::uint64_t seed = 0;
    /// Applied (bit-faithful, non-differentiable) to each stego image before extraction.
    std::optional<transforms::TransformSpec> transform;
};

/// Cover-mode evaluation: for every image and message, embed, optionally
/// corrupt, extract. Rows are ordered by (image, message); messages are drawn
/// from a stream seeded by `seed` in that order.
metrics::EvalReport evaluate(const message::StegoModel& model, const train::Dataset& data, const EvalOptions& options);

struct RobustnessRow {
    std::string kind;
    std::string parameters;
    double bit_accuracy_pct = 0.0;
    double message_accuracy_pct = 0.0;
};

struct RobustnessReport {
    std::vector<RobustnessRow> rows;  // none, gaussian_blur, gaussian_noise, rgb2bgr, jpeg

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// The five-row protocol with transform parameters taken from `config`.
RobustnessReport robustness(const message::StegoModel& model, const train::Dataset& data, const RunConfig& config,
                            int messages_per_image, std::uint64_t seed);

// Parameter grid: "alpha3=0.025,0.1;alpha4=10,16". Keys must be config keys.
struct SweepGrid {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
};

/// Unknown key -> usage-error; empty axis -> usage-error.
SweepGrid parse_grid(const std::string& text);

/// Cartesian product in axis order (last axis varies fastest).
std::vector<std::vector<std::pair<std::string, std::string>>> grid_points(const SweepGrid& grid);

struct SweepRow {
    std::vector<std::pair<std::string, std::string>> point;
    train::TrainResult result;
    metrics::Aggregate eval;
};

/// Trains one run per grid point (sequentially, into out_dir/run_XXX) and
/// evaluates each final model on `eval_data`. Writes out_dir/summary.csv.
std::vector<SweepRow> sweep(const RunConfig& base, const SweepGrid& grid, const std::filesystem::path& out_dir,
                            const train::Dataset& eval_data, int messages_per_image = 1);

std::string sweep_summary_csv(const std::vector<SweepRow>& rows);

/// Bar chart of a wrong-bit histogram (0..d on the x axis) written as PNG.
void write_histogram_plot(const metrics::WrongBitHistogram& histogram, int d, const std::filesystem::path& path,
                          const std::string& title = "wrong bits per message");

/// Writes report.json, report.csv, summary.csv, histogram.csv and histogram.png into `dir`.
void write_eval_outputs(const metrics::EvalReport& report, const std::filesystem::path& dir);

}  // namespace stego::harness
