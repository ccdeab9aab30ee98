#include "stego/harness/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "stego/core/errors.hpp"
#include "stego/losses/losses.hpp"

namespace stego::harness {

metrics::EvalReport evaluate(const message::StegoModel& model, const train::Dataset& data, const EvalOptions& options) {
    if (data.size() == 0) fail(ErrorKind::Usage, "evaluation dataset is empty");
    if (options.messages_per_image < 1) fail(ErrorKind::Usage, "messages per image must be >= 1");
    if (options.transform) options.transform->validate();
    const int d = model.d();
    const int per = options.messages_per_image;
    const std::size_t total = data.size() * static_cast<std::size_t>(per);

    Rng rng = make_stream(options.seed, stream::kEval);
    std::vector<Message> msgs;
    msgs.reserve(total);
    for (std::size_t r = 0; r < total; ++r) msgs.push_back(generate_message(d, rng));

    std::vector<metrics::ImageRow> rows(total);
    constexpr std::size_t kChunk = 32;
    for (std::size_t start = 0; start < total; start += kChunk) {
        const std::size_t end = std::min(total, start + kChunk);
        std::vector<ImageTensor> covers;
        for (std::size_t r = start; r < end; ++r) covers.push_back(data.images[r / per]);
        const nn::Tensor cover_t = to_tensor(std::span<const ImageTensor>(covers));
        std::span<const Message> chunk_msgs(msgs.data() + start, end - start);
        const nn::Tensor stego = message::embed_batch(*model.encoder, *model.codec, chunk_msgs, cover_t);
        const nn::Tensor seen =
            options.transform ? transforms::apply_batch(*options.transform, stego, /*differentiable=*/false) : stego;
        const nn::Tensor logits = model.decoder->forward(seen);

        for (std::size_t r = start; r < end; ++r) {
            const int k = static_cast<int>(r - start);
            const ImageTensor stego_img = image_from_tensor(stego, k);
            const auto lg = logits.sample(k);
            const Message recovered = message::threshold_logits(lg);
            auto& row = rows[r];
            const std::size_t img = r / per;
            row.image = img < data.names.size() ? data.names[img] : std::to_string(img);
            row.message_index = static_cast<int>(r % per);
            row.psnr = metrics::psnr(covers[static_cast<std::size_t>(k)], stego_img);
            row.ssim = metrics::ssim(covers[static_cast<std::size_t>(k)], stego_img);
            row.perceptual = losses::perceptual_loss(covers[static_cast<std::size_t>(k)], stego_img);
            row.bit_accuracy = metrics::bit_accuracy(msgs[r], recovered);
            row.wrong_bits = metrics::wrong_bits(msgs[r], recovered);
            row.message_correct = row.wrong_bits == 0;
        }
    }
    return metrics::EvalReport::from_rows(d, std::move(rows));
}

nlohmann::json RobustnessReport::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        j.push_back({{"transform", r.kind},
                     {"parameters", r.parameters},
                     {"bit_accuracy_pct", r.bit_accuracy_pct},
                     {"message_accuracy_pct", r.message_accuracy_pct}});
    }
    return {{"rows", j}};
}

std::string RobustnessReport::to_csv() const {
    std::ostringstream os;
    os << "transform,parameters,Bit Acc (%),Message Acc (%)\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f", r.bit_accuracy_pct, r.message_accuracy_pct);
        os << r.kind << ",\"" << r.parameters << "\"," << buf << '\n';
    }
    return os.str();
}

RobustnessReport robustness(const message::StegoModel& model, const train::Dataset& data, const RunConfig& config,
                            int messages_per_image, std::uint64_t seed) {
    RobustnessReport report;
    for (transforms::Kind kind : transforms::kAllKinds) {
        EvalOptions opts;
        opts.messages_per_image = messages_per_image;
        opts.seed = seed;
        const auto spec = transforms::TransformSpec::of(kind, config, seed);
        if (kind != transforms::Kind::None) opts.transform = spec;
        const auto rep = evaluate(model, data, opts);
        const std::string desc = spec.describe();
        const auto paren = desc.find('(');
        report.rows.push_back({transforms::to_string(kind),
                               paren == std::string::npos ? "" : desc.substr(paren + 1, desc.size() - paren - 2),
                               100.0 * rep.summary.bit_accuracy, rep.summary.message_accuracy_pct});
    }
    return report;
}

SweepGrid parse_grid(const std::string& text) {
    SweepGrid grid;
    std::stringstream axes(text);
    std::string axis;
    while (std::getline(axes, axis, ';')) {
        const auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        axis = trim(axis);
        if (axis.empty()) continue;
        const auto eq = axis.find('=');
        if (eq == std::string::npos) fail(ErrorKind::Usage, "grid axis must be key=v1,v2,...: " + axis);
        const std::string key = trim(axis.substr(0, eq));
        if (!RunConfig::has_key(key)) fail(ErrorKind::Usage, "unknown config key in grid: " + key);
        std::vector<std::string> values;
        std::stringstream vs(axis.substr(eq + 1));
        std::string v;
        while (std::getline(vs, v, ',')) {
            v = trim(v);
            if (!v.empty()) values.push_back(v);
        }
        if (values.empty()) fail(ErrorKind::Usage, "grid axis has no values: " + key);
        grid.axes.emplace_back(key, std::move(values));
    }
    if (grid.axes.empty()) fail(ErrorKind::Usage, "empty parameter grid");
    return grid;
}

std::vector<std::vector<std::pair<std::string, std::string>>> grid_points(const SweepGrid& grid) {
    std::vector<std::vector<std::pair<std::string, std::string>>> points{{}};
    for (const auto& [key, values] : grid.axes) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& p : points)
            for (const auto& v : values) {
                auto q = p;
                q.emplace_back(key, v);
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }
    return points;
}

std::vector<SweepRow> sweep(const RunConfig& base, const SweepGrid& grid, const std::filesystem::path& out_dir,
                            const train::Dataset& eval_data, int messages_per_image) {
    std::vector<SweepRow> rows;
    const auto points = grid_points(grid);
    for (std::size_t i = 0; i < points.size(); ++i) {
        RunConfig cfg = base;
        for (const auto& [k, v] : points[i]) cfg.set(k, v);
        cfg.validate();
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        SweepRow row;
        row.point = points[i];
        row.result = train::train(cfg, out_dir / name);
        const auto model = message::load_model(row.result.final_checkpoint, cfg.d);
        EvalOptions opts;
        opts.messages_per_image = messages_per_image;
        opts.seed = cfg.seed;
        row.eval = evaluate(model, eval_data, opts).summary;
        rows.push_back(std::move(row));
    }
    std::ofstream f(out_dir / "summary.csv");
    if (!f) fail(ErrorKind::Io, "cannot write sweep summary");
    f << sweep_summary_csv(rows);
    return rows;
}

std::string sweep_summary_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    if (rows.empty()) return "";
    for (const auto& [k, v] : rows.front().point) os << k << ',';
    os << "iterations_to_tau1,iterations_to_tau2,final_ema_bit_acc,probe_message_acc_pct,bit_acc_pct,message_acc_pct,psnr\n";
    char buf[160];
    for (const auto& r : rows) {
        for (const auto& [k, v] : r.point) os << v << ',';
        std::snprintf(buf, sizeof buf, "%ld,%ld,%.6f,%.2f,%.2f,%.2f,%.3f",
                      r.result.iterations_to_tau1 ? *r.result.iterations_to_tau1 : -1L,
                      r.result.iterations_to_tau2 ? *r.result.iterations_to_tau2 : -1L,
                      r.result.final_state.running_bit_acc, r.result.final_probe.message_accuracy_pct,
                      100.0 * r.eval.bit_accuracy, r.eval.message_accuracy_pct, r.eval.psnr);
        os << buf << '\n';
    }
    return os.str();
}

void write_histogram_plot(const metrics::WrongBitHistogram& histogram, int d, const std::filesystem::path& path,
                          const std::string& title) {
    const int bars = d + 1;
    const int left = 60, right = 20, top = 40, bottom = 50;
    const int bar_w = std::max(8, 480 / bars);
    const int width = left + right + bar_w * bars, height = 360;
    cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    std::size_t peak = 1;
    for (const auto& [k, v] : histogram) peak = std::max(peak, v);
    const int plot_h = height - top - bottom;
    cv::line(canvas, {left, height - bottom}, {width - right, height - bottom}, cv::Scalar(0, 0, 0), 1);
    cv::line(canvas, {left, top}, {left, height - bottom}, cv::Scalar(0, 0, 0), 1);
    for (int k = 0; k < bars; ++k) {
        const auto it = histogram.find(k);
        const std::size_t v = it == histogram.end() ? 0 : it->second;
        const int h = static_cast<int>(static_cast<double>(v) / static_cast<double>(peak) * plot_h);
        const int x0 = left + k * bar_w;
        if (h > 0) {
            cv::rectangle(canvas, {x0 + 1, height - bottom - h}, {x0 + bar_w - 2, height - bottom},
                          cv::Scalar(180, 110, 40), cv::FILLED);
        }
        if (bars <= 40 || k % 5 == 0) {
            cv::putText(canvas, std::to_string(k), {x0 + 1, height - bottom + 15}, cv::FONT_HERSHEY_PLAIN, 0.8,
                        cv::Scalar(0, 0, 0));
        }
    }
    cv::putText(canvas, std::to_string(peak), {5, top + 10}, cv::FONT_HERSHEY_PLAIN, 0.9, cv::Scalar(0, 0, 0));
    cv::putText(canvas, "0", {40, height - bottom}, cv::FONT_HERSHEY_PLAIN, 0.9, cv::Scalar(0, 0, 0));
    cv::putText(canvas, title, {left, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0));
    cv::putText(canvas, "number of wrong bits", {left, height - 12}, cv::FONT_HERSHEY_PLAIN, 1.0, cv::Scalar(0, 0, 0));
    if (!cv::imwrite(path.string(), canvas)) fail(ErrorKind::Io, "cannot write plot " + path.string());
}

void write_eval_outputs(const metrics::EvalReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + dir.string());
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream f(dir / name);
        if (!f) fail(ErrorKind::Io, "cannot write " + (dir / name).string());
        f << body;
    };
    write("report.json", report.to_json().dump(2) + "\n");
    write("report.csv", report.to_csv());
    write("summary.csv", report.summary_csv());
    write("histogram.csv", report.histogram_csv());
    write_histogram_plot(report.summary.histogram, report.d, dir / "histogram.png");
}

}  // namespace stego::harness
