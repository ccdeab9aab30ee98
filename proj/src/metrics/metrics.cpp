#include "stego/metrics/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "stego/core/errors.hpp"

namespace stego::metrics {

namespace {

void check_lengths(const Message& a, const Message& b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::InvalidArgument, "message length mismatch: " + std::to_string(a.size()) + " vs " +
                                             std::to_string(b.size()));
    }
}

void check_same_shape(const ImageTensor& a, const ImageTensor& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        fail(ErrorKind::InvalidArgument, "image shape mismatch");
    }
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size));
    const int r = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        w[i] = std::exp(-static_cast<double>((i - r) * (i - r)) / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

int wrong_bits(const Message& m, const Message& recovered) {
    check_lengths(m, recovered);
    int wrong = 0;
    for (std::size_t i = 0; i < m.size(); ++i) wrong += m[i] != recovered[i];
    return wrong;
}

double bit_accuracy(const Message& m, const Message& recovered) {
    const int wrong = wrong_bits(m, recovered);
    return static_cast<double>(static_cast<int>(m.size()) - wrong) / static_cast<double>(m.size());
}

int message_accuracy(const Message& m, const Message& recovered) { return wrong_bits(m, recovered) == 0 ? 1 : 0; }

double psnr(const ImageTensor& a, const ImageTensor& b) {
    check_same_shape(a, b);
    const auto da = a.data(), db = b.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double diff = da[i] - db[i];
        sum += diff * diff;
    }
    const double mse = sum / static_cast<double>(da.size());
    if (mse < 1e-10) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
    check_same_shape(a, b);
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const int h = a.height(), w = a.width();
    int win = 11;
    while (win > std::min(h, w)) win -= 2;
    const auto g = gaussian_window(win, 1.5);
    const int oh = h - win + 1, ow = w - win + 1;

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        double channel_sum = 0.0;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int ky = 0; ky < win; ++ky) {
                    for (int kx = 0; kx < win; ++kx) {
                        const double wt = g[ky] * g[kx];
                        const double va = a.at(y + ky, x + kx, c);
                        const double vb = b.at(y + ky, x + kx, c);
                        mx += wt * va;
                        my += wt * vb;
                        sxx += wt * va * va;
                        syy += wt * vb * vb;
                        sxy += wt * va * vb;
                    }
                }
                const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
                channel_sum += ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
                               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
            }
        }
        total += channel_sum / (static_cast<double>(oh) * ow);
    }
    return total / 3.0;
}

WrongBitHistogram wrong_bit_histogram(std::span<const std::pair<Message, Message>> pairs) {
    if (pairs.empty()) fail(ErrorKind::InvalidArgument, "wrong-bit histogram of an empty list");
    WrongBitHistogram hist;
    for (const auto& [m, r] : pairs) ++hist[wrong_bits(m, r)];
    return hist;
}

Aggregate aggregate(std::span<const ImageRow> rows) {
    Aggregate agg;
    agg.count = rows.size();
    if (rows.empty()) return agg;
    std::size_t correct = 0;
    for (const auto& r : rows) {
        agg.psnr += r.psnr;
        agg.ssim += r.ssim;
        agg.perceptual += r.perceptual;
        agg.bit_accuracy += r.bit_accuracy;
        correct += r.message_correct ? 1 : 0;
        ++agg.histogram[r.wrong_bits];
    }
    const double n = static_cast<double>(rows.size());
    agg.psnr /= n;
    agg.ssim /= n;
    agg.perceptual /= n;
    agg.bit_accuracy /= n;
    agg.message_accuracy_pct = 100.0 * static_cast<double>(correct) / n;
    return agg;
}

EvalReport EvalReport::from_rows(int d, std::vector<ImageRow> rows) {
    EvalReport r;
    r.d = d;
    r.per_image = std::move(rows);
    r.summary = aggregate(r.per_image);
    return r;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : per_image) {
        rows.push_back({{"image", r.image},
                        {"message_index", r.message_index},
                        {"psnr", r.psnr},
                        {"ssim", r.ssim},
                        {"perceptual_proxy", r.perceptual},
                        {"bit_accuracy", r.bit_accuracy},
                        {"message_correct", r.message_correct},
                        {"wrong_bits", r.wrong_bits}});
    }
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [k, v] : summary.histogram) hist[std::to_string(k)] = v;
    return {{"d", d},
            {"psnr_cap_db", kPsnrCap},
            {"perceptual_metric", "perceptual (proxy)"},
            {"aggregate",
             {{"count", summary.count},
              {"psnr", summary.psnr},
              {"ssim", summary.ssim},
              {"perceptual_proxy", summary.perceptual},
              {"bit_accuracy", summary.bit_accuracy},
              {"bit_accuracy_pct", 100.0 * summary.bit_accuracy},
              {"message_accuracy_pct", summary.message_accuracy_pct},
              {"wrong_bit_histogram", hist}}},
            {"per_image", rows}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    std::vector<ImageRow> rows;
    for (const auto& r : j.at("per_image")) {
        ImageRow row;
        row.image = r.at("image").get<std::string>();
        row.message_index = r.at("message_index").get<int>();
        row.psnr = r.at("psnr").get<double>();
        row.ssim = r.at("ssim").get<double>();
        row.perceptual = r.at("perceptual_proxy").get<double>();
        row.bit_accuracy = r.at("bit_accuracy").get<double>();
        row.message_correct = r.at("message_correct").get<bool>();
        row.wrong_bits = r.at("wrong_bits").get<int>();
        rows.push_back(std::move(row));
    }
    return from_rows(j.at("d").get<int>(), std::move(rows));
}

namespace {
std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}
}  // namespace

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "image,message_index,psnr,ssim,perceptual_proxy,bit_acc,message_correct,wrong_bits\n";
    for (const auto& r : per_image) {
        os << r.image << ',' << r.message_index << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << ','
           << fmt(r.perceptual) << ',' << fmt(r.bit_accuracy) << ',' << (r.message_correct ? 1 : 0) << ','
           << r.wrong_bits << '\n';
    }
    return os.str();
}

std::string EvalReport::summary_csv() const {
    std::ostringstream os;
    os << "PSNR,SSIM,perceptual (proxy),Bit Acc (%),Message Acc (%)\n";
    os << fmt(summary.psnr, 2) << ',' << fmt(summary.ssim, 4) << ',' << fmt(summary.perceptual, 4) << ','
       << fmt(100.0 * summary.bit_accuracy, 2) << ',' << fmt(summary.message_accuracy_pct, 2) << '\n';
    return os.str();
}

std::string EvalReport::histogram_csv() const {
    std::ostringstream os;
    os << "wrong_bits,messages\n";
    for (int k = 0; k <= d; ++k) {
        auto it = summary.histogram.find(k);
        os << k << ',' << (it == summary.histogram.end() ? 0 : it->second) << '\n';
    }
    return os.str();
}

}  // namespace stego::metrics
