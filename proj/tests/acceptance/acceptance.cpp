// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--work-dir DIR] [--only 1,2,...]
//
// Criteria 7 and 8 train on generated data; finished runs under the work
// directory are reused when their manifest holds the same configuration.

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/helpers.hpp"
#include "stego/codec/latent_codec.hpp"
#include "stego/core/errors.hpp"
#include "stego/harness/harness.hpp"
#include "stego/losses/losses.hpp"
#include "stego/message/message_codec.hpp"
#include "stego/metrics/metrics.hpp"
#include "stego/train/dataset.hpp"
#include "stego/train/trainer.hpp"
#include "stego/transforms/transforms.hpp"

using namespace stego;
using nn::Tensor;
namespace fs = std::filesystem;
using BigFloat = boost::multiprecision::cpp_dec_float_50;

namespace {

// Collects failed checks for one criterion plus a short measurement summary.
struct Verdict {
    std::vector<std::string> failures;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    bool pass() const { return failures.empty(); }
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Message from_int(unsigned v, int d) {
    std::vector<std::uint8_t> bits(d);
    for (int i = 0; i < d; ++i) bits[i] = (v >> i) & 1u;
    return Message(bits);
}

std::vector<Message> random_messages(int n, int d, std::uint64_t seed) {
    Rng r = make_stream(seed, stream::kMessages);
    std::vector<Message> out;
    for (int i = 0; i < n; ++i) out.push_back(generate_message(d, r));
    return out;
}

// ---------------------------------------------------------------------------

Verdict metric_exactness() {
    Verdict v;
    std::vector<std::pair<Message, Message>> pairs;
    std::size_t by_weight[5] = {};
    for (unsigned a = 0; a < 16; ++a) {
        for (unsigned b = 0; b < 16; ++b) {
            const Message m = from_int(a, 4), r = from_int(b, 4);
            const int hamming = std::popcount(a ^ b);
            const double acc = metrics::bit_accuracy(m, r);
            v.check(acc == (4 - hamming) / 4.0, "bit accuracy vs Hamming oracle");
            v.check(metrics::message_accuracy(m, r) == (acc == 1.0 ? 1 : 0), "message accuracy vs bit accuracy");
            v.check(metrics::wrong_bits(m, r) == hamming, "wrong bits vs Hamming oracle");
            ++by_weight[hamming];
            pairs.emplace_back(m, r);
        }
    }
    const auto hist = metrics::wrong_bit_histogram(pairs);
    std::size_t total = 0;
    for (const auto& [k, n] : hist) total += n;
    v.check(total == 256, "histogram sums to 256");
    for (int k = 0; k <= 4; ++k) v.check(hist.count(k) && hist.at(k) == by_weight[k], "histogram bin " + std::to_string(k));
    v.detail = "256 pairs, histogram total " + std::to_string(total);
    return v;
}

double lse_oracle(const std::vector<double>& p, const std::vector<double>& t) {
    BigFloat s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const BigFloat e = BigFloat(p[i]) - BigFloat(t[i]);
        s += boost::multiprecision::exp(e * e);
    }
    return static_cast<double>(boost::multiprecision::log(s));
}

Verdict lse_analytics() {
    Verdict v;
    double worst_zero = 0;
    for (int d : {1, 2, 100}) {
        std::vector<double> t(d, 1.0);
        worst_zero = std::max(worst_zero, std::abs(losses::lse_loss(t, t) - std::log(d)));
    }
    v.check(worst_zero <= 1e-12, "zero-error input gives log d");

    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(1, 100);
    std::uniform_real_distribution<double> u(-3, 3);
    int bound_violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const int d = len(rng);
        std::vector<double> p(d), t(d);
        double mx = 0;
        for (int i = 0; i < d; ++i) {
            p[i] = u(rng);
            t[i] = u(rng);
            mx = std::max(mx, (p[i] - t[i]) * (p[i] - t[i]));
        }
        const double val = losses::lse_loss(p, t);
        if (val < mx - 1e-9 || val > mx + std::log(d) + 1e-9) ++bound_violations;
    }
    v.check(bound_violations == 0, "max <= lse <= max + log d");

    std::uniform_real_distribution<double> unit(0, 1);
    double worst_rel = 0;
    bool finite = true;
    for (double top : {1.0, 100.0, 700.0}) {
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> p(32), t(32, 0.0);
            for (double& x : p) x = std::sqrt(top * unit(rng));
            p[trial % 32] = std::sqrt(top);
            const double val = losses::lse_loss(p, t);
            finite = finite && std::isfinite(val);
            const double ref = lse_oracle(p, t);
            worst_rel = std::max(worst_rel, std::abs(val - ref) / std::abs(ref));
        }
    }
    v.check(finite, "no overflow up to squared error 700");
    v.check(worst_rel <= 1e-12, "arbitrary-precision agreement");
    v.detail = "log d err " + fmt("%.1e", worst_zero) + ", bound violations " + std::to_string(bound_violations) +
               ", max rel err vs 50-digit oracle " + fmt("%.1e", worst_rel);
    return v;
}

Verdict lse_gradient() {
    Verdict v;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0;
    for (int d : {2, 16, 100}) {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> p(d), t(d), g(d);
            for (int i = 0; i < d; ++i) {
                p[i] = u(rng);
                t[i] = u(rng) < 0.5 ? 0.0 : 1.0;
            }
            losses::lse_loss(p, t, g);
            const auto num = testutil::numeric_grad(p, [&] { return losses::lse_loss(p, t); }, 1e-6);
            worst = std::max(worst, testutil::rel_error(g, num));
        }
    }
    v.check(worst < 1e-4, "analytic vs central differences");
    v.detail = "300 instances, worst rel err " + fmt("%.2e", worst);
    return v;
}

struct SimState {
    int phase = 0;
    double ema = 0;
    bool seen = false;
};

SimState simulate(SimState s, double acc, const RunConfig& c) {
    s.ema = s.seen ? c.ema_decay * s.ema + (1 - c.ema_decay) * acc : acc;
    s.seen = true;
    if (s.phase == 0 && s.ema >= c.tau1) {
        s.phase = 1;
    } else if (s.phase == 1 && s.ema >= c.tau2) {
        s.phase = 2;
    }
    return s;
}

Verdict composite_gating() {
    Verdict v;
    std::mt19937_64 rng(8);
    const int n = 4, d = 16;
    const auto cover = testutil::random_tensor({n, 3, 32, 32}, rng, 0, 1);
    const auto stego = testutil::random_tensor({n, 3, 32, 32}, rng, 0, 1);
    const auto probs = testutil::random_tensor({n, d, 1, 1}, rng, 0, 1);
    Tensor targets(n, d, 1, 1);
    for (double& x : targets.vec()) x = static_cast<double>(rng() & 1u);

    losses::LossOptions opts;
    opts.weights = {1.0, 1.5, 0.1, 16.0};
    opts.perceptual = losses::resolve_perceptual("proxy");

    double img = 0, msg = 0, lse = 0;
    for (std::size_t i = 0; i < cover.size(); ++i) img += std::pow(cover.vec()[i] - stego.vec()[i], 2);
    img /= static_cast<double>(cover.size());
    for (std::size_t i = 0; i < probs.size(); ++i) msg += std::pow(probs.vec()[i] - targets.vec()[i], 2);
    msg /= static_cast<double>(probs.size());
    for (int i = 0; i < n; ++i) {
        std::vector<double> p(probs.sample(i).begin(), probs.sample(i).end());
        std::vector<double> t(targets.sample(i).begin(), targets.sample(i).end());
        lse += lse_oracle(p, t);
    }
    lse /= n;
    const double perc = losses::perceptual_proxy(cover, stego);

    double worst = 0;
    for (auto phase : {losses::Phase::FixedBatch, losses::Phase::FullData, losses::Phase::RobustLse}) {
        losses::CurriculumState st;
        st.phase = phase;
        const auto b = losses::total_loss(cover, stego, probs, targets, opts, st);
        const bool active = phase == losses::Phase::RobustLse;
        const double expect = 1.0 * perc + 1.5 * img + 16.0 * msg + (active ? 0.1 * lse : 0.0);
        worst = std::max({worst, std::abs(b.total - expect), std::abs(b.image_mse - img),
                          std::abs(b.message_mse - msg), std::abs(b.perceptual - perc)});
        if (active) {
            worst = std::max(worst, std::abs(b.lse - lse));
        } else {
            v.check(b.lse == 0.0 && !b.lse_active, "lse exactly zero before the robust phase");
        }
    }
    v.check(worst <= 1e-9, "breakdown equals hand-composed terms");

    RunConfig cfg;
    std::vector<std::vector<double>> traces(4);
    for (int i = 0; i < 3000; ++i) {
        traces[0].push_back(std::min(1.0, 0.5 + i / 2000.0));
        traces[1].push_back(i < 20 ? 0.5 : 1.0);
        traces[2].push_back(std::clamp(0.6 + i / 3000.0 + 0.1 * (static_cast<double>(rng() % 1000) / 1000 - 0.5), 0.0, 1.0));
        traces[3].push_back(0.93);
    }
    traces.push_back({1.0, 1.0, 1.0});
    int mismatches = 0;
    for (const auto& tr : traces) {
        losses::CurriculumState st;
        SimState sim;
        for (double acc : tr) {
            st = losses::advance_curriculum(st, acc, cfg);
            sim = simulate(sim, acc, cfg);
            if (static_cast<int>(st.phase) != sim.phase || st.running_bit_acc != sim.ema) ++mismatches;
        }
    }
    v.check(mismatches == 0, "curriculum matches scalar simulation");
    v.detail = "max term error " + fmt("%.1e", worst) + ", curriculum mismatches " + std::to_string(mismatches);
    return v;
}

Verdict shape_identity() {
    Verdict v;
    std::mt19937_64 rng(2);
    codec::ConvAutoencoder ae(8, 3);
    ae.freeze();
    for (int s : {32, 64, 512}) {
        const auto img = testutil::random_image(s, s, rng);
        const LatentCode z = codec::encode(ae, img);
        v.check(z.height() == s / 8 && z.width() == s / 8 && z.data().size() == static_cast<std::size_t>(s / 8) * (s / 8) * 4, "latent shape at " + std::to_string(s));
        if (s <= 64) {
            message::MessageEncoder enc(16, s, s, 8);
            enc.init(5);
            for (const auto& m : random_messages(3, 16, 9)) {
                v.check(message::embed(enc, ae, m, z) == codec::decode(ae, z), "zero-init identity at " + std::to_string(s));
            }
        }
    }

    const int d = 4, s = 8, n = 2;
    codec::ConvAutoencoder small(2, 7);
    small.freeze();
    message::MessageEncoder enc(d, s, s, 2);
    message::MessageDecoder dec(d, s, s, 2, "flatten");
    enc.init(1);
    dec.init(2);
    std::vector<double> ep(enc.parameters().begin(), enc.parameters().end());
    std::normal_distribution<double> jitter(0, 0.2);
    for (double& p : ep) p += jitter(rng);
    enc.set_parameters(ep);

    const auto msgs = random_messages(n, d, 3);
    const Tensor signs = message::message_signs(msgs), targets = message::message_targets(msgs);
    const Tensor cover = testutil::random_tensor({n, 3, s, s}, rng, 0.3, 0.7);
    const Tensor z = small.encode(cover);
    losses::LossOptions opts;
    opts.perceptual = losses::resolve_perceptual("proxy");
    losses::CurriculumState st;
    st.phase = losses::Phase::RobustLse;

    auto pipeline = [&](losses::LossGrads* grads, message::MessageEncoder::Trace* etr, codec::DecodeTrace* dtr,
                        nn::Trace* ptr, Tensor* probs_out) {
        Tensor zs = z;
        const Tensor e = enc.forward(signs, z, etr);
        for (std::size_t i = 0; i < zs.size(); ++i) zs.vec()[i] += e.vec()[i];
        const Tensor stego = small.decode(zs, dtr);
        Tensor probs = dec.forward(stego, ptr);
        for (double& x : probs.vec()) x = 1.0 / (1.0 + std::exp(-x));
        if (probs_out) *probs_out = probs;
        return losses::total_loss(cover, stego, probs, targets, opts, st, grads).total;
    };
    losses::LossGrads grads;
    message::MessageEncoder::Trace etr;
    codec::DecodeTrace dtr;
    nn::Trace ptr;
    Tensor probs;
    pipeline(&grads, &etr, &dtr, &ptr, &probs);
    Tensor dlogits = grads.d_probs;
    for (std::size_t i = 0; i < dlogits.size(); ++i) dlogits.vec()[i] *= probs.vec()[i] * (1 - probs.vec()[i]);
    std::vector<double> d_dec(dec.param_count(), 0.0), d_enc(enc.param_count(), 0.0);
    Tensor dimg = grads.d_stego;
    const Tensor dstego = dec.backward(ptr, dlogits, d_dec, true);
    for (std::size_t i = 0; i < dimg.size(); ++i) dimg.vec()[i] += dstego.vec()[i];
    enc.backward(etr, small.decode_backward(dtr, dimg), d_enc, nullptr);

    auto loss = [&] { return pipeline(nullptr, nullptr, nullptr, nullptr, nullptr); };
    std::vector<double> dp(dec.parameters().begin(), dec.parameters().end());
    const auto num_dec = testutil::numeric_grad(dp, [&] {
        dec.set_parameters(dp);
        return loss();
    });
    dec.set_parameters(dp);
    const auto num_enc = testutil::numeric_grad(ep, [&] {
        enc.set_parameters(ep);
        return loss();
    });
    enc.set_parameters(ep);
    const double e_dec = testutil::rel_error(d_dec, num_dec), e_enc = testutil::rel_error(d_enc, num_enc);
    v.check(e_dec < 1e-3 && e_enc < 1e-3, "end-to-end gradient check");
    v.detail = "grad rel err encoder " + fmt("%.1e", e_enc) + ", decoder " + fmt("%.1e", e_dec);
    return v;
}

ImageTensor crop(const ImageTensor& im, int y0, int x0, int size) {
    std::vector<double> px;
    px.reserve(static_cast<std::size_t>(size) * size * 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) px.push_back(im.at(y0 + y, x0 + x, c));
    return ImageTensor(size, size, std::move(px));
}

Verdict transform_fidelity() {
    Verdict v;
    const RunConfig cfg;
    const auto k = transforms::gaussian_kernel(cfg.blur_kernel, cfg.blur_sigma);
    double sum2d = 0;
    for (double a : k)
        for (double b : k) sum2d += a * b;
    v.check(std::abs(sum2d - 1.0) <= 1e-9, "blur kernel sums to 1");

    std::mt19937_64 rng(2);
    const Tensor x = testutil::random_tensor({4, 3, 32, 32}, rng, 0, 1);
    const auto swap = transforms::TransformSpec::of(transforms::Kind::Rgb2Bgr, cfg);
    v.check(transforms::apply_batch(swap, transforms::apply_batch(swap, x, false), false).vec() == x.vec(),
            "rgb2bgr involution");

    const Tensor flat({8, 3, 64, 64}, 0.5);
    transforms::TransformTrace tr;
    transforms::apply_batch(transforms::TransformSpec::of(transforms::Kind::GaussianNoise, cfg, 17), flat, true, &tr);
    const double count = static_cast<double>(flat.size());
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double e = tr.raw.vec()[i] - flat.vec()[i];
        s += e;
        s2 += e * e;
    }
    const double mean = s / count, sd = std::sqrt(s2 / count - mean * mean);
    v.check(std::abs(mean - cfg.noise_mean) <= 3 * cfg.noise_sigma / std::sqrt(count), "noise mean");
    v.check(std::abs(sd - cfg.noise_sigma) <= 0.05 * cfg.noise_sigma, "noise std");

    const auto files = list_images(STEGO_TEST_DATA "/photos");
    const auto jpeg = transforms::TransformSpec::of(transforms::Kind::Jpeg, cfg);
    Rng pick = make_stream(0, stream::kEval);
    double total = 0, worst = 0;
    int images = 0;
    for (const auto& f : files) {
        const ImageTensor full = load_image(f, 192, 256);
        for (int i = 0; i < 10; ++i) {
            const int y0 = static_cast<int>(uniform01(pick) * (192 - 64));
            const int x0 = static_cast<int>(uniform01(pick) * (256 - 64));
            const ImageTensor im = crop(full, y0, x0, 64);
            const ImageTensor soft = transforms::apply(jpeg, im, true), real = transforms::apply(jpeg, im, false);
            double mae = 0;
            for (std::size_t j = 0; j < im.data().size(); ++j) mae += std::abs(soft.data()[j] - real.data()[j]);
            mae /= static_cast<double>(im.data().size());
            total += mae;
            worst = std::max(worst, mae);
            ++images;
        }
    }
    v.check(images == 50, "50 natural images");
    v.check(images > 0 && total / images <= 0.02, "differentiable vs real jpeg MAE");
    v.detail = "noise mean " + fmt("%.2e", mean) + " std " + fmt("%.4f", sd) + ", jpeg q" +
               std::to_string(cfg.jpeg_quality) + " MAE over " + std::to_string(images) + " crops " +
               fmt("%.4f", images ? total / images : 0.0) + " (worst " + fmt("%.4f", worst) + ")";
    return v;
}

// ---------------------------------------------------------------------------
// Desk-scale runs.

struct Desk {
    fs::path work;
    fs::path train_dir, eval_dir, codec_path;
    train::Dataset eval;
    double codec_psnr = 0;
};

constexpr int kTrainImages = 1200;
constexpr int kEvalImages = 200;
constexpr int kMessagesPerImage = 4;
constexpr std::uint64_t kEvalSeed = 2024;

RunConfig desk_config(const Desk& desk, std::uint64_t seed, bool lse) {
    RunConfig c;
    c.d = 16;
    c.image_height = c.image_width = 32;
    c.max_iterations = 20000;
    c.seed = seed;
    c.lse_enabled = lse;
    c.log_interval = 500;
    c.codec_steps = 3000;
    c.dataset_path = desk.train_dir.string();
    c.codec_path = desk.codec_path.string();
    return c;
}

std::size_t image_count(const fs::path& dir) { return fs::exists(dir) ? list_images(dir).size() : 0; }

void prepare_desk(Desk& desk) {
    desk.train_dir = desk.work / "train_images";
    desk.eval_dir = desk.work / "eval_images";
    desk.codec_path = desk.work / "codec.ckpt";
    if (image_count(desk.train_dir) != kTrainImages) {
        fs::remove_all(desk.train_dir);
        train::write_procedural_dataset(desk.train_dir, kTrainImages, 32, 32, 1, train::ImageStyle::Textured);
    }
    if (image_count(desk.eval_dir) != kEvalImages) {
        fs::remove_all(desk.eval_dir);
        train::write_procedural_dataset(desk.eval_dir, kEvalImages, 32, 32, 2, train::ImageStyle::Textured);
    }
    desk.eval = train::load_dataset(desk.eval_dir, 32, 32);
    if (!fs::exists(desk.codec_path)) {
        const RunConfig c = desk_config(desk, 0, true);
        const auto data = train::load_dataset(desk.train_dir, 32, 32);
        std::printf("  pretraining codec (%d steps)\n", c.codec_steps);
        std::fflush(stdout);
        auto codec = codec::pretrain_reference_codec(data.images, c);
        codec::save_codec(*codec, desk.codec_path);
    }
    desk.codec_psnr = codec::reconstruction_psnr(*codec::load_codec(desk.codec_path), desk.eval.images);
}

struct RunOutcome {
    double ema = 0;
    std::string final_phase;
    metrics::Aggregate eval;
    fs::path checkpoint;
    std::string codec_hash_before, codec_hash_after;
};

nlohmann::json done_event(const fs::path& log) {
    std::ifstream in(log);
    std::string line;
    nlohmann::json done;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (!j.is_discarded() && j.value("event", "") == "done") done = j;
    }
    return done;
}

bool reusable(const fs::path& dir, const RunConfig& cfg) {
    if (!fs::exists(dir / "final.ckpt") || !fs::exists(dir / "run_manifest.json")) return false;
    std::ifstream in(dir / "run_manifest.json");
    const auto manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded() || manifest.value("config", "") != cfg.to_text()) return false;
    return done_event(dir / "train_log.jsonl").contains("final_ema_bit_acc");
}

RunOutcome run_or_reuse(const Desk& desk, std::uint64_t seed, bool lse) {
    const RunConfig cfg = desk_config(desk, seed, lse);
    const fs::path dir = desk.work / ("seed" + std::to_string(seed) + (lse ? "_lse" : "_mse"));
    const std::string hash_on_disk = codec::load_codec(desk.codec_path)->parameter_hash();
    RunOutcome out;
    if (!reusable(dir, cfg)) {
        std::printf("  training seed %llu %s (%d steps)\n", static_cast<unsigned long long>(seed),
                    lse ? "with lse" : "mse only", cfg.max_iterations);
        std::fflush(stdout);
        fs::remove_all(dir);
        train::train(cfg, dir);
    }
    const auto done = done_event(dir / "train_log.jsonl");
    out.ema = done.value("final_ema_bit_acc", 0.0);
    out.final_phase = done.value("final_phase", "");
    out.codec_hash_before = hash_on_disk;
    out.codec_hash_after = done.value("codec_hash", "");
    out.checkpoint = dir / "final.ckpt";
    harness::EvalOptions opts;
    opts.messages_per_image = kMessagesPerImage;
    opts.seed = kEvalSeed;
    out.eval = harness::evaluate(message::load_model(out.checkpoint, 16), desk.eval, opts).summary;
    return out;
}

double zero_mass(const metrics::Aggregate& a) {
    const auto it = a.histogram.find(0);
    return it == a.histogram.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(a.count);
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

struct PairResult {
    RunOutcome lse, mse;
    bool ok() const {
        return lse.ema >= 0.98 && mse.ema >= 0.98 &&
               lse.eval.message_accuracy_pct - mse.eval.message_accuracy_pct >= 5.0 &&
               zero_mass(lse.eval) > zero_mass(mse.eval);
    }
    std::string describe() const {
        return "ema lse " + fmt("%.4f", lse.ema) + " mse " + fmt("%.4f", mse.ema) + ", msg acc lse " +
               fmt("%.2f", lse.eval.message_accuracy_pct) + "% mse " + fmt("%.2f", mse.eval.message_accuracy_pct) +
               "%, zero-error mass lse " + fmt("%.4f", zero_mass(lse.eval)) + " mse " + fmt("%.4f", zero_mass(mse.eval)) +
               ", bit acc lse " + fmt("%.4f", lse.eval.bit_accuracy) + " mse " + fmt("%.4f", mse.eval.bit_accuracy) +
               ", psnr lse " + fmt("%.2f", lse.eval.psnr) + " mse " + fmt("%.2f", mse.eval.psnr);
    }
};

Verdict lse_effect(const Desk& desk, std::vector<PairResult>& pairs) {
    Verdict v;
    pairs.push_back({run_or_reuse(desk, 0, true), run_or_reuse(desk, 0, false)});
    std::printf("  seed 0: %s\n", pairs[0].describe().c_str());
    if (pairs[0].ok()) {
        v.detail = "seed 0: " + pairs[0].describe();
        return v;
    }
    for (std::uint64_t s : {1, 2}) {
        pairs.push_back({run_or_reuse(desk, s, true), run_or_reuse(desk, s, false)});
        std::printf("  seed %llu: %s\n", static_cast<unsigned long long>(s), pairs.back().describe().c_str());
    }
    std::vector<double> ema_l, ema_m, gap, mass_gap;
    for (const auto& p : pairs) {
        ema_l.push_back(p.lse.ema);
        ema_m.push_back(p.mse.ema);
        gap.push_back(p.lse.eval.message_accuracy_pct - p.mse.eval.message_accuracy_pct);
        mass_gap.push_back(zero_mass(p.lse.eval) - zero_mass(p.mse.eval));
    }
    v.check(median3(ema_l) >= 0.98, "median ema bit acc (lse) >= 0.98");
    v.check(median3(ema_m) >= 0.98, "median ema bit acc (mse only) >= 0.98");
    v.check(median3(gap) >= 5.0, "median message accuracy gain >= 5 points");
    v.check(median3(mass_gap) > 0.0, "median zero-error mass increases");
    v.detail = "median over 3 seeds: ema lse " + fmt("%.4f", median3(ema_l)) + " mse " + fmt("%.4f", median3(ema_m)) +
               ", msg acc gain " + fmt("%.2f", median3(gap)) + " points, zero-error mass gain " +
               fmt("%.4f", median3(mass_gap));
    return v;
}

Verdict robustness_protocol(const Desk& desk, const std::vector<PairResult>& pairs) {
    Verdict v;
    if (pairs.empty()) {
        v.check(false, "needs the desk-scale checkpoints");
        return v;
    }
    const RunConfig cfg = desk_config(desk, 0, true);
    const auto model = message::load_model(pairs[0].lse.checkpoint, 16);
    const auto rep = harness::robustness(model, desk.eval, cfg, kMessagesPerImage, kEvalSeed);
    const std::vector<std::pair<std::string, std::string>> expect = {{"none", ""},
                                                                     {"gaussian_blur", "kernel=5, sigma=2"},
                                                                     {"gaussian_noise", "mean=0, sigma=0.2"},
                                                                     {"rgb2bgr", ""},
                                                                     {"jpeg", "quality=80"}};
    v.check(rep.rows.size() == 5, "exactly five rows");
    for (std::size_t i = 0; i < std::min<std::size_t>(5, rep.rows.size()); ++i) {
        v.check(rep.rows[i].kind == expect[i].first, "row " + std::to_string(i) + " kind");
        if (!expect[i].second.empty()) v.check(rep.rows[i].parameters == expect[i].second, expect[i].first + " parameters");
    }
    harness::EvalOptions opts;
    opts.messages_per_image = kMessagesPerImage;
    opts.seed = kEvalSeed;
    const auto plain = harness::evaluate(model, desk.eval, opts).summary;
    std::string table;
    if (rep.rows.size() == 5) {
        v.check(rep.rows[0].bit_accuracy_pct == 100.0 * plain.bit_accuracy &&
                    rep.rows[0].message_accuracy_pct == plain.message_accuracy_pct,
                "none row equals plain evaluation");
        const double noise = rep.rows[2].message_accuracy_pct;
        for (int i : {1, 3, 4}) {
            v.check(noise < rep.rows[i].message_accuracy_pct, "noise below " + rep.rows[i].kind);
        }
        for (const auto& r : rep.rows) table += r.kind + " " + fmt("%.1f", r.message_accuracy_pct) + "% ";
    }
    v.detail = "message acc by row: " + table;
    return v;
}

Verdict reproducibility(const fs::path& work) {
    Verdict v;
    const fs::path root = work / "repro";
    fs::remove_all(root);
    fs::create_directories(root);

    RunConfig cfg;
    cfg.d = 16;
    cfg.image_height = cfg.image_width = 32;
    cfg.seed = 9;
    cfg.max_iterations = 120;
    cfg.log_interval = 40;
    cfg.checkpoint_interval = 60;
    cfg.probe_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.tau1 = 0.55;
    cfg.tau2 = 0.6;

    train::Dataset data;
    Rng rng = make_stream(3, stream::kData);
    for (int i = 0; i < 80; ++i) {
        data.images.push_back(train::procedural_image(rng, 32, 32, train::ImageStyle::Textured));
        data.names.push_back("r" + std::to_string(i));
    }
    auto make_codec = [] {
        auto c = std::make_unique<codec::ConvAutoencoder>(8, 4);
        c->freeze();
        return c;
    };
    const std::string codec_hash = make_codec()->parameter_hash();

    train::TrainRun run_a(cfg, make_codec(), data), run_b(cfg, make_codec(), data);
    const auto a = train::train(run_a, root / "a");
    const auto b = train::train(run_b, root / "b");
    v.check(a.final_state.running_bit_acc == b.final_state.running_bit_acc, "same seed gives identical ema");
    v.check(a.final_probe.bit_accuracy == b.final_probe.bit_accuracy &&
                a.final_probe.message_accuracy_pct == b.final_probe.message_accuracy_pct,
            "same seed gives identical probe metrics");
    const auto& ea = run_a.model().encoder->parameters();
    const auto& eb = run_b.model().encoder->parameters();
    const auto& da = run_a.model().decoder->parameters();
    const auto& db = run_b.model().decoder->parameters();
    v.check(std::equal(ea.begin(), ea.end(), eb.begin()) && std::equal(da.begin(), da.end(), db.begin()),
            "same seed gives identical parameters");

    harness::EvalOptions opts;
    opts.messages_per_image = 2;
    opts.seed = 5;
    const auto in_memory = harness::evaluate(run_a.model(), data, opts).to_json().dump();
    const auto reloaded = harness::evaluate(message::load_model(a.final_checkpoint, 16), data, opts).to_json().dump();
    v.check(in_memory == reloaded, "save then load evaluates bit-identically");

    v.check(a.codec_hash_before == codec_hash && a.codec_hash_after == codec_hash &&
                run_a.model().codec->parameter_hash() == codec_hash,
            "codec hash unchanged by training");
    v.detail = "120-step runs, ema " + fmt("%.4f", a.final_state.running_bit_acc) + ", eval json " +
               std::to_string(in_memory.size()) + " bytes identical after reload";
    fs::remove_all(root);
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string work = STEGO_ACCEPTANCE_WORK;
    std::vector<int> only;
    app.add_option("--work-dir", work, "directory for generated data and desk-scale runs");
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    if (const char* env = std::getenv("STEGO_ACCEPTANCE_WORK")) work = env;
    const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9}
                                                : std::set<int>(only.begin(), only.end());
    fs::create_directories(work);

    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Verdict()>& fn) {
        if (!selected.count(id)) return;
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        std::string why;
        for (const auto& f : v.failures) why += (why.empty() ? "" : "; ") + f;
        std::printf("%s criterion %d (%s): %s%s\n", v.pass() ? "PASS" : "FAIL", id, name, v.detail.c_str(),
                    v.pass() ? "" : (" | failed: " + why).c_str());
        std::fflush(stdout);
        if (!v.pass()) ++failed;
    };

    report(1, "metric exactness", metric_exactness);
    report(2, "lse analytics", lse_analytics);
    report(3, "lse gradient", lse_gradient);
    report(4, "composite loss gating", composite_gating);
    report(5, "shape and identity pipeline", shape_identity);
    report(6, "transform fidelity", transform_fidelity);

    Desk desk;
    desk.work = work;
    std::vector<PairResult> pairs;
    if (selected.count(7) || selected.count(8)) {
        try {
            prepare_desk(desk);
            std::printf("  codec reconstruction psnr on held-out images: %.2f dB\n", desk.codec_psnr);
        } catch (const std::exception& e) {
            std::printf("  desk-scale setup failed: %s\n", e.what());
        }
    }
    report(7, "desk-scale lse effect", [&] { return lse_effect(desk, pairs); });
    report(8, "robustness protocol", [&] {
        if (pairs.empty()) pairs.push_back({run_or_reuse(desk, 0, true), run_or_reuse(desk, 0, false)});
        return robustness_protocol(desk, pairs);
    });
    report(9, "reproducibility", [&] { return reproducibility(work); });
    return failed == 0 ? 0 : 1;
}
