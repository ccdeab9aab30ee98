#include <doctest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "stego/core/errors.hpp"
#include "stego/losses/losses.hpp"

using namespace stego;
using BigFloat = boost::multiprecision::cpp_dec_float_50;

namespace {

double lse_oracle(const std::vector<double>& p, const std::vector<double>& t) {
    BigFloat s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const BigFloat e = BigFloat(p[i]) - BigFloat(t[i]);
        s += boost::multiprecision::exp(e * e);
    }
    return static_cast<double>(boost::multiprecision::log(s));
}

}  // namespace

TEST_CASE("lse of a perfect prediction is log d") {
    for (int d : {1, 2, 100}) {
        std::vector<double> t(d, 1.0);
        CHECK(std::abs(losses::lse_loss(t, t) - std::log(d)) <= 1e-12);
    }
}

TEST_CASE("lse lies between the max squared error and max + log d") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(1, 64);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 10000; ++trial) {
        const int d = len(rng);
        std::vector<double> p(d), t(d);
        double mx = -1;
        for (int i = 0; i < d; ++i) {
            p[i] = u(rng);
            t[i] = u(rng);
            mx = std::max(mx, (p[i] - t[i]) * (p[i] - t[i]));
        }
        const double v = losses::lse_loss(p, t);
        REQUIRE(v >= mx - 1e-9);
        REQUIRE(v <= mx + std::log(d) + 1e-9);
    }
}

TEST_CASE("lse stays finite and exact for squared errors up to 700 and beyond") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (double top : {1.0, 50.0, 700.0, 5000.0}) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> p(32), t(32, 0.0);
            for (double& v : p) v = std::sqrt(top * u(rng));
            p[0] = std::sqrt(top);
            const double v = losses::lse_loss(p, t);
            REQUIRE(std::isfinite(v));
            const double ref = lse_oracle(p, t);
            CHECK(std::abs(v - ref) / std::abs(ref) < 1e-12);
        }
    }
}

TEST_CASE("lse gradient matches central differences") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (int d : {2, 16, 100}) {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> p(d), t(d), g(d);
            for (int i = 0; i < d; ++i) {
                p[i] = u(rng);
                t[i] = u(rng) < 0.5 ? 0.0 : 1.0;
            }
            losses::lse_loss(p, t, g);
            const auto num = testutil::numeric_grad(p, [&] { return losses::lse_loss(p, t); }, 1e-6);
            REQUIRE(testutil::rel_error(g, num) < 1e-4);
        }
    }
}

TEST_CASE("lse rejects bad input") {
    std::vector<double> a{0.1, 0.2}, b{1.0};
    CHECK_THROWS_AS(losses::lse_loss(a, b), Error);
    CHECK_THROWS_AS(losses::lse_loss(std::vector<double>{}, std::vector<double>{}), Error);
    std::vector<double> nan{std::numeric_limits<double>::quiet_NaN(), 0.0}, z{0.0, 0.0};
    try {
        losses::lse_loss(nan, z);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
}

TEST_CASE("message mse and its gradient") {
    std::vector<double> p{0.2, 0.9, 0.5}, t{0.0, 1.0, 1.0}, g(3);
    const double v = losses::message_mse(p, t, g);
    CHECK(v == doctest::Approx((0.04 + 0.01 + 0.25) / 3).epsilon(1e-14));
    const auto num = testutil::numeric_grad(p, [&] { return losses::message_mse(p, t); });
    CHECK(testutil::rel_error(g, num) < 1e-7);
}

TEST_CASE("perceptual proxy is zero on equal images and its gradient matches differences") {
    std::mt19937_64 rng(2);
    const auto a = testutil::random_tensor({2, 3, 8, 8}, rng, 0, 1);
    auto b = testutil::random_tensor({2, 3, 8, 8}, rng, 0, 1);
    CHECK(losses::perceptual_proxy(a, a) == 0.0);
    nn::Tensor g;
    losses::perceptual_proxy(a, b, &g);
    const auto num = testutil::numeric_grad(b.vec(), [&] { return losses::perceptual_proxy(a, b); });
    CHECK(testutil::rel_error(g.vec(), num) < 1e-6);
}

TEST_CASE("composite loss equals the hand-composed weighted sum") {
    std::mt19937_64 rng(8);
    const int n = 3, d = 6;
    const auto cover = testutil::random_tensor({n, 3, 16, 16}, rng, 0, 1);
    const auto stego = testutil::random_tensor({n, 3, 16, 16}, rng, 0, 1);
    const auto probs = testutil::random_tensor({n, d, 1, 1}, rng, 0, 1);
    nn::Tensor targets(n, d, 1, 1);
    for (double& v : targets.vec()) v = rng() & 1u;

    losses::LossOptions opts;
    opts.weights = {0.7, 1.3, 0.25, 9.0};
    opts.perceptual = losses::resolve_perceptual("proxy");

    double img = 0;
    for (std::size_t i = 0; i < cover.size(); ++i) img += std::pow(cover.vec()[i] - stego.vec()[i], 2);
    img /= static_cast<double>(cover.size());
    double msg = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) msg += std::pow(probs.vec()[i] - targets.vec()[i], 2);
    msg /= static_cast<double>(probs.size());
    double lse = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> p(probs.sample(i).begin(), probs.sample(i).end());
        std::vector<double> t(targets.sample(i).begin(), targets.sample(i).end());
        lse += lse_oracle(p, t);
    }
    lse /= n;
    const double perc = losses::perceptual_proxy(cover, stego);

    for (auto phase : {losses::Phase::FixedBatch, losses::Phase::FullData, losses::Phase::RobustLse}) {
        losses::CurriculumState st;
        st.phase = phase;
        const auto b = losses::total_loss(cover, stego, probs, targets, opts, st);
        CHECK(std::abs(b.image_mse - img) <= 1e-9);
        CHECK(std::abs(b.message_mse - msg) <= 1e-9);
        CHECK(std::abs(b.perceptual - perc) <= 1e-9);
        const bool active = phase == losses::Phase::RobustLse;
        CHECK(b.lse_active == active);
        if (active) {
            CHECK(std::abs(b.lse - lse) <= 1e-9);
        } else {
            CHECK(b.lse == 0.0);
        }
        const double expect = 0.7 * perc + 1.3 * img + 9.0 * msg + (active ? 0.25 * lse : 0.0);
        CHECK(std::abs(b.total - expect) <= 1e-9);
    }

    losses::CurriculumState robust;
    robust.phase = losses::Phase::RobustLse;
    opts.lse_enabled = false;
    CHECK(losses::total_loss(cover, stego, probs, targets, opts, robust).lse == 0.0);
}

TEST_CASE("composite loss gradients match central differences") {
    std::mt19937_64 rng(4);
    const int n = 2, d = 5;
    const auto cover = testutil::random_tensor({n, 3, 8, 8}, rng, 0, 1);
    auto stego = testutil::random_tensor({n, 3, 8, 8}, rng, 0, 1);
    auto probs = testutil::random_tensor({n, d, 1, 1}, rng, 0, 1);
    nn::Tensor targets(n, d, 1, 1);
    for (double& v : targets.vec()) v = rng() & 1u;
    losses::LossOptions opts;
    opts.perceptual = losses::resolve_perceptual("proxy");
    losses::CurriculumState st;
    st.phase = losses::Phase::RobustLse;
    losses::LossGrads g;
    losses::total_loss(cover, stego, probs, targets, opts, st, &g);
    auto f = [&] { return losses::total_loss(cover, stego, probs, targets, opts, st).total; };
    CHECK(testutil::rel_error(g.d_stego.vec(), testutil::numeric_grad(stego.vec(), f)) < 1e-6);
    CHECK(testutil::rel_error(g.d_probs.vec(), testutil::numeric_grad(probs.vec(), f)) < 1e-6);
}

namespace {

// Scalar restatement of the schedule: EMA seeded by the first value, one promotion per step.
struct SimState {
    int phase = 0;
    double ema = 0;
    bool seen = false;
};

SimState simulate(SimState s, double acc, double decay, double t1, double t2) {
    s.ema = s.seen ? decay * s.ema + (1 - decay) * acc : acc;
    s.seen = true;
    if (s.phase == 0 && s.ema >= t1) {
        s.phase = 1;
    } else if (s.phase == 1 && s.ema >= t2) {
        s.phase = 2;
    }
    return s;
}

}  // namespace

TEST_CASE("curriculum transitions follow a scalar simulation exactly") {
    RunConfig cfg;
    std::mt19937_64 rng(13);
    std::vector<std::vector<double>> traces;
    std::vector<double> ramp, jump, noisy, flat;
    for (int i = 0; i < 2000; ++i) {
        ramp.push_back(std::min(1.0, 0.5 + i / 1500.0));
        jump.push_back(i < 10 ? 0.5 : 1.0);
        noisy.push_back(std::clamp(0.6 + i / 2500.0 + 0.1 * (static_cast<double>(rng() % 1000) / 1000 - 0.5), 0.0, 1.0));
        flat.push_back(0.93);
    }
    traces = {ramp, jump, noisy, flat, {1.0, 1.0, 1.0}};
    for (const auto& tr : traces) {
        losses::CurriculumState st;
        SimState sim;
        for (double acc : tr) {
            st = losses::advance_curriculum(st, acc, cfg);
            sim = simulate(sim, acc, cfg.ema_decay, cfg.tau1, cfg.tau2);
            REQUIRE(static_cast<int>(st.phase) == sim.phase);
            REQUIRE(st.running_bit_acc == sim.ema);
        }
    }
    // A perfect first batch promotes only one phase per step.
    losses::CurriculumState st;
    st = losses::advance_curriculum(st, 1.0, cfg);
    CHECK(st.phase == losses::Phase::FullData);
    st = losses::advance_curriculum(st, 1.0, cfg);
    CHECK(st.phase == losses::Phase::RobustLse);
    CHECK_THROWS_AS(losses::advance_curriculum(st, 1.5, cfg), Error);
}

TEST_CASE("perceptual resolution") {
    CHECK(!losses::resolve_perceptual("none"));
    CHECK(losses::resolve_perceptual("proxy"));
    CHECK_THROWS_AS(losses::resolve_perceptual("bogus"), Error);
}
