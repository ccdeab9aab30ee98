#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "stego/core/errors.hpp"
#include "stego/nn/checkpoint.hpp"
#include "stego/nn/kernels.hpp"
#include "stego/nn/layers.hpp"
#include "stego/nn/optim.hpp"

using namespace stego;
using nn::Tensor;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("conv kernels agree with the serial reference") {
    std::mt19937_64 rng(1);
    const nn::ConvGeometry geoms[] = {{3, 8, 3, 1, 1}, {5, 4, 3, 2, 1}, {4, 6, 1, 1, 0}, {2, 3, 5, 1, 2}, {7, 5, 3, 2, 0}};
    for (const auto& g : geoms) {
        const Tensor x = testutil::random_tensor({3, g.in_channels, 9, 10}, rng);
        const auto w = random_vec(g.weight_count(), rng);
        const auto b = random_vec(g.out_channels, rng);
        Tensor y1, y2;
        nn::kernels::conv2d_forward(g, w, b, x, y1);
        nn::reference::conv2d_forward(g, w, b, x, y2);
        REQUIRE(y1.shape() == y2.shape());
        CHECK(max_abs_diff(y1.vec(), y2.vec()) < 1e-12);

        const Tensor dy = testutil::random_tensor(y1.shape(), rng);
        Tensor dx1, dx2;
        std::vector<double> dw1(w.size()), dw2(w.size()), db1(b.size()), db2(b.size());
        nn::kernels::conv2d_backward(g, w, x, dy, &dx1, dw1, db1);
        nn::reference::conv2d_backward(g, w, x, dy, &dx2, dw2, db2);
        CHECK(max_abs_diff(dx1.vec(), dx2.vec()) < 1e-12);
        CHECK(max_abs_diff(dw1, dw2) < 1e-11);
        CHECK(max_abs_diff(db1, db2) < 1e-12);
    }
}

TEST_CASE("linear kernels agree with the serial reference") {
    std::mt19937_64 rng(2);
    const int in = 13, out = 7;
    const Tensor x = testutil::random_tensor({4, in, 1, 1}, rng);
    const auto w = random_vec(static_cast<std::size_t>(in) * out, rng);
    const auto b = random_vec(out, rng);
    Tensor y1, y2;
    nn::kernels::linear_forward(in, out, w, b, x, y1);
    nn::reference::linear_forward(in, out, w, b, x, y2);
    CHECK(max_abs_diff(y1.vec(), y2.vec()) < 1e-12);
    const Tensor dy = testutil::random_tensor(y1.shape(), rng);
    Tensor dx1, dx2;
    std::vector<double> dw1(w.size()), dw2(w.size()), db1(out), db2(out);
    nn::kernels::linear_backward(in, out, w, x, dy, &dx1, dw1, db1);
    nn::reference::linear_backward(in, out, w, x, dy, &dx2, dw2, db2);
    CHECK(max_abs_diff(dx1.vec(), dx2.vec()) < 1e-12);
    CHECK(max_abs_diff(dw1, dw2) < 1e-12);
    CHECK(max_abs_diff(db1, db2) < 1e-12);
}

TEST_CASE("kernel results do not depend on the worker count") {
    std::mt19937_64 rng(3);
    const nn::ConvGeometry g{4, 6, 3, 1, 1};
    const Tensor x = testutil::random_tensor({5, 4, 8, 8}, rng);
    const auto w = random_vec(g.weight_count(), rng);
    const auto b = random_vec(6, rng);
    Tensor y;
    nn::kernels::conv2d_forward(g, w, b, x, y);
    const Tensor dy = testutil::random_tensor(y.shape(), rng);
    std::vector<double> dw1(w.size()), dw2(w.size());
    const int keep = nn::num_workers();
    nn::set_num_workers(1);
    nn::kernels::conv2d_backward(g, w, x, dy, nullptr, dw1, {});
    nn::set_num_workers(3);
    nn::kernels::conv2d_backward(g, w, x, dy, nullptr, dw2, {});
    nn::set_num_workers(keep);
    CHECK(dw1 == dw2);
}

TEST_CASE("sequential network gradients match central differences") {
    std::mt19937_64 rng(4);
    nn::Sequential net;
    net.emplace<nn::Conv2d>(3, 4, 3, 2, 1)
        .emplace<nn::SiLU>()
        .emplace<nn::Upsample>(2)
        .emplace<nn::Conv2d>(4, 3, 3, 1, 1)
        .emplace<nn::Downsample>()
        .emplace<nn::SiLU>()
        .emplace<nn::GlobalAvgPool>()
        .emplace<nn::Linear>(3, 2);
    std::vector<double> params(net.param_count());
    Rng init = make_stream(1, 1);
    net.init_params(params, init);
    Tensor x = testutil::random_tensor({2, 3, 6, 5}, rng);
    const Tensor probe = testutil::random_tensor({2, 2, 1, 1}, rng);
    auto loss = [&] {
        const Tensor y = net.forward(params, x);
        return testutil::dot(y.vec(), probe.vec());
    };
    nn::Trace tr;
    net.forward(params, x, &tr);
    std::vector<double> dparams(params.size(), 0.0);
    const Tensor dx = net.backward(params, tr, probe, dparams, true);
    CHECK(testutil::rel_error(dx.vec(), testutil::numeric_grad(x.vec(), loss)) < 1e-6);
    CHECK(testutil::rel_error(dparams, testutil::numeric_grad(params, loss)) < 1e-6);
}

TEST_CASE("channel concat and split are inverse") {
    std::mt19937_64 rng(5);
    const Tensor a = testutil::random_tensor({2, 3, 4, 4}, rng), b = testutil::random_tensor({2, 2, 4, 4}, rng);
    const Tensor c = nn::concat_channels(a, b);
    CHECK(c.c() == 5);
    Tensor a2, b2;
    nn::split_channels(c, 3, a2, b2);
    CHECK(a2.vec() == a.vec());
    CHECK(b2.vec() == b.vec());
}

TEST_CASE("adamw first step moves each parameter by lr against the gradient sign") {
    nn::AdamW opt(3, {.lr = 0.1, .weight_decay = 0.0});
    std::vector<double> p{1.0, 2.0, 3.0};
    const std::vector<double> g{0.5, -2.0, 0.0};
    opt.step(p, g);
    CHECK(p[0] == doctest::Approx(0.9));
    CHECK(p[1] == doctest::Approx(2.1));
    CHECK(p[2] == doctest::Approx(3.0));
}

TEST_CASE("global norm clipping") {
    std::vector<double> a{3.0}, b{4.0};
    const double n = nn::clip_global_norm({std::span<double>(a), std::span<double>(b)}, 1.0);
    CHECK(n == doctest::Approx(5.0));
    CHECK(a[0] == doctest::Approx(0.6));
    CHECK(b[0] == doctest::Approx(0.8));
}

TEST_CASE("checkpoint round trip and corruption detection") {
    nn::Checkpoint ck;
    ck.put({"alpha", {{"k", 3}}, {1.0, -2.5, 1e-300}});
    ck.put({"beta", nlohmann::json::object(), {}});
    const auto bytes = nn::serialize_checkpoint(ck);
    const auto back = nn::deserialize_checkpoint(bytes);
    CHECK(back.section("alpha").params == ck.section("alpha").params);
    CHECK(back.section("alpha").meta == ck.section("alpha").meta);
    CHECK(back.has("beta"));
    CHECK_THROWS_AS(back.section("gamma"), Error);

    for (std::size_t pos : {std::size_t{0}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
        auto bad = bytes;
        bad[pos] ^= 0x40;
        CHECK_THROWS_AS(nn::deserialize_checkpoint(bad), Error);
    }
    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    CHECK_THROWS_AS(nn::deserialize_checkpoint(truncated), Error);

    const auto path = std::filesystem::temp_directory_path() / "stego_unit_ckpt.bin";
    nn::save_checkpoint(ck, path);
    CHECK(nn::load_checkpoint(path).section("alpha").params == ck.section("alpha").params);
    std::filesystem::remove(path);
    try {
        nn::load_checkpoint(path);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
}

TEST_CASE("params hash is sha256 of the raw bytes") {
    CHECK(nn::params_hash({}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::vector<double> a{1.0}, b{1.0 + 1e-15};
    CHECK(nn::params_hash(a) != nn::params_hash(b));
}
