// OpenMP kernels vs the serial reference on the layer shapes used in training.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "stego/nn/kernels.hpp"

using namespace stego::nn;

namespace {

struct Case {
    ConvGeometry g;
    int n, size;
};

// Message decoder and codec decoder layers at 32x32, batch 8.
const Case kCases[] = {
    {{3, 16, 3, 1, 1}, 8, 32},   // decoder stem
    {{16, 32, 3, 2, 1}, 8, 32},  // decoder stride-2 block
    {{32, 64, 3, 2, 1}, 8, 16},  //
    {{64, 64, 3, 1, 1}, 8, 4},   // decoder tail / encoder bottom
    {{32, 16, 3, 1, 1}, 8, 16},  // codec upsampling block
    {{16, 3, 3, 1, 1}, 8, 32},   // codec output
};

struct Data {
    Tensor x, dy;
    std::vector<double> w, b;
};

Data make_data(const Case& c) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    Data d;
    d.x = Tensor(c.n, c.g.in_channels, c.size, c.size);
    for (double& v : d.x.vec()) v = u(rng);
    d.w.resize(c.g.weight_count());
    for (double& v : d.w) v = u(rng);
    d.b.assign(c.g.out_channels, 0.1);
    const int o = c.g.out_size(c.size);
    d.dy = Tensor(c.n, c.g.out_channels, o, o);
    for (double& v : d.dy.vec()) v = u(rng);
    return d;
}

void set_label(benchmark::State& state, const Case& c) {
    const int o = c.g.out_size(c.size);
    const double macs = static_cast<double>(c.g.weight_count()) * o * o * c.n;
    state.counters["GMAC/s"] = benchmark::Counter(macs * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvForward(benchmark::State& state) {
    const Case& c = kCases[state.range(0)];
    const Data d = make_data(c);
    Tensor y;
    for (auto _ : state) {
        kernels::conv2d_forward(c.g, d.w, d.b, d.x, y);
        benchmark::DoNotOptimize(y.data());
    }
    set_label(state, c);
}

void BM_ConvForwardReference(benchmark::State& state) {
    const Case& c = kCases[state.range(0)];
    const Data d = make_data(c);
    Tensor y;
    for (auto _ : state) {
        reference::conv2d_forward(c.g, d.w, d.b, d.x, y);
        benchmark::DoNotOptimize(y.data());
    }
    set_label(state, c);
}

void BM_ConvBackward(benchmark::State& state) {
    const Case& c = kCases[state.range(0)];
    const Data d = make_data(c);
    Tensor dx;
    std::vector<double> dw(d.w.size()), db(d.b.size());
    for (auto _ : state) {
        kernels::conv2d_backward(c.g, d.w, d.x, d.dy, &dx, dw, db);
        benchmark::DoNotOptimize(dx.data());
    }
    set_label(state, c);
}

void BM_ConvBackwardReference(benchmark::State& state) {
    const Case& c = kCases[state.range(0)];
    const Data d = make_data(c);
    Tensor dx;
    std::vector<double> dw(d.w.size()), db(d.b.size());
    for (auto _ : state) {
        reference::conv2d_backward(c.g, d.w, d.x, d.dy, &dx, dw, db);
        benchmark::DoNotOptimize(dx.data());
    }
    set_label(state, c);
}

void BM_Linear(benchmark::State& state, bool reference_path) {
    const int in = 1024, out = 16, n = 8;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor x(n, in, 1, 1), y;
    for (double& v : x.vec()) v = u(rng);
    std::vector<double> w(static_cast<std::size_t>(in) * out), b(out, 0.0), dw(w.size()), db(out);
    for (double& v : w) v = u(rng);
    Tensor dy(n, out, 1, 1, 0.5), dx;
    for (auto _ : state) {
        if (reference_path) {
            reference::linear_forward(in, out, w, b, x, y);
            reference::linear_backward(in, out, w, x, dy, &dx, dw, db);
        } else {
            kernels::linear_forward(in, out, w, b, x, y);
            kernels::linear_backward(in, out, w, x, dy, &dx, dw, db);
        }
        benchmark::DoNotOptimize(dx.data());
    }
}

}  // namespace

BENCHMARK(BM_ConvForward)->DenseRange(0, 5);
BENCHMARK(BM_ConvForwardReference)->DenseRange(0, 5);
BENCHMARK(BM_ConvBackward)->DenseRange(0, 5);
BENCHMARK(BM_ConvBackwardReference)->DenseRange(0, 5);
BENCHMARK_CAPTURE(BM_Linear, kernels, false);
BENCHMARK_CAPTURE(BM_Linear, reference, true);

BENCHMARK_MAIN();
