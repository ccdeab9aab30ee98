#include "stego/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stego/core/errors.hpp"

namespace stego::nn {

void set_num_workers(int workers) {
#ifdef _OPENMP
    if (workers >= 1) omp_set_num_threads(workers);
#else
    (void)workers;
#endif
}

int num_workers() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace {

void check_conv(const ConvGeometry& g, std::span<const double> weight, const Tensor& x) {
    if (x.c() != g.in_channels) {
        fail(ErrorKind::InvalidArgument, "conv2d expects " + std::to_string(g.in_channels) + " input channels, got " +
                                             x.shape().str());
    }
    if (weight.size() != g.weight_count()) fail(ErrorKind::InvalidArgument, "conv2d weight size mismatch");
    if (g.out_size(x.h()) <= 0 || g.out_size(x.w()) <= 0) fail(ErrorKind::InvalidArgument, "conv2d input too small");
}

bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1 && g.pad == 0; }

// Output columns [lo, hi) whose input column ox * stride - pad + kx lies inside [0, w).
inline void valid_range(const ConvGeometry& g, int kx, int w, int ow, int& lo, int& hi) {
    const int off = kx - g.pad;
    lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
    hi = (w - 1 - off) < 0 ? 0 : std::min(ow, (w - 1 - off) / g.stride + 1);
    lo = std::min(lo, hi);
}

// col[(c*k + ky)*k + kx][oy*ow + ox], rows `ld` apart.
void im2col(const ConvGeometry& g, const double* img, int h, int w, int oh, int ow, double* col, std::size_t ld) {
    const int k = g.kernel;
    for (int c = 0; c < g.in_channels; ++c) {
        const double* plane = img + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * ld;
                int lo, hi;
                valid_range(g, kx, w, ow, lo, hi);
                const int off = kx - g.pad;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    double* dst = row + static_cast<std::size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + ow, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * w + off;
                    std::fill(dst, dst + lo, 0.0);
                    if (g.stride == 1) {
                        std::copy(src + lo, src + hi, dst + lo);
                    } else {
                        for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride];
                    }
                    std::fill(dst + hi, dst + ow, 0.0);
                }
            }
        }
    }
}

void col2im(const ConvGeometry& g, const double* col, int h, int w, int oh, int ow, double* img, std::size_t ld) {
    const int k = g.kernel;
    std::fill(img, img + static_cast<std::size_t>(g.in_channels) * h * w, 0.0);
    for (int c = 0; c < g.in_channels; ++c) {
        double* plane = img + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * ld;
                int lo, hi;
                valid_range(g, kx, w, ow, lo, hi);
                const int off = kx - g.pad;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    const double* src = row + static_cast<std::size_t>(oy) * ow;
                    double* dst = plane + static_cast<std::size_t>(iy) * w + off;
                    for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride] += src[ox];
                }
            }
        }
    }
}

// Grow-only per-thread buffers; contents are not cleared between uses.
double* scratch(int slot, std::size_t size) {
    thread_local std::vector<double> buffers[4];
    auto& b = buffers[slot];
    if (b.size() < size) b.resize(size);
    return b.data();
}

// NCHW (n, c, P) <-> channel-major [c][n * P].
void to_channel_major(const double* src, int n, int c, std::size_t P, double* dst) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            std::copy_n(src + (static_cast<std::size_t>(i) * c + ch) * P, P, dst + (ch * static_cast<std::size_t>(n) + i) * P);
}

void from_channel_major(const double* src, int n, int c, std::size_t P, double* dst) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            std::copy_n(src + (ch * static_cast<std::size_t>(n) + i) * P, P, dst + (static_cast<std::size_t>(i) * c + ch) * P);
}

constexpr int kTileRows = 4;
constexpr std::size_t kTileCols = 16;

// One R x 16 output tile accumulated in registers over the whole K loop.
template <int R>
void gemm_tile(int K, std::size_t P, const double* A, const double* B, double* out) {
    double acc[R][kTileCols];
    for (int r = 0; r < R; ++r)
        for (std::size_t p = 0; p < kTileCols; ++p) acc[r][p] = out[r * P + p];
    for (int k = 0; k < K; ++k) {
        const double* b = B + k * P;
        double w[R];
        for (int r = 0; r < R; ++r) w[r] = A[static_cast<std::size_t>(r) * K + k];
#pragma omp simd
        for (std::size_t p = 0; p < kTileCols; ++p) {
            for (int r = 0; r < R; ++r) acc[r][p] += w[r] * b[p];
        }
    }
    for (int r = 0; r < R; ++r)
        for (std::size_t p = 0; p < kTileCols; ++p) out[r * P + p] = acc[r][p];
}

void gemm_edge(int rows, int K, std::size_t P, std::size_t len, const double* A, const double* B, double* out) {
    for (int r = 0; r < rows; ++r) {
        double acc[kTileCols];
        for (std::size_t p = 0; p < len; ++p) acc[p] = out[r * P + p];
        const double* a = A + static_cast<std::size_t>(r) * K;
        for (int k = 0; k < K; ++k) {
            const double* b = B + k * P;
            for (std::size_t p = 0; p < len; ++p) acc[p] += a[k] * b[p];
        }
        for (std::size_t p = 0; p < len; ++p) out[r * P + p] = acc[p];
    }
}

// out[M][P] += A[M][K] * B[K][P]. Column panels are the outer loop so a K x 16
// panel of B stays cached across row blocks; each output element is summed
// in k order by a single thread.
void gemm_acc(int M, int K, std::size_t P, const double* A, const double* B, double* out) {
    const std::ptrdiff_t panels = static_cast<std::ptrdiff_t>((P + kTileCols - 1) / kTileCols);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < panels; ++pi) {
        const std::size_t p0 = static_cast<std::size_t>(pi) * kTileCols;
        const std::size_t len = std::min(kTileCols, P - p0);
        for (int m = 0; m < M; m += kTileRows) {
            const int rows = std::min(kTileRows, M - m);
            const double* a = A + static_cast<std::size_t>(m) * K;
            double* o = out + m * P + p0;
            if (len < kTileCols) {
                gemm_edge(rows, K, P, len, a, B + p0, o);
                continue;
            }
            switch (rows) {
                case 4: gemm_tile<4>(K, P, a, B + p0, o); break;
                case 3: gemm_tile<3>(K, P, a, B + p0, o); break;
                case 2: gemm_tile<2>(K, P, a, B + p0, o); break;
                default: gemm_tile<1>(K, P, a, B + p0, o); break;
            }
        }
    }
}

std::vector<double> transpose(const double* src, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    constexpr std::size_t kBlock = 32;
    for (std::size_t r0 = 0; r0 < rows; r0 += kBlock)
        for (std::size_t c0 = 0; c0 < cols; c0 += kBlock)
            for (std::size_t r = r0; r < std::min(rows, r0 + kBlock); ++r)
                for (std::size_t c = c0; c < std::min(cols, c0 + kBlock); ++c) t[c * rows + r] = src[r * cols + c];
    return t;
}

// out[K][P] = A^T[K][M] * B[M][P]  (A is [M][K])
void gemm_tn(int M, int K, std::size_t P, const double* A, const double* B, double* out) {
    const std::vector<double> at = transpose(A, M, K);
    std::fill(out, out + static_cast<std::size_t>(K) * P, 0.0);
    gemm_acc(K, M, P, at.data(), B, out);
}

// out[M][K] += A[M][P] * B^T (B is [K][P]). Each row of B is read once per
// block of four rows of A; every dot product runs over p in order.
void gemm_nt_acc(int M, int K, std::size_t P, const double* A, const double* B, double* out) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < K; ++k) {
        const double* b = B + k * P;
        int m = 0;
        for (; m + 4 <= M; m += 4) {
            const double* a0 = A + (m + 0) * P;
            const double* a1 = A + (m + 1) * P;
            const double* a2 = A + (m + 2) * P;
            const double* a3 = A + (m + 3) * P;
            double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
            for (std::size_t p = 0; p < P; ++p) {
                s0 += a0[p] * b[p];
                s1 += a1[p] * b[p];
                s2 += a2[p] * b[p];
                s3 += a3[p] * b[p];
            }
            out[static_cast<std::size_t>(m + 0) * K + k] += s0;
            out[static_cast<std::size_t>(m + 1) * K + k] += s1;
            out[static_cast<std::size_t>(m + 2) * K + k] += s2;
            out[static_cast<std::size_t>(m + 3) * K + k] += s3;
        }
        for (; m < M; ++m) {
            const double* a = A + m * P;
            double s = 0;
#pragma omp simd reduction(+ : s)
            for (std::size_t p = 0; p < P; ++p) s += a[p] * b[p];
            out[static_cast<std::size_t>(m) * K + k] += s;
        }
    }
}

// Whole-batch im2col into `col`: [K][n * P].
void batch_columns(const ConvGeometry& g, const Tensor& x, int oh, int ow, double* col) {
    const int n = x.n();
    const std::size_t P = static_cast<std::size_t>(oh) * ow;
    if (is_pointwise(g)) {
        to_channel_major(x.data(), n, g.in_channels, P, col);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) im2col(g, x.sample(i).data(), x.h(), x.w(), oh, ow, col + i * P, n * P);
}

}  // namespace

namespace kernels {

void conv2d_forward(const ConvGeometry& g, std::span<const double> weight, std::span<const double> bias,
                    const Tensor& x, Tensor& y) {
    check_conv(g, weight, x);
    const int n = x.n();
    const int oh = g.out_size(x.h()), ow = g.out_size(x.w());
    const int K = g.in_channels * g.kernel * g.kernel;
    const std::size_t P = static_cast<std::size_t>(oh) * ow, NP = n * P;
    if (!(y.shape() == Shape{n, g.out_channels, oh, ow})) y = Tensor(n, g.out_channels, oh, ow);

    double* col = scratch(0, static_cast<std::size_t>(K) * NP);
    batch_columns(g, x, oh, ow, col);
    double* out = scratch(1, static_cast<std::size_t>(g.out_channels) * NP);
    for (int co = 0; co < g.out_channels; ++co) std::fill(out + co * NP, out + (co + 1) * NP, bias.empty() ? 0.0 : bias[co]);
    gemm_acc(g.out_channels, K, NP, weight.data(), col, out);
    from_channel_major(out, n, g.out_channels, P, y.data());
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> weight, const Tensor& x, const Tensor& dy,
                     Tensor* dx, std::span<double> dweight, std::span<double> dbias) {
    check_conv(g, weight, x);
    const int n = x.n(), h = x.h(), w = x.w();
    const int oh = g.out_size(h), ow = g.out_size(w);
    const int K = g.in_channels * g.kernel * g.kernel;
    const std::size_t P = static_cast<std::size_t>(oh) * ow, NP = n * P;
    if (!(dy.shape() == Shape{n, g.out_channels, oh, ow})) fail(ErrorKind::InvalidArgument, "conv2d dy shape");
    if (dx && !(dx->shape() == x.shape())) *dx = Tensor(x.shape());

    double* g_out = scratch(1, static_cast<std::size_t>(g.out_channels) * NP);
    to_channel_major(dy.data(), n, g.out_channels, P, g_out);

    if (!dweight.empty()) {
        double* col = scratch(0, static_cast<std::size_t>(K) * NP);
        batch_columns(g, x, oh, ow, col);
        gemm_nt_acc(g.out_channels, K, NP, g_out, col, dweight.data());
    }
    if (!dbias.empty()) {
        for (int co = 0; co < g.out_channels; ++co) {
            double s = 0.0;
            const double* row = g_out + co * NP;
#pragma omp simd reduction(+ : s)
            for (std::size_t p = 0; p < NP; ++p) s += row[p];
            dbias[co] += s;
        }
    }
    if (dx) {
        double* dcol = scratch(2, static_cast<std::size_t>(K) * NP);
        gemm_tn(g.out_channels, K, NP, weight.data(), g_out, dcol);
        if (is_pointwise(g)) {
            from_channel_major(dcol, n, g.in_channels, P, dx->data());
        } else {
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i) col2im(g, dcol + i * P, h, w, oh, ow, dx->sample(i).data(), NP);
        }
    }
}

void linear_forward(int in, int out, std::span<const double> weight, std::span<const double> bias, const Tensor& x,
                    Tensor& y) {
    if (static_cast<int>(x.shape().sample_size()) != in) fail(ErrorKind::InvalidArgument, "linear input size");
    const int n = x.n();
    if (!(y.shape() == Shape{n, out, 1, 1})) y = Tensor(n, out, 1, 1);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* xi = x.sample(i).data();
        double* yi = y.sample(i).data();
        for (int o = 0; o < out; ++o) {
            const double* wo = weight.data() + static_cast<std::size_t>(o) * in;
            double s = 0.0;
#pragma omp simd reduction(+ : s)
            for (int j = 0; j < in; ++j) s += wo[j] * xi[j];
            yi[o] = s + (bias.empty() ? 0.0 : bias[o]);
        }
    }
}

void linear_backward(int in, int out, std::span<const double> weight, const Tensor& x, const Tensor& dy, Tensor* dx,
                     std::span<double> dweight, std::span<double> dbias) {
    const int n = x.n();
    if (dx && !(dx->shape() == x.shape())) *dx = Tensor(x.shape());
    for (int i = 0; i < n; ++i) {
        const double* xi = x.sample(i).data();
        const double* gi = dy.sample(i).data();
        if (!dweight.empty()) {
            for (int o = 0; o < out; ++o) {
                double* dw = dweight.data() + static_cast<std::size_t>(o) * in;
                const double go = gi[o];
#pragma omp simd
                for (int j = 0; j < in; ++j) dw[j] += go * xi[j];
            }
        }
        if (!dbias.empty()) {
            for (int o = 0; o < out; ++o) dbias[o] += gi[o];
        }
        if (dx) {
            double* dxi = dx->sample(i).data();
            std::fill(dxi, dxi + in, 0.0);
            for (int o = 0; o < out; ++o) {
                const double* wo = weight.data() + static_cast<std::size_t>(o) * in;
                const double go = gi[o];
#pragma omp simd
                for (int j = 0; j < in; ++j) dxi[j] += go * wo[j];
            }
        }
    }
}

void silu_forward(const Tensor& x, Tensor& y) {
    if (!(y.shape() == x.shape())) y = Tensor(x.shape());
    const double* px = x.data();
    double* py = y.data();
    const std::ptrdiff_t size = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < size; ++i) py[i] = px[i] / (1.0 + std::exp(-px[i]));
}

void silu_backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
    if (!(dx.shape() == x.shape())) dx = Tensor(x.shape());
    const double* px = x.data();
    const double* pg = dy.data();
    double* pd = dx.data();
    const std::ptrdiff_t size = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < size; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-px[i]));
        pd[i] = pg[i] * s * (1.0 + px[i] * (1.0 - s));
    }
}

void resize_nearest_forward(const Tensor& x, int out_h, int out_w, Tensor& y) {
    const Shape s = x.shape();
    if (!(y.shape() == Shape{s.n, s.c, out_h, out_w})) y = Tensor(s.n, s.c, out_h, out_w);
    const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = x.data() + static_cast<std::size_t>(p) * s.plane();
        double* dst = y.data() + static_cast<std::size_t>(p) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const int iy = static_cast<int>(static_cast<long>(oy) * s.h / out_h);
            for (int ox = 0; ox < out_w; ++ox) {
                const int ix = static_cast<int>(static_cast<long>(ox) * s.w / out_w);
                dst[oy * out_w + ox] = src[iy * s.w + ix];
            }
        }
    }
}

void resize_nearest_backward(const Tensor& dy, const Shape& in_shape, Tensor& dx) {
    if (!(dx.shape() == in_shape)) dx = Tensor(in_shape);
    const int out_h = dy.h(), out_w = dy.w();
    const int planes = in_shape.n * in_shape.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = dy.data() + static_cast<std::size_t>(p) * out_h * out_w;
        double* dst = dx.data() + static_cast<std::size_t>(p) * in_shape.plane();
        std::fill(dst, dst + in_shape.plane(), 0.0);
        for (int oy = 0; oy < out_h; ++oy) {
            const int iy = static_cast<int>(static_cast<long>(oy) * in_shape.h / out_h);
            for (int ox = 0; ox < out_w; ++ox) {
                const int ix = static_cast<int>(static_cast<long>(ox) * in_shape.w / out_w);
                dst[iy * in_shape.w + ix] += src[oy * out_w + ox];
            }
        }
    }
}

namespace {
inline int pool_start(int i, int in, int out) { return static_cast<int>(static_cast<long>(i) * in / out); }
inline int pool_end(int i, int in, int out) {
    return static_cast<int>((static_cast<long>(i + 1) * in + out - 1) / out);
}
}  // namespace

void adaptive_avg_pool_forward(const Tensor& x, int out_h, int out_w, Tensor& y) {
    const Shape s = x.shape();
    if (!(y.shape() == Shape{s.n, s.c, out_h, out_w})) y = Tensor(s.n, s.c, out_h, out_w);
    const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = x.data() + static_cast<std::size_t>(p) * s.plane();
        double* dst = y.data() + static_cast<std::size_t>(p) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const int y0 = pool_start(oy, s.h, out_h), y1 = pool_end(oy, s.h, out_h);
            for (int ox = 0; ox < out_w; ++ox) {
                const int x0 = pool_start(ox, s.w, out_w), x1 = pool_end(ox, s.w, out_w);
                double sum = 0.0;
                for (int iy = y0; iy < y1; ++iy)
                    for (int ix = x0; ix < x1; ++ix) sum += src[iy * s.w + ix];
                dst[oy * out_w + ox] = sum / ((y1 - y0) * (x1 - x0));
            }
        }
    }
}

void adaptive_avg_pool_backward(const Tensor& dy, const Shape& in_shape, Tensor& dx) {
    if (!(dx.shape() == in_shape)) dx = Tensor(in_shape);
    const int out_h = dy.h(), out_w = dy.w();
    const int planes = in_shape.n * in_shape.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = dy.data() + static_cast<std::size_t>(p) * out_h * out_w;
        double* dst = dx.data() + static_cast<std::size_t>(p) * in_shape.plane();
        std::fill(dst, dst + in_shape.plane(), 0.0);
        for (int oy = 0; oy < out_h; ++oy) {
            const int y0 = pool_start(oy, in_shape.h, out_h), y1 = pool_end(oy, in_shape.h, out_h);
            for (int ox = 0; ox < out_w; ++ox) {
                const int x0 = pool_start(ox, in_shape.w, out_w), x1 = pool_end(ox, in_shape.w, out_w);
                const double gv = src[oy * out_w + ox] / ((y1 - y0) * (x1 - x0));
                for (int iy = y0; iy < y1; ++iy)
                    for (int ix = x0; ix < x1; ++ix) dst[iy * in_shape.w + ix] += gv;
            }
        }
    }
}

}  // namespace kernels

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> weight, std::span<const double> bias,
                    const Tensor& x, Tensor& y) {
    check_conv(g, weight, x);
    const int oh = g.out_size(x.h()), ow = g.out_size(x.w());
    y = Tensor(x.n(), g.out_channels, oh, ow);
    const int k = g.kernel;
    for (int i = 0; i < x.n(); ++i)
        for (int co = 0; co < g.out_channels; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double s = bias.empty() ? 0.0 : bias[co];
                    for (int ci = 0; ci < g.in_channels; ++ci)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * g.stride - g.pad + ky;
                                const int ix = ox * g.stride - g.pad + kx;
                                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                                s += weight[((static_cast<std::size_t>(co) * g.in_channels + ci) * k + ky) * k + kx] *
                                     x.at(i, ci, iy, ix);
                            }
                    y.at(i, co, oy, ox) = s;
                }
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> weight, const Tensor& x, const Tensor& dy,
                     Tensor* dx, std::span<double> dweight, std::span<double> dbias) {
    check_conv(g, weight, x);
    const int oh = g.out_size(x.h()), ow = g.out_size(x.w());
    const int k = g.kernel;
    if (dx) *dx = Tensor(x.shape());
    for (int i = 0; i < x.n(); ++i)
        for (int co = 0; co < g.out_channels; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const double gv = dy.at(i, co, oy, ox);
                    if (!dbias.empty()) dbias[co] += gv;
                    for (int ci = 0; ci < g.in_channels; ++ci)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * g.stride - g.pad + ky;
                                const int ix = ox * g.stride - g.pad + kx;
                                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                                const std::size_t wi =
                                    ((static_cast<std::size_t>(co) * g.in_channels + ci) * k + ky) * k + kx;
                                if (!dweight.empty()) dweight[wi] += gv * x.at(i, ci, iy, ix);
                                if (dx) dx->at(i, ci, iy, ix) += gv * weight[wi];
                            }
                }
}

void linear_forward(int in, int out, std::span<const double> weight, std::span<const double> bias, const Tensor& x,
                    Tensor& y) {
    y = Tensor(x.n(), out, 1, 1);
    for (int i = 0; i < x.n(); ++i)
        for (int o = 0; o < out; ++o) {
            double s = bias.empty() ? 0.0 : bias[o];
            for (int j = 0; j < in; ++j) s += weight[static_cast<std::size_t>(o) * in + j] * x.sample(i)[j];
            y.at(i, o, 0, 0) = s;
        }
}

void linear_backward(int in, int out, std::span<const double> weight, const Tensor& x, const Tensor& dy, Tensor* dx,
                     std::span<double> dweight, std::span<double> dbias) {
    if (dx) *dx = Tensor(x.shape());
    for (int i = 0; i < x.n(); ++i)
        for (int o = 0; o < out; ++o) {
            const double gv = dy.at(i, o, 0, 0);
            if (!dbias.empty()) dbias[o] += gv;
            for (int j = 0; j < in; ++j) {
                if (!dweight.empty()) dweight[static_cast<std::size_t>(o) * in + j] += gv * x.sample(i)[j];
                if (dx) dx->sample(i)[j] += gv * weight[static_cast<std::size_t>(o) * in + j];
            }
        }
}

}  // namespace reference

}  // namespace stego::nn
