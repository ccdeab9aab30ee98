#include "stego/transforms/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "stego/core/errors.hpp"

namespace stego::transforms {

const char* to_string(Kind k) {
    switch (k) {
        case Kind::None: return "none";
        case Kind::GaussianBlur: return "gaussian_blur";
        case Kind::GaussianNoise: return "gaussian_noise";
        case Kind::Rgb2Bgr: return "rgb2bgr";
        case Kind::Jpeg: return "jpeg";
    }
    return "?";
}

Kind kind_from_string(const std::string& name) {
    for (Kind k : kAllKinds) {
        if (name == to_string(k)) return k;
    }
    fail(ErrorKind::InvalidArgument, "unknown transform kind: " + name);
}

void TransformSpec::validate() const {
    if (kind == Kind::GaussianBlur) {
        if (blur_kernel < 3 || blur_kernel % 2 == 0) fail(ErrorKind::InvalidArgument, "blur kernel must be odd and >= 3");
        if (!(blur_sigma > 0.0)) fail(ErrorKind::InvalidArgument, "blur sigma must be > 0");
    }
    if (kind == Kind::GaussianNoise && !(noise_sigma >= 0.0 && std::isfinite(noise_mean))) {
        fail(ErrorKind::InvalidArgument, "noise sigma must be >= 0");
    }
    if (kind == Kind::Jpeg && (jpeg_quality < 1 || jpeg_quality > 100)) {
        fail(ErrorKind::InvalidArgument, "jpeg quality must be in [1, 100]");
    }
}

std::string TransformSpec::describe() const {
    std::ostringstream os;
    os << to_string(kind);
    switch (kind) {
        case Kind::GaussianBlur: os << "(kernel=" << blur_kernel << ", sigma=" << blur_sigma << ")"; break;
        case Kind::GaussianNoise: os << "(mean=" << noise_mean << ", sigma=" << noise_sigma << ")"; break;
        case Kind::Jpeg: os << "(quality=" << jpeg_quality << ")"; break;
        default: break;
    }
    return os.str();
}

TransformSpec TransformSpec::of(Kind kind, const RunConfig& config, std::uint64_t seed) {
    TransformSpec s;
    s.kind = kind;
    s.blur_kernel = config.blur_kernel;
    s.blur_sigma = config.blur_sigma;
    s.noise_mean = config.noise_mean;
    s.noise_sigma = config.noise_sigma;
    s.jpeg_quality = config.jpeg_quality;
    s.seed = seed;
    s.validate();
    return s;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    if (size < 1 || size % 2 == 0) fail(ErrorKind::InvalidArgument, "kernel size must be odd");
    std::vector<double> k(static_cast<std::size_t>(size));
    const int r = size / 2;
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + r];
    }
    for (double& v : k) v /= sum;
    return k;
}

namespace {

// Symmetric (edge-repeating) reflection. With a symmetric kernel every input
// pixel's total outgoing weight is 1, so the blur preserves the image mean.
int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

void blur_forward(const std::vector<double>& k, const nn::Tensor& x, nn::Tensor& y) {
    const int r = static_cast<int>(k.size()) / 2;
    const int h = x.h(), w = x.w(), planes = x.n() * x.c();
    y = nn::Tensor(x.shape());
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = x.data() + static_cast<std::size_t>(p) * h * w;
        double* dst = y.data() + static_cast<std::size_t>(p) * h * w;
        std::vector<double> tmp(static_cast<std::size_t>(h) * w, 0.0);
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                double s = 0.0;
                for (int t = -r; t <= r; ++t) s += k[t + r] * src[yy * w + reflect(xx + t, w)];
                tmp[yy * w + xx] = s;
            }
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                double s = 0.0;
                for (int t = -r; t <= r; ++t) s += k[t + r] * tmp[reflect(yy + t, h) * w + xx];
                dst[yy * w + xx] = s;
            }
    }
}

void blur_backward(const std::vector<double>& k, const nn::Tensor& dy, nn::Tensor& dx) {
    const int r = static_cast<int>(k.size()) / 2;
    const int h = dy.h(), w = dy.w(), planes = dy.n() * dy.c();
    dx = nn::Tensor(dy.shape());
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = dy.data() + static_cast<std::size_t>(p) * h * w;
        double* dst = dx.data() + static_cast<std::size_t>(p) * h * w;
        std::vector<double> tmp(static_cast<std::size_t>(h) * w, 0.0);
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx)
                for (int t = -r; t <= r; ++t) tmp[reflect(yy + t, h) * w + xx] += k[t + r] * src[yy * w + xx];
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx)
                for (int t = -r; t <= r; ++t) dst[yy * w + reflect(xx + t, w)] += k[t + r] * tmp[yy * w + xx];
    }
}

void swap_rb(const nn::Tensor& x, nn::Tensor& y) {
    y = x;
    const std::size_t plane = x.shape().plane();
    for (int i = 0; i < x.n(); ++i) {
        double* s = y.sample(i).data();
        std::swap_ranges(s, s + plane, s + 2 * plane);
    }
}

// --- JPEG surrogate -------------------------------------------------------

constexpr int kBaseLuma[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                               14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                               18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                               49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
constexpr int kBaseChroma[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

// RGB (0..255) -> level-shifted YCbCr, and the decoder's inverse.
constexpr double kToYcc[3][3] = {{0.299, 0.587, 0.114}, {-0.168736, -0.331264, 0.5}, {0.5, -0.418688, -0.081312}};
constexpr double kToRgb[3][3] = {{1.0, 0.0, 1.402}, {1.0, -0.344136, -0.714136}, {1.0, 1.772, 0.0}};
constexpr double kYOffset = 128.0;

struct Dct8 {
    double m[8][8];
    Dct8() {
        for (int u = 0; u < 8; ++u)
            for (int x = 0; x < 8; ++x)
                m[u][x] = (u == 0 ? std::sqrt(1.0 / 8.0) : 0.5) * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
};
const Dct8& dct() {
    static const Dct8 d;
    return d;
}

// out = D * in * D^T (forward) or D^T * in * D (inverse), 8x8 row-major.
void dct2(const double* in, double* out, bool inverse) {
    const auto& d = dct().m;
    double tmp[64];
    for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int k = 0; k < 8; ++k) s += (inverse ? d[k][u] : d[u][k]) * in[k * 8 + x];
            tmp[u * 8 + x] = s;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int k = 0; k < 8; ++k) s += tmp[u * 8 + k] * (inverse ? d[k][v] : d[v][k]);
            out[u * 8 + v] = s;
        }
}

double soft_round(double x) { return x - std::sin(2.0 * std::numbers::pi * x) / (2.0 * std::numbers::pi); }
double soft_round_grad(double x) { return 1.0 - std::cos(2.0 * std::numbers::pi * x); }

// Quantize-dequantize every 8x8 block of a ph x pw plane in place; records the
// scaled coefficients (before rounding) in `co`, laid out like the plane.
void block_codec(double* chan, int ph, int pw, const std::array<double, 64>& q, double* co) {
    for (int by = 0; by < ph; by += 8)
        for (int bx = 0; bx < pw; bx += 8) {
            double blk[64], f[64];
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) blk[u * 8 + v] = chan[(by + u) * pw + bx + v];
            dct2(blk, f, false);
            for (int k = 0; k < 64; ++k) {
                const double s = f[k] / q[k];
                co[(by + k / 8) * pw + bx + k % 8] = s;
                f[k] = soft_round(s) * q[k];
            }
            dct2(f, blk, true);
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) chan[(by + u) * pw + bx + v] = blk[u * 8 + v];
        }
}

// The quantizer step cancels: d/ds of q * soft_round(s) with s = f / q is soft_round'(s).
void block_codec_backward(double* chan, int ph, int pw, const double* co) {
    for (int by = 0; by < ph; by += 8)
        for (int bx = 0; bx < pw; bx += 8) {
            double blk[64], f[64];
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) blk[u * 8 + v] = chan[(by + u) * pw + bx + v];
            // Adjoint of the inverse DCT is the forward DCT and vice versa.
            dct2(blk, f, false);
            for (int k = 0; k < 64; ++k) f[k] *= soft_round_grad(co[(by + k / 8) * pw + bx + k % 8]);
            dct2(f, blk, true);
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) chan[(by + u) * pw + bx + v] = blk[u * 8 + v];
        }
}

// 4:2:0 chroma: 2x2 box average down, triangle-filter ("fancy") upsampling back,
// both linear, with their adjoints.
std::vector<double> chroma_down(const double* src, int h, int w) {
    const int ph = h / 2, pw = w / 2;
    std::vector<double> out(static_cast<std::size_t>(ph) * pw);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x) {
            out[y * pw + x] = 0.25 * (src[2 * y * w + 2 * x] + src[2 * y * w + 2 * x + 1] + src[(2 * y + 1) * w + 2 * x] +
                                      src[(2 * y + 1) * w + 2 * x + 1]);
        }
    return out;
}

void chroma_down_adjoint(const std::vector<double>& g, int h, int w, double* dst) {
    const int pw = w / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) dst[y * w + x] = 0.25 * g[(y / 2) * pw + x / 2];
}

// Tap j of the triangle filter for output index o of an n -> 2n upsampling.
inline void fancy_taps(int o, int n, int& near, int& far) {
    near = o / 2;
    far = (o % 2 == 0) ? std::max(near - 1, 0) : std::min(near + 1, n - 1);
}

void chroma_up(const std::vector<double>& src, int h, int w, double* dst) {
    const int ph = h / 2, pw = w / 2;
    for (int y = 0; y < h; ++y) {
        int ny, fy;
        fancy_taps(y, ph, ny, fy);
        for (int x = 0; x < w; ++x) {
            int nx, fx;
            fancy_taps(x, pw, nx, fx);
            dst[y * w + x] = 0.5625 * src[ny * pw + nx] + 0.1875 * src[ny * pw + fx] + 0.1875 * src[fy * pw + nx] +
                             0.0625 * src[fy * pw + fx];
        }
    }
}

std::vector<double> chroma_up_adjoint(const double* g, int h, int w) {
    const int ph = h / 2, pw = w / 2;
    std::vector<double> out(static_cast<std::size_t>(ph) * pw, 0.0);
    for (int y = 0; y < h; ++y) {
        int ny, fy;
        fancy_taps(y, ph, ny, fy);
        for (int x = 0; x < w; ++x) {
            int nx, fx;
            fancy_taps(x, pw, nx, fx);
            const double v = g[y * w + x];
            out[ny * pw + nx] += 0.5625 * v;
            out[ny * pw + fx] += 0.1875 * v;
            out[fy * pw + nx] += 0.1875 * v;
            out[fy * pw + fx] += 0.0625 * v;
        }
    }
    return out;
}

// Chroma is subsampled whenever the half-resolution plane still tiles into 8x8 blocks.
bool subsample_chroma(int h, int w) { return h % 16 == 0 && w % 16 == 0; }

void jpeg_forward(int quality, const nn::Tensor& x, nn::Tensor& raw, nn::Tensor& coeffs) {
    const auto ql = quant_table(quality, false);
    const auto qc = quant_table(quality, true);
    const int n = x.n(), h = x.h(), w = x.w();
    const bool sub = subsample_chroma(h, w);
    raw = nn::Tensor(x.shape());
    coeffs = nn::Tensor(x.shape());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        std::vector<double> ycc(static_cast<std::size_t>(3) * h * w);
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        for (std::size_t p = 0; p < plane; ++p) {
            double rgb[3];
            for (int c = 0; c < 3; ++c) rgb[c] = 255.0 * x.sample(i)[c * plane + p];
            for (int c = 0; c < 3; ++c) {
                ycc[c * plane + p] = kToYcc[c][0] * rgb[0] + kToYcc[c][1] * rgb[1] + kToYcc[c][2] * rgb[2];
            }
            ycc[p] -= kYOffset;
        }
        block_codec(ycc.data(), h, w, ql, coeffs.sample(i).data());
        for (int c = 1; c < 3; ++c) {
            double* chan = ycc.data() + c * plane;
            double* co = coeffs.sample(i).data() + c * plane;
            if (sub) {
                auto small = chroma_down(chan, h, w);
                block_codec(small.data(), h / 2, w / 2, qc, co);
                chroma_up(small, h, w, chan);
            } else {
                block_codec(chan, h, w, qc, co);
            }
        }
        for (std::size_t p = 0; p < plane; ++p) {
            const double yv = ycc[p] + kYOffset, cb = ycc[plane + p], cr = ycc[2 * plane + p];
            for (int c = 0; c < 3; ++c) {
                raw.sample(i)[c * plane + p] = (kToRgb[c][0] * yv + kToRgb[c][1] * cb + kToRgb[c][2] * cr) / 255.0;
            }
        }
    }
}

void jpeg_backward(const nn::Tensor& coeffs, const nn::Tensor& draw, nn::Tensor& dx) {
    const int n = draw.n(), h = draw.h(), w = draw.w();
    const bool sub = subsample_chroma(h, w);
    dx = nn::Tensor(draw.shape());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        std::vector<double> dycc(3 * plane);
        for (std::size_t p = 0; p < plane; ++p) {
            double g[3];
            for (int c = 0; c < 3; ++c) g[c] = draw.sample(i)[c * plane + p] / 255.0;
            for (int k = 0; k < 3; ++k) dycc[k * plane + p] = kToRgb[0][k] * g[0] + kToRgb[1][k] * g[1] + kToRgb[2][k] * g[2];
        }
        block_codec_backward(dycc.data(), h, w, coeffs.sample(i).data());
        for (int c = 1; c < 3; ++c) {
            double* chan = dycc.data() + c * plane;
            const double* co = coeffs.sample(i).data() + c * plane;
            if (sub) {
                auto small = chroma_up_adjoint(chan, h, w);
                block_codec_backward(small.data(), h / 2, w / 2, co);
                chroma_down_adjoint(small, h, w, chan);
            } else {
                block_codec_backward(chan, h, w, co);
            }
        }
        for (std::size_t p = 0; p < plane; ++p) {
            for (int c = 0; c < 3; ++c) {
                dx.sample(i)[c * plane + p] =
                    255.0 * (kToYcc[0][c] * dycc[p] + kToYcc[1][c] * dycc[plane + p] + kToYcc[2][c] * dycc[2 * plane + p]);
            }
        }
    }
}

nn::Tensor clamp01(const nn::Tensor& raw) {
    nn::Tensor out = raw;
    for (double& v : out.vec()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace

std::array<double, 64> quant_table(int quality, bool chroma) {
    if (quality < 1 || quality > 100) fail(ErrorKind::InvalidArgument, "jpeg quality must be in [1, 100]");
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<double, 64> q{};
    const int* base = chroma ? kBaseChroma : kBaseLuma;
    for (int k = 0; k < 64; ++k) q[k] = std::clamp((base[k] * scale + 50) / 100, 1, 255);
    return q;
}

nn::Tensor apply_batch(const TransformSpec& spec, const nn::Tensor& images, bool differentiable,
                       TransformTrace* trace) {
    spec.validate();
    if (images.c() != 3 || images.h() % 8 || images.w() % 8) {
        fail(ErrorKind::InvalidArgument, "transform input must be (n, 3, H, W) with H, W multiples of 8");
    }
    nn::Tensor raw, coeffs;
    switch (spec.kind) {
        case Kind::None: raw = images; break;
        case Kind::GaussianBlur: blur_forward(gaussian_kernel(spec.blur_kernel, spec.blur_sigma), images, raw); break;
        case Kind::GaussianNoise: {
            raw = images;
            Rng rng = make_stream(spec.seed, stream::kTransforms);
            std::normal_distribution<double> noise(spec.noise_mean, spec.noise_sigma);
            for (double& v : raw.vec()) v += noise(rng);
            break;
        }
        case Kind::Rgb2Bgr: swap_rb(images, raw); break;
        case Kind::Jpeg:
            if (differentiable) {
                jpeg_forward(spec.jpeg_quality, images, raw, coeffs);
            } else {
                raw = nn::Tensor(images.shape());
                for (int i = 0; i < images.n(); ++i) {
                    const ImageTensor out = encode_decode(image_from_tensor(images, i), "jpeg", spec.jpeg_quality);
                    const nn::Tensor t = to_tensor(out);
                    std::copy(t.vec().begin(), t.vec().end(), raw.sample(i).data());
                }
            }
            break;
    }
    nn::Tensor out = clamp01(raw);
    if (trace) {
        trace->spec = spec;
        trace->raw = std::move(raw);
        trace->coeffs = std::move(coeffs);
    }
    return out;
}

nn::Tensor backward_batch(const TransformTrace& trace, const nn::Tensor& dy) {
    nn::Tensor draw = dy;
    for (std::size_t i = 0; i < draw.size(); ++i) {
        const double v = trace.raw.data()[i];
        if (v < 0.0 || v > 1.0) draw.data()[i] = 0.0;
    }
    nn::Tensor dx;
    switch (trace.spec.kind) {
        case Kind::None:
        case Kind::GaussianNoise: dx = std::move(draw); break;
        case Kind::GaussianBlur:
            blur_backward(gaussian_kernel(trace.spec.blur_kernel, trace.spec.blur_sigma), draw, dx);
            break;
        case Kind::Rgb2Bgr: swap_rb(draw, dx); break;
        case Kind::Jpeg:
            if (trace.coeffs.empty()) fail(ErrorKind::InvalidArgument, "backward through a non-differentiable JPEG");
            jpeg_backward(trace.coeffs, draw, dx);
            break;
    }
    return dx;
}

ImageTensor apply(const TransformSpec& spec, const ImageTensor& image, bool differentiable) {
    return image_from_tensor(apply_batch(spec, to_tensor(image), differentiable));
}

TransformSpec sample_train_transform(Rng& rng, const RunConfig& config) {
    const auto idx = static_cast<std::size_t>(uniform01(rng) * kAllKinds.size());
    const std::uint64_t seed = rng();
    return TransformSpec::of(kAllKinds[std::min(idx, kAllKinds.size() - 1)], config, seed);
}

}  // namespace stego::transforms
