#include "shadowad/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "shadowad/common.hpp"

namespace shadowad::nets {

namespace {

// Integer division helpers that round the mathematical quotient (b > 0).
int ceil_div(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }
int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Output-column range for which ix = ox*stride - pad + kw stays in [0, w).
void col_range(int kw, const ConvSpec& s, int* lo, int* hi) {
    *lo = std::max(0, ceil_div(s.pad - kw, s.stride));
    *hi = std::min(s.ow(), floor_div(s.w - 1 - kw + s.pad, s.stride) + 1);
}

}  // namespace

void ConvSpec::validate() const {
    require(n >= 1 && cin >= 1 && h >= 1 && w >= 1 && cout >= 1, ErrorKind::validation,
            "ConvSpec: dimensions must be positive");
    require(k >= 1 && stride >= 1 && pad >= 0, ErrorKind::validation,
            "ConvSpec: bad kernel geometry");
    require(oh() >= 1 && ow() >= 1, ErrorKind::validation, "ConvSpec: empty output");
}

namespace {

// Fast path for the 3x3/pad-1 convolutions both networks are built from.
// For each accumulator row all nine taps are applied in one sweep, so the
// double accumulator makes one load/store round trip per nine FMAs instead
// of nine. Contributions still land per element in (cin, kh, kw) order —
// the same order as the generic path and the serial reference.
void conv_forward_3x3(const float* x, const float* w, const float* b, float* y,
                      const ConvSpec& s) {
    const int oh = s.oh(), ow = s.ow();
    const std::int64_t out_plane = static_cast<std::int64_t>(oh) * ow;
    std::vector<double> acc(static_cast<std::size_t>(s.n) * s.cout * out_plane);
    int lo[3], hi[3];
    for (int kw = 0; kw < 3; ++kw) col_range(kw, s, &lo[kw], &hi[kw]);
    const int int_lo = std::max({lo[0], lo[1], lo[2]});
    const int int_hi = std::min({hi[0], hi[1], hi[2]});
#pragma omp parallel for collapse(2)
    for (int in = 0; in < s.n; ++in) {
        for (int oc = 0; oc < s.cout; ++oc) {
            double* a = acc.data() + (static_cast<std::int64_t>(in) * s.cout + oc) * out_plane;
            std::fill(a, a + out_plane, static_cast<double>(b[oc]));
            for (int ic = 0; ic < s.cin; ++ic) {
                const float* xc = x + (static_cast<std::int64_t>(in) * s.cin + ic) * s.h * s.w;
                const float* wt =
                    w + ((static_cast<std::int64_t>(oc) * s.cin + ic) * 3) * 3;
                for (int oy = 0; oy < oh; ++oy) {
                    double* arow = a + static_cast<std::int64_t>(oy) * ow;
                    for (int kh = 0; kh < 3; ++kh) {
                        const int iy = oy * s.stride - s.pad + kh;
                        if (iy < 0 || iy >= s.h) continue;
                        const float* xrow = xc + static_cast<std::int64_t>(iy) * s.w;
                        const double w0 = wt[kh * 3 + 0];
                        const double w1 = wt[kh * 3 + 1];
                        const double w2 = wt[kh * 3 + 2];
                        // Edge columns: guarded per-tap, still in kw order.
                        for (int ox = 0; ox < std::min(int_lo, ow); ++ox) {
                            double v = arow[ox];
                            if (ox >= lo[0] && ox < hi[0])
                                v += w0 * static_cast<double>(xrow[ox * s.stride - s.pad]);
                            if (ox >= lo[1] && ox < hi[1])
                                v += w1 * static_cast<double>(xrow[ox * s.stride - s.pad + 1]);
                            if (ox >= lo[2] && ox < hi[2])
                                v += w2 * static_cast<double>(xrow[ox * s.stride - s.pad + 2]);
                            arow[ox] = v;
                        }
                        for (int ox = int_lo; ox < int_hi; ++ox) {
                            const int ix = ox * s.stride - s.pad;
                            double v = arow[ox];
                            v += w0 * static_cast<double>(xrow[ix]);
                            v += w1 * static_cast<double>(xrow[ix + 1]);
                            v += w2 * static_cast<double>(xrow[ix + 2]);
                            arow[ox] = v;
                        }
                        for (int ox = std::max(int_hi, int_lo); ox < ow; ++ox) {
                            double v = arow[ox];
                            if (ox >= lo[0] && ox < hi[0])
                                v += w0 * static_cast<double>(xrow[ox * s.stride - s.pad]);
                            if (ox >= lo[1] && ox < hi[1])
                                v += w1 * static_cast<double>(xrow[ox * s.stride - s.pad + 1]);
                            if (ox >= lo[2] && ox < hi[2])
                                v += w2 * static_cast<double>(xrow[ox * s.stride - s.pad + 2]);
                            arow[ox] = v;
                        }
                    }
                }
            }
        }
    }
    const std::int64_t total = static_cast<std::int64_t>(s.n) * s.cout * out_plane;
#pragma omp parallel for
    for (std::int64_t i = 0; i < total; ++i) y[i] = static_cast<float>(acc[i]);
}

}  // namespace

void conv2d_forward(const float* x, const float* w, const float* b, float* y, const ConvSpec& s) {
    s.validate();
    if (s.k == 3 && s.pad <= 2) {
        conv_forward_3x3(x, w, b, y, s);
        return;
    }
    const int oh = s.oh(), ow = s.ow();
    const std::int64_t out_plane = static_cast<std::int64_t>(oh) * ow;
    std::vector<double> acc(static_cast<std::size_t>(s.n) * s.cout * out_plane);
#pragma omp parallel for collapse(2)
    for (int in = 0; in < s.n; ++in) {
        for (int oc = 0; oc < s.cout; ++oc) {
            double* a = acc.data() + (static_cast<std::int64_t>(in) * s.cout + oc) * out_plane;
            std::fill(a, a + out_plane, static_cast<double>(b[oc]));
            for (int ic = 0; ic < s.cin; ++ic) {
                const float* xc = x + (static_cast<std::int64_t>(in) * s.cin + ic) * s.h * s.w;
                for (int kh = 0; kh < s.k; ++kh) {
                    for (int kw = 0; kw < s.k; ++kw) {
                        const double wv =
                            w[((static_cast<std::int64_t>(oc) * s.cin + ic) * s.k + kh) * s.k + kw];
                        int xlo, xhi;
                        col_range(kw, s, &xlo, &xhi);
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * s.stride - s.pad + kh;
                            if (iy < 0 || iy >= s.h) continue;
                            const float* xrow = xc + static_cast<std::int64_t>(iy) * s.w;
                            double* arow = a + static_cast<std::int64_t>(oy) * ow;
                            for (int ox = xlo; ox < xhi; ++ox)
                                arow[ox] += wv * static_cast<double>(
                                                     xrow[ox * s.stride - s.pad + kw]);
                        }
                    }
                }
            }
        }
    }
    const std::int64_t total = static_cast<std::int64_t>(s.n) * s.cout * out_plane;
#pragma omp parallel for
    for (std::int64_t i = 0; i < total; ++i) y[i] = static_cast<float>(acc[i]);
}

void conv2d_backward_data(const float* dy, const float* w, float* dx, const ConvSpec& s) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
    const std::int64_t in_plane = static_cast<std::int64_t>(s.h) * s.w;
    std::vector<double> acc(static_cast<std::size_t>(s.n) * s.cin * in_plane, 0.0);
#pragma omp parallel for collapse(2)
    for (int in = 0; in < s.n; ++in) {
        for (int ic = 0; ic < s.cin; ++ic) {
            double* a = acc.data() + (static_cast<std::int64_t>(in) * s.cin + ic) * in_plane;
            for (int oc = 0; oc < s.cout; ++oc) {
                const float* dyc = dy + (static_cast<std::int64_t>(in) * s.cout + oc) * oh * ow;
                for (int kh = 0; kh < s.k; ++kh) {
                    for (int kw = 0; kw < s.k; ++kw) {
                        const double wv =
                            w[((static_cast<std::int64_t>(oc) * s.cin + ic) * s.k + kh) * s.k + kw];
                        int xlo, xhi;
                        col_range(kw, s, &xlo, &xhi);
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * s.stride - s.pad + kh;
                            if (iy < 0 || iy >= s.h) continue;
                            const float* dyrow = dyc + static_cast<std::int64_t>(oy) * ow;
                            double* arow = a + static_cast<std::int64_t>(iy) * s.w;
                            for (int ox = xlo; ox < xhi; ++ox)
                                arow[ox * s.stride - s.pad + kw] +=
                                    wv * static_cast<double>(dyrow[ox]);
                        }
                    }
                }
            }
        }
    }
    const std::int64_t total = static_cast<std::int64_t>(s.n) * s.cin * in_plane;
#pragma omp parallel for
    for (std::int64_t i = 0; i < total; ++i) dx[i] = static_cast<float>(acc[i]);
}

void conv2d_backward_weights(const float* x, const float* dy, float* dw, float* db,
                             const ConvSpec& s) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
#pragma omp parallel for collapse(2)
    for (int oc = 0; oc < s.cout; ++oc) {
        for (int ic = 0; ic < s.cin; ++ic) {
            for (int kh = 0; kh < s.k; ++kh) {
                for (int kw = 0; kw < s.k; ++kw) {
                    int xlo, xhi;
                    col_range(kw, s, &xlo, &xhi);
                    double acc = 0.0;
                    for (int in = 0; in < s.n; ++in) {
                        const float* xc =
                            x + (static_cast<std::int64_t>(in) * s.cin + ic) * s.h * s.w;
                        const float* dyc =
                            dy + (static_cast<std::int64_t>(in) * s.cout + oc) * oh * ow;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * s.stride - s.pad + kh;
                            if (iy < 0 || iy >= s.h) continue;
                            const float* xrow = xc + static_cast<std::int64_t>(iy) * s.w;
                            const float* dyrow = dyc + static_cast<std::int64_t>(oy) * ow;
                            for (int ox = xlo; ox < xhi; ++ox)
                                acc += static_cast<double>(dyrow[ox]) *
                                       static_cast<double>(xrow[ox * s.stride - s.pad + kw]);
                        }
                    }
                    dw[((static_cast<std::int64_t>(oc) * s.cin + ic) * s.k + kh) * s.k + kw] =
                        static_cast<float>(acc);
                }
            }
        }
    }
#pragma omp parallel for
    for (int oc = 0; oc < s.cout; ++oc) {
        double acc = 0.0;
        for (int in = 0; in < s.n; ++in) {
            const float* dyc = dy + (static_cast<std::int64_t>(in) * s.cout + oc) * oh * ow;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i)
                acc += static_cast<double>(dyc[i]);
        }
        db[oc] = static_cast<float>(acc);
    }
}

void batchnorm_forward_train(const float* x, const float* gamma, const float* beta, float* y,
                             float* running_mean, float* running_var, double* save_mean,
                             double* save_inv_std, int n, int c, int hw, double momentum,
                             double eps) {
    require(n >= 1 && c >= 1 && hw >= 1, ErrorKind::validation, "batchnorm: empty tensor");
    const std::int64_t count = static_cast<std::int64_t>(n) * hw;
#pragma omp parallel for
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (int in = 0; in < n; ++in) {
            const float* p = x + (static_cast<std::int64_t>(in) * c + ch) * hw;
            for (int i = 0; i < hw; ++i) sum += static_cast<double>(p[i]);
        }
        const double mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (int in = 0; in < n; ++in) {
            const float* p = x + (static_cast<std::int64_t>(in) * c + ch) * hw;
            for (int i = 0; i < hw; ++i) {
                double d = static_cast<double>(p[i]) - mean;
                sq += d * d;
            }
        }
        const double var = sq / static_cast<double>(count);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        save_mean[ch] = mean;
        save_inv_std[ch] = inv_std;
        running_mean[ch] = static_cast<float>((1.0 - momentum) * running_mean[ch] + momentum * mean);
        running_var[ch] = static_cast<float>((1.0 - momentum) * running_var[ch] + momentum * var);
        const double g = gamma[ch], bt = beta[ch];
        for (int in = 0; in < n; ++in) {
            const float* p = x + (static_cast<std::int64_t>(in) * c + ch) * hw;
            float* q = y + (static_cast<std::int64_t>(in) * c + ch) * hw;
            for (int i = 0; i < hw; ++i)
                q[i] = static_cast<float>(g * ((static_cast<double>(p[i]) - mean) * inv_std) + bt);
        }
    }
}

void batchnorm_forward_infer(const float* x, const float* gamma, const float* beta,
                             const float* running_mean, const float* running_var, float* y, int n,
                             int c, int hw, double eps) {
    require(n >= 1 && c >= 1 && hw >= 1, ErrorKind::validation, "batchnorm: empty tensor");
#pragma omp parallel for collapse(2)
    for (int in = 0; in < n; ++in) {
        for (int ch = 0; ch < c; ++ch) {
            const double mean = running_mean[ch];
            const double inv_std = 1.0 / std::sqrt(static_cast<double>(running_var[ch]) + eps);
            const double g = gamma[ch], bt = beta[ch];
            const float* p = x + (static_cast<std::int64_t>(in) * c + ch) * hw;
            float* q = y + (static_cast<std::int64_t>(in) * c + ch) * hw;
            for (int i = 0; i < hw; ++i)
                q[i] = static_cast<float>(g * ((static_cast<double>(p[i]) - mean) * inv_std) + bt);
        }
    }
}

void batchnorm_backward(const float* x, const float* dy, const float* gamma,
                        const double* save_mean, const double* save_inv_std, float* dx,
                        float* dgamma, float* dbeta, int n, int c, int hw) {
    const std::int64_t count = static_cast<std::int64_t>(n) * hw;
#pragma omp parallel for
    for (int ch = 0; ch < c; ++ch) {
        const double mean = save_mean[ch], inv_std = save_inv_std[ch];
        double s1 = 0.0, s2 = 0.0;  // sum(dy), sum(dy * xhat)
        for (int in = 0; in < n; ++in) {
            const float* px = x + (static_cast<std::int64_t>(in) * c + ch) * hw;
            const float* pd = dy + (static_cast<std::int64_t>(in) * c + ch) * hw;
            for (int i = 0; i < hw; ++i) {
                const double d = pd[i];
                s1 += d;
                s2 += d * ((static_cast<double>(px[i]) - mean) * inv_std);
            }
        }
        dbeta[ch] = static_cast<float>(s1);
        dgamma[ch] = static_cast<float>(s2);
        const double g = gamma[ch];
        const double m1 = s1 / static_cast<double>(count);
        const double m2 = s2 / static_cast<double>(count);
        for (int in = 0; in < n; ++in) {
            const float* px = x + (static_cast<std::int64_t>(in) * c + ch) * hw;
            const float* pd = dy + (static_cast<std::int64_t>(in) * c + ch) * hw;
            float* pq = dx + (static_cast<std::int64_t>(in) * c + ch) * hw;
            for (int i = 0; i < hw; ++i) {
                const double xhat = (static_cast<double>(px[i]) - mean) * inv_std;
                pq[i] = static_cast<float>(g * inv_std * (static_cast<double>(pd[i]) - m1 - xhat * m2));
            }
        }
    }
}

void leaky_relu_forward(const float* x, float* y, std::int64_t count, float slope) {
#pragma omp parallel for
    for (std::int64_t i = 0; i < count; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward(const float* x, const float* dy, float* dx, std::int64_t count,
                         float slope) {
#pragma omp parallel for
    for (std::int64_t i = 0; i < count; ++i) dx[i] = x[i] > 0.0f ? dy[i] : slope * dy[i];
}

void sigmoid_forward(const float* x, float* y, std::int64_t count) {
#pragma omp parallel for
    for (std::int64_t i = 0; i < count; ++i)
        y[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
}

void sigmoid_backward(const float* y, const float* dy, float* dx, std::int64_t count) {
#pragma omp parallel for
    for (std::int64_t i = 0; i < count; ++i) {
        const double o = y[i];
        dx[i] = static_cast<float>(static_cast<double>(dy[i]) * o * (1.0 - o));
    }
}

void upsample2_forward(const float* x, float* y, int n, int c, int h, int w) {
    const std::int64_t planes = static_cast<std::int64_t>(n) * c;
#pragma omp parallel for
    for (std::int64_t p = 0; p < planes; ++p) {
        const float* src = x + p * h * w;
        float* dst = y + p * 4 * h * w;
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                const float v = src[static_cast<std::int64_t>(iy) * w + ix];
                float* row0 = dst + (static_cast<std::int64_t>(2 * iy) * 2 * w) + 2 * ix;
                float* row1 = row0 + static_cast<std::int64_t>(2) * w;
                row0[0] = v;
                row0[1] = v;
                row1[0] = v;
                row1[1] = v;
            }
    }
}

void upsample2_backward(const float* dy, float* dx, int n, int c, int h, int w) {
    const std::int64_t planes = static_cast<std::int64_t>(n) * c;
#pragma omp parallel for
    for (std::int64_t p = 0; p < planes; ++p) {
        const float* src = dy + p * 4 * h * w;
        float* dst = dx + p * h * w;
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                const float* row0 = src + (static_cast<std::int64_t>(2 * iy) * 2 * w) + 2 * ix;
                const float* row1 = row0 + static_cast<std::int64_t>(2) * w;
                // Fixed summation order: (0,0) + (0,1) + (1,0) + (1,1).
                double acc = static_cast<double>(row0[0]) + row0[1] + row1[0] + row1[1];
                dst[static_cast<std::int64_t>(iy) * w + ix] = static_cast<float>(acc);
            }
    }
}

void concat_forward(const float* a, int ca, const float* b, int cb, float* y, int n, int hw) {
#pragma omp parallel for
    for (int in = 0; in < n; ++in) {
        float* dst = y + static_cast<std::int64_t>(in) * (ca + cb) * hw;
        std::copy_n(a + static_cast<std::int64_t>(in) * ca * hw, static_cast<std::int64_t>(ca) * hw,
                    dst);
        std::copy_n(b + static_cast<std::int64_t>(in) * cb * hw, static_cast<std::int64_t>(cb) * hw,
                    dst + static_cast<std::int64_t>(ca) * hw);
    }
}

void concat_backward(const float* dy, float* da, int ca, float* db, int cb, int n, int hw) {
#pragma omp parallel for
    for (int in = 0; in < n; ++in) {
        const float* src = dy + static_cast<std::int64_t>(in) * (ca + cb) * hw;
        std::copy_n(src, static_cast<std::int64_t>(ca) * hw,
                    da + static_cast<std::int64_t>(in) * ca * hw);
        std::copy_n(src + static_cast<std::int64_t>(ca) * hw, static_cast<std::int64_t>(cb) * hw,
                    db + static_cast<std::int64_t>(in) * cb * hw);
    }
}

}  // namespace shadowad::nets
