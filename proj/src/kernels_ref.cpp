#include <cmath>

#include "shadowad/common.hpp"
#include "shadowad/kernels.hpp"

// Textbook single-threaded kernels. Each output element consumes its
// contributions in the same order as the OpenMP implementations (conv:
// (cin, kh, kw); batchnorm: (n, hw)), with double accumulators, so the two
// families agree except possibly in the very last ulps.

namespace shadowad::nets::ref {

void conv2d_forward(const float* x, const float* w, const float* b, float* y, const ConvSpec& s) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
    for (int in = 0; in < s.n; ++in)
        for (int oc = 0; oc < s.cout; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = b[oc];
                    for (int ic = 0; ic < s.cin; ++ic)
                        for (int kh = 0; kh < s.k; ++kh)
                            for (int kw = 0; kw < s.k; ++kw) {
                                const int iy = oy * s.stride - s.pad + kh;
                                const int ix = ox * s.stride - s.pad + kw;
                                if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
                                const double wv = w[((static_cast<std::int64_t>(oc) * s.cin + ic) *
                                                         s.k + kh) * s.k + kw];
                                acc += wv * static_cast<double>(
                                                x[((static_cast<std::int64_t>(in) * s.cin + ic) *
                                                       s.h + iy) * s.w + ix]);
                            }
                    y[((static_cast<std::int64_t>(in) * s.cout + oc) * oh + oy) * ow + ox] =
                        static_cast<float>(acc);
                }
}

void conv2d_backward_data(const float* dy, const float* w, float* dx, const ConvSpec& s) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
    for (int in = 0; in < s.n; ++in)
        for (int ic = 0; ic < s.cin; ++ic)
            for (int iy = 0; iy < s.h; ++iy)
                for (int ix = 0; ix < s.w; ++ix) {
                    double acc = 0.0;
                    for (int oc = 0; oc < s.cout; ++oc)
                        for (int kh = 0; kh < s.k; ++kh)
                            for (int kw = 0; kw < s.k; ++kw) {
                                const int ty = iy + s.pad - kh;
                                const int tx = ix + s.pad - kw;
                                if (ty % s.stride != 0 || tx % s.stride != 0) continue;
                                const int oy = ty / s.stride, ox = tx / s.stride;
                                if (ty < 0 || tx < 0 || oy >= oh || ox >= ow) continue;
                                const double wv = w[((static_cast<std::int64_t>(oc) * s.cin + ic) *
                                                         s.k + kh) * s.k + kw];
                                acc += wv * static_cast<double>(
                                                dy[((static_cast<std::int64_t>(in) * s.cout + oc) *
                                                        oh + oy) * ow + ox]);
                            }
                    dx[((static_cast<std::int64_t>(in) * s.cin + ic) * s.h + iy) * s.w + ix] =
                        static_cast<float>(acc);
                }
}

void conv2d_backward_weights(const float* x, const float* dy, float* dw, float* db,
                             const ConvSpec& s) {
    s.validate();
    const int oh = s.oh(), ow = s.ow();
    for (int oc = 0; oc < s.cout; ++oc)
        for (int ic = 0; ic < s.cin; ++ic)
            for (int kh = 0; kh < s.k; ++kh)
                for (int kw = 0; kw < s.k; ++kw) {
                    double acc = 0.0;
                    for (int in = 0; in < s.n; ++in)
                        for (int oy = 0; oy < oh; ++oy)
                            for (int ox = 0; ox < ow; ++ox) {
                                const int iy = oy * s.stride - s.pad + kh;
                                const int ix = ox * s.stride - s.pad + kw;
                                if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
                                acc += static_cast<double>(
                                           dy[((static_cast<std::int64_t>(in) * s.cout + oc) * oh +
                                                   oy) * ow + ox]) *
                                       static_cast<double>(
                                           x[((static_cast<std::int64_t>(in) * s.cin + ic) * s.h +
                                                  iy) * s.w + ix]);
                            }
                    dw[((static_cast<std::int64_t>(oc) * s.cin + ic) * s.k + kh) * s.k + kw] =
                        static_cast<float>(acc);
                }
    for (int oc = 0; oc < s.cout; ++oc) {
        double acc = 0.0;
        for (int in = 0; in < s.n; ++in)
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i)
                acc += static_cast<double>(
                    dy[(static_cast<std::int64_t>(in) * s.cout + oc) * oh * ow + i]);
        db[oc] = static_cast<float>(acc);
    }
}

void batchnorm_forward_train(const float* x, const float* gamma, const float* beta, float* y,
                             float* running_mean, float* running_var, double* save_mean,
                             double* save_inv_std, int n, int c, int hw, double momentum,
                             double eps) {
    require(n >= 1 && c >= 1 && hw >= 1, ErrorKind::validation, "batchnorm: empty tensor");
    const std::int64_t count = static_cast<std::int64_t>(n) * hw;
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (int in = 0; in < n; ++in)
            for (int i = 0; i < hw; ++i)
                sum += static_cast<double>(x[(static_cast<std::int64_t>(in) * c + ch) * hw + i]);
        const double mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (int in = 0; in < n; ++in)
            for (int i = 0; i < hw; ++i) {
                double d =
                    static_cast<double>(x[(static_cast<std::int64_t>(in) * c + ch) * hw + i]) -
                    mean;
                sq += d * d;
            }
        const double var = sq / static_cast<double>(count);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        save_mean[ch] = mean;
        save_inv_std[ch] = inv_std;
        running_mean[ch] = static_cast<float>((1.0 - momentum) * running_mean[ch] + momentum * mean);
        running_var[ch] = static_cast<float>((1.0 - momentum) * running_var[ch] + momentum * var);
        for (int in = 0; in < n; ++in)
            for (int i = 0; i < hw; ++i) {
                const std::int64_t idx = (static_cast<std::int64_t>(in) * c + ch) * hw + i;
                y[idx] = static_cast<float>(
                    gamma[ch] * ((static_cast<double>(x[idx]) - mean) * inv_std) + beta[ch]);
            }
    }
}

void batchnorm_backward(const float* x, const float* dy, const float* gamma,
                        const double* save_mean, const double* save_inv_std, float* dx,
                        float* dgamma, float* dbeta, int n, int c, int hw) {
    const std::int64_t count = static_cast<std::int64_t>(n) * hw;
    for (int ch = 0; ch < c; ++ch) {
        const double mean = save_mean[ch], inv_std = save_inv_std[ch];
        double s1 = 0.0, s2 = 0.0;
        for (int in = 0; in < n; ++in)
            for (int i = 0; i < hw; ++i) {
                const std::int64_t idx = (static_cast<std::int64_t>(in) * c + ch) * hw + i;
                const double d = dy[idx];
                s1 += d;
                s2 += d * ((static_cast<double>(x[idx]) - mean) * inv_std);
            }
        dbeta[ch] = static_cast<float>(s1);
        dgamma[ch] = static_cast<float>(s2);
        const double g = gamma[ch];
        const double m1 = s1 / static_cast<double>(count);
        const double m2 = s2 / static_cast<double>(count);
        for (int in = 0; in < n; ++in)
            for (int i = 0; i < hw; ++i) {
                const std::int64_t idx = (static_cast<std::int64_t>(in) * c + ch) * hw + i;
                const double xhat = (static_cast<double>(x[idx]) - mean) * inv_std;
                dx[idx] = static_cast<float>(
                    g * inv_std * (static_cast<double>(dy[idx]) - m1 - xhat * m2));
            }
    }
}

}  // namespace shadowad::nets::ref
