#pragma once

#include <cstdint>

namespace shadowad::nets {

// Square-kernel 2D convolution geometry (NCHW, zero padding).
struct ConvSpec {
    int n = 1, cin = 1, h = 1, w = 1;
    int cout = 1, k = 3, stride = 1, pad = 1;

    int oh() const { return (h + 2 * pad - k) / stride + 1; }
    int ow() const { return (w + 2 * pad - k) / stride + 1; }
    void validate() const;
};

/*
 * Kernel contract shared by the OpenMP implementations below and the serial
 * reference implementations in shadowad::nets::ref:
 *
 *  - outputs are written, never accumulated into;
 *  - every sum is carried in double and finalized to float once;
 *  - per output element, contributions are consumed in a fixed order that
 *    both implementations share, so they agree to the last few ulps and
 *    results are independent of the thread count (parallelism is only ever
 *    over disjoint output slots).
 */

// y[n,cout,oh,ow] = conv(x[n,cin,h,w], w[cout,cin,k,k]) + b[cout]
void conv2d_forward(const float* x, const float* w, const float* b, float* y, const ConvSpec& s);

// dx[n,cin,h,w] from dy[n,cout,oh,ow]
void conv2d_backward_data(const float* dy, const float* w, float* dx, const ConvSpec& s);

// dw[cout,cin,k,k], db[cout] from x and dy
void conv2d_backward_weights(const float* x, const float* dy, float* dw, float* db,
                             const ConvSpec& s);

// BatchNorm over (n, h*w) per channel. Train mode normalizes with batch
// statistics (population variance), updates running stats in place with
// `momentum`, and saves mean/inv_std for the backward pass.
void batchnorm_forward_train(const float* x, const float* gamma, const float* beta, float* y,
                             float* running_mean, float* running_var, double* save_mean,
                             double* save_inv_std, int n, int c, int hw, double momentum,
                             double eps);

void batchnorm_forward_infer(const float* x, const float* gamma, const float* beta,
                             const float* running_mean, const float* running_var, float* y, int n,
                             int c, int hw, double eps);

void batchnorm_backward(const float* x, const float* dy, const float* gamma,
                        const double* save_mean, const double* save_inv_std, float* dx,
                        float* dgamma, float* dbeta, int n, int c, int hw);

// LeakyReLU; the derivative at exactly 0 takes the negative slope.
void leaky_relu_forward(const float* x, float* y, std::int64_t count, float slope);
void leaky_relu_backward(const float* x, const float* dy, float* dx, std::int64_t count,
                         float slope);

// Logistic sigmoid; backward consumes the forward *output*.
void sigmoid_forward(const float* x, float* y, std::int64_t count);
void sigmoid_backward(const float* y, const float* dy, float* dx, std::int64_t count);

// 2x nearest-neighbour upsampling; backward sums each 2x2 block.
void upsample2_forward(const float* x, float* y, int n, int c, int h, int w);
void upsample2_backward(const float* dy, float* dx, int n, int c, int h, int w);

// Channel concatenation y = [a; b] and its adjoint.
void concat_forward(const float* a, int ca, const float* b, int cb, float* y, int n, int hw);
void concat_backward(const float* dy, float* da, int ca, float* db, int cb, int n, int hw);

// Serial reference implementations: textbook loops, no OpenMP, kept for
// correctness testing and as the baseline of the kernel benchmark.
namespace ref {
void conv2d_forward(const float* x, const float* w, const float* b, float* y, const ConvSpec& s);
void conv2d_backward_data(const float* dy, const float* w, float* dx, const ConvSpec& s);
void conv2d_backward_weights(const float* x, const float* dy, float* dw, float* db,
                             const ConvSpec& s);
void batchnorm_forward_train(const float* x, const float* gamma, const float* beta, float* y,
                             float* running_mean, float* running_var, double* save_mean,
                             double* save_inv_std, int n, int c, int hw, double momentum,
                             double eps);
void batchnorm_backward(const float* x, const float* dy, const float* gamma,
                        const double* save_mean, const double* save_inv_std, float* dx,
                        float* dgamma, float* dbeta, int n, int c, int hw);
}  // namespace ref

}  // namespace shadowad::nets
