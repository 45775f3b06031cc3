// Head-to-head timing of the OpenMP kernels against their serial reference
// implementations, plus the single-image detector forward latency at the
// paper scale (256x256, depth 7). Numbers are machine-dependent and
// informational; the agreement column is the part that must stay near zero.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "shadowad/kernels.hpp"
#include "shadowad/parallel.hpp"
#include "shadowad/rng.hpp"
#include "shadowad/tensor.hpp"
#include "shadowad/unet.hpp"

using namespace shadowad;
using nets::ConvSpec;

namespace {

std::vector<float> random_vec(std::size_t count, SplitMix64& rng) {
    std::vector<float> v(count);
    for (float& x : v) x = 2.0f * static_cast<float>(rng.next_double()) - 1.0f;
    return v;
}

template <class F>
double best_ms(int repeats, F&& body) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        body();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

void print_row(const char* name, double ref_ms, double omp_ms, double diff) {
    std::printf("%-24s %10.3f %10.3f %9.2fx %12.3g\n", name, ref_ms, omp_ms, ref_ms / omp_ms,
                diff);
}

void bench_kernels(int repeats, bool quick) {
    ConvSpec s;
    s.n = quick ? 2 : 4;
    s.cin = 32;
    s.cout = 32;
    s.h = s.w = quick ? 32 : 64;
    s.k = 3;
    s.stride = 1;
    s.pad = 1;
    const std::size_t xn = std::size_t(s.n) * s.cin * s.h * s.w;
    const std::size_t yn = std::size_t(s.n) * s.cout * s.oh() * s.ow();
    const std::size_t wn = std::size_t(s.cout) * s.cin * s.k * s.k;

    SplitMix64 rng(1234);
    std::vector<float> x = random_vec(xn, rng);
    std::vector<float> w = random_vec(wn, rng);
    std::vector<float> b = random_vec(s.cout, rng);
    std::vector<float> dy = random_vec(yn, rng);

    std::printf("conv shape: n=%d cin=%d cout=%d %dx%d k=%d   threads=%d\n", s.n, s.cin, s.cout,
                s.h, s.w, s.k, worker_threads());
    std::printf("%-24s %10s %10s %10s %12s\n", "kernel", "ref ms", "omp ms", "speedup",
                "max |diff|");

    {
        std::vector<float> y_ref(yn), y_omp(yn);
        double r = best_ms(repeats, [&] { nets::ref::conv2d_forward(x.data(), w.data(), b.data(),
                                                                    y_ref.data(), s); });
        double o = best_ms(repeats,
                           [&] { nets::conv2d_forward(x.data(), w.data(), b.data(), y_omp.data(), s); });
        print_row("conv2d_forward", r, o, max_abs_diff(y_ref, y_omp));
    }
    {
        std::vector<float> dx_ref(xn), dx_omp(xn);
        double r = best_ms(repeats,
                           [&] { nets::ref::conv2d_backward_data(dy.data(), w.data(), dx_ref.data(), s); });
        double o = best_ms(repeats,
                           [&] { nets::conv2d_backward_data(dy.data(), w.data(), dx_omp.data(), s); });
        print_row("conv2d_backward_data", r, o, max_abs_diff(dx_ref, dx_omp));
    }
    {
        std::vector<float> dw_ref(wn), dw_omp(wn), db_ref(s.cout), db_omp(s.cout);
        double r = best_ms(repeats, [&] {
            nets::ref::conv2d_backward_weights(x.data(), dy.data(), dw_ref.data(), db_ref.data(), s);
        });
        double o = best_ms(repeats, [&] {
            nets::conv2d_backward_weights(x.data(), dy.data(), dw_omp.data(), db_omp.data(), s);
        });
        print_row("conv2d_backward_weights", r, o,
                  std::max(max_abs_diff(dw_ref, dw_omp), max_abs_diff(db_ref, db_omp)));
    }

    const int bn_n = s.n, bn_c = 64, bn_hw = s.h * s.w;
    const std::size_t bn_count = std::size_t(bn_n) * bn_c * bn_hw;
    std::vector<float> bx = random_vec(bn_count, rng);
    std::vector<float> bdy = random_vec(bn_count, rng);
    std::vector<float> gamma = random_vec(bn_c, rng);
    std::vector<float> beta = random_vec(bn_c, rng);
    {
        std::vector<float> y_ref(bn_count), y_omp(bn_count);
        std::vector<float> rm_ref(bn_c, 0.0f), rv_ref(bn_c, 1.0f), rm_omp = rm_ref, rv_omp = rv_ref;
        std::vector<double> sm_ref(bn_c), si_ref(bn_c), sm_omp(bn_c), si_omp(bn_c);
        double r = best_ms(repeats, [&] {
            nets::ref::batchnorm_forward_train(bx.data(), gamma.data(), beta.data(), y_ref.data(),
                                               rm_ref.data(), rv_ref.data(), sm_ref.data(),
                                               si_ref.data(), bn_n, bn_c, bn_hw, 0.1, 1e-5);
        });
        double o = best_ms(repeats, [&] {
            nets::batchnorm_forward_train(bx.data(), gamma.data(), beta.data(), y_omp.data(),
                                          rm_omp.data(), rv_omp.data(), sm_omp.data(),
                                          si_omp.data(), bn_n, bn_c, bn_hw, 0.1, 1e-5);
        });
        print_row("batchnorm_forward_train", r, o, max_abs_diff(y_ref, y_omp));

        std::vector<float> dx_ref(bn_count), dx_omp(bn_count);
        std::vector<float> dg_ref(bn_c), db2_ref(bn_c), dg_omp(bn_c), db2_omp(bn_c);
        double rb = best_ms(repeats, [&] {
            nets::ref::batchnorm_backward(bx.data(), bdy.data(), gamma.data(), sm_ref.data(),
                                          si_ref.data(), dx_ref.data(), dg_ref.data(),
                                          db2_ref.data(), bn_n, bn_c, bn_hw);
        });
        double ob = best_ms(repeats, [&] {
            nets::batchnorm_backward(bx.data(), bdy.data(), gamma.data(), sm_omp.data(),
                                     si_omp.data(), dx_omp.data(), dg_omp.data(), db2_omp.data(),
                                     bn_n, bn_c, bn_hw);
        });
        print_row("batchnorm_backward", rb, ob, max_abs_diff(dx_ref, dx_omp));
    }
}

void bench_detector_forward(int repeats, bool quick) {
    nets::UNetConfig config =
        quick ? nets::UNetConfig::detector_desk() : nets::UNetConfig::detector_paper();
    const int size = quick ? 64 : 256;
    nets::UNet net(config, 7);
    Tensor input = Tensor::zeros(1, config.in_channels, size, size);
    SplitMix64 rng(99);
    for (float& v : input.v) v = static_cast<float>(rng.next_double()) - 0.5f;

    net.forward(input, nets::RunMode::infer);  // warm-up, excluded
    double ms = best_ms(repeats, [&] { net.forward(input, nets::RunMode::infer); });
    std::printf("\ndetector forward: depth=%d base=%d input=%dx%d  %.1f ms (%.2f fps)\n",
                config.depth, config.base_channels, size, size, ms, 1000.0 / ms);
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();

    CLI::App app{"kernel and forward-pass benchmark"};
    int repeats = 3;
    bool quick = false;
    app.add_option("--repeats", repeats, "timing repeats per kernel (best is kept)");
    app.add_flag("--quick", quick, "smaller shapes and the desk-size detector");
    CLI11_PARSE(app, argc, argv);

    bench_kernels(repeats, quick);
    bench_detector_forward(std::max(1, quick ? repeats : 1), quick);
    return 0;
}
