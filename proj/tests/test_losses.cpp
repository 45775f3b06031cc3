#include <doctest.h>

#include <cmath>

#include "shadowad/common.hpp"
#include "shadowad/losses.hpp"
#include "shadowad/rng.hpp"

using namespace shadowad;

namespace {

Image log_image(int h, int w, float fill = -2.0f) {
    Image img = Image::zeros(h, w, Domain::log);
    for (float& v : img.data) v = fill;
    return img;
}

// The 2x2 fixture realizing every frozen component value at once: top row is
// shadow, bottom row is lit.
struct Fixture {
    Image input = log_image(2, 2);
    Image a = log_image(2, 2);
    BinaryMask mask = BinaryMask::zeros(2, 2);
    PredictionMap d = PredictionMap::zeros(2, 2);

    Fixture() {
        mask.set(0, 0, true);
        mask.set(0, 1, true);
        // Shadow log-diffs {0,1} per channel: L_ph = 3 * 0.25 = 0.75.
        for (int c = 0; c < 3; ++c) a.at(c, 0, 1) = input.at(c, 0, 1) + 1.0f;
        // One lit pixel moved by (0.3,0,0): L_nsd = 0.3 / 2 = 0.15.
        a.at(0, 1, 0) = input.at(0, 1, 0) + 0.3f;
        // Detector says {0.2, 0.6} on the shadow pixels: L_sd = 0.4.
        d.data = {0.2f, 0.6f, 0.0f, 0.9f};
    }
};

}  // namespace

TEST_CASE("loss_nsd matches its frozen example") {
    Fixture f;
    NonShadowLoss l = loss_nsd(f.a, f.input, f.mask);
    CHECK(l.value == doctest::Approx(0.15));

    // Identity is exactly zero with a zero subgradient at the ties.
    NonShadowLoss zero = loss_nsd(f.input, f.input, f.mask);
    CHECK(zero.value == 0.0);
    for (float g : zero.grad_a) CHECK(g == 0.0f);

    // Shadow pixels contribute nothing.
    for (int c = 0; c < 3; ++c) {
        CHECK(l.grad_a[static_cast<std::size_t>(c) * 4 + 0] == 0.0f);
        CHECK(l.grad_a[static_cast<std::size_t>(c) * 4 + 1] == 0.0f);
    }
    // Moved lit pixel: sign/count = +1/2.
    CHECK(l.grad_a[2] == 0.5f);

    BinaryMask full = BinaryMask::zeros(2, 2);
    for (int i = 0; i < 4; ++i) full.set(i / 2, i % 2, true);
    CHECK_THROWS_AS(loss_nsd(f.a, f.input, full), Error);

    Image linear = f.a;
    linear.domain = Domain::linear;
    CHECK_THROWS_AS(loss_nsd(linear, f.input, f.mask), Error);
}

TEST_CASE("loss_sd is the mean prediction over the mask") {
    Fixture f;
    ShadowLoss l = loss_sd(f.d, f.mask);
    CHECK(l.value == doctest::Approx(0.4));
    CHECK(l.grad_d[0] == 0.5f);
    CHECK(l.grad_d[1] == 0.5f);
    CHECK(l.grad_d[2] == 0.0f);
    CHECK(l.grad_d[3] == 0.0f);

    PredictionMap zeros = PredictionMap::zeros(2, 2);
    CHECK(loss_sd(zeros, f.mask).value == 0.0);
    PredictionMap ones = PredictionMap::zeros(2, 2);
    ones.data.assign(4, 1.0f);
    CHECK(loss_sd(ones, f.mask).value == 1.0);

    CHECK_THROWS_AS(loss_sd(f.d, BinaryMask::zeros(2, 2)), Error);
    PredictionMap bad = f.d;
    bad.data[0] = 1.5f;
    CHECK_THROWS_AS(loss_sd(bad, f.mask), Error);
}

TEST_CASE("attenuator loss is the frozen weighted sum 79.9") {
    Fixture f;
    LossWeights w;
    AttenuatorLoss l = attenuator_loss(f.input, f.mask, f.a, f.d, w);
    CHECK(l.nsd == doctest::Approx(0.15));
    CHECK(l.sd == doctest::Approx(0.4));
    CHECK(l.ph == doctest::Approx(0.75));
    CHECK(l.total == doctest::Approx(79.9));
    CHECK(l.total ==
          doctest::Approx(w.nsd * l.nsd + w.sd * l.sd + w.ph * l.ph).epsilon(1e-9));

    // Doubling lambda_sd changes only that term's contribution.
    LossWeights w2 = w;
    w2.sd = 2.0;
    AttenuatorLoss l2 = attenuator_loss(f.input, f.mask, f.a, f.d, w2);
    CHECK(l2.total - l.total == doctest::Approx(l.sd).epsilon(1e-9));

    // Identity input with a silent detector vanishes entirely.
    PredictionMap silent = PredictionMap::zeros(2, 2);
    AttenuatorLoss zero = attenuator_loss(f.input, f.mask, f.input, silent, w);
    CHECK(zero.total == 0.0);
}

TEST_CASE("detector loss is the frozen weighted sum 0.18") {
    BinaryMask mask = BinaryMask::zeros(2, 2);
    mask.set(0, 0, true);
    mask.set(1, 1, true);
    PredictionMap real = PredictionMap::zeros(2, 2);
    PredictionMap adv = PredictionMap::zeros(2, 2);
    // |real - M| = 0.1 everywhere, |adv - M| = 0.5 everywhere.
    real.data = {0.9f, 0.1f, 0.1f, 0.9f};
    adv.data = {0.5f, 0.5f, 0.5f, 0.5f};

    LossWeights w;
    DetectorLoss l = detector_loss(real, adv, mask, w.adv0, w);
    CHECK(l.real_term == doctest::Approx(0.8 * 0.1));
    CHECK(l.adv_term == doctest::Approx(0.2 * 0.5));
    CHECK(l.total == doctest::Approx(0.18));

    // Perfect detector, gate closed: exactly zero.
    PredictionMap exact = PredictionMap::zeros(2, 2);
    exact.data = {1.0f, 0.0f, 0.0f, 1.0f};
    DetectorLoss zero = detector_loss(exact, adv, mask, 0.0, w);
    CHECK(zero.total == 0.0);
    for (float g : zero.grad_real) CHECK(g == 0.0f);

    // Gate closed -> adversarial gradient identically zero.
    DetectorLoss gated = detector_loss(real, adv, mask, 0.0, w);
    CHECK(gated.adv_term == 0.0);
    for (float g : gated.grad_adv) CHECK(g == 0.0f);

    PredictionMap wrong_size = PredictionMap::zeros(2, 3);
    CHECK_THROWS_AS(detector_loss(wrong_size, adv, mask, 0.2, w), Error);
    CHECK_THROWS_AS(detector_loss(real, adv, mask, -0.2, w), Error);
}

TEST_CASE("loss gradients match central finite differences away from ties") {
    // Random 8x8 fixture: diffs bounded away from 0 so no sign flips occur
    // within the probe step. Scalar-loss tolerance 1e-4.
    const int s = 8;
    SplitMix64 rng(123);
    Image input = log_image(s, s);
    for (float& v : input.data) v = static_cast<float>(rng.uniform(-3.0, -1.0));
    Image a = input;
    a.domain = Domain::log;
    for (float& v : a.data) {
        const double d = rng.uniform(0.05, 0.5) * (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
        v = static_cast<float>(v + d);
    }
    BinaryMask mask = BinaryMask::zeros(s, s);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) mask.set(y, x, true);
    PredictionMap d_on_a = PredictionMap::zeros(s, s);
    for (float& v : d_on_a.data) v = static_cast<float>(rng.uniform(0.1, 0.9));

    LossWeights w;
    AttenuatorLoss base = attenuator_loss(input, mask, a, d_on_a, w);

    auto probe = [&](float* slot, double analytic) {
        const float orig = *slot;
        const float h = 1e-4f;
        *slot = orig + h;
        const double lp = attenuator_loss(input, mask, a, d_on_a, w).total;
        *slot = orig - h;
        const double lm = attenuator_loss(input, mask, a, d_on_a, w).total;
        const double span = double(orig + h) - double(orig - h);
        *slot = orig;
        const double fd = (lp - lm) / span;
        CHECK(std::fabs(analytic - fd) <= 1e-4 * std::max({1.0, std::fabs(analytic), std::fabs(fd)}));
    };
    for (std::size_t i = 0; i < a.data.size(); i += 17) probe(&a.data[i], base.grad_a[i]);
    for (std::size_t i = 0; i < d_on_a.data.size(); i += 13)
        probe(&d_on_a.data[i], base.grad_d_on_a[i]);

    // Detector loss against both of its prediction inputs.
    PredictionMap real = PredictionMap::zeros(s, s);
    for (float& v : real.data) v = static_cast<float>(rng.uniform(0.1, 0.9));
    PredictionMap adv = PredictionMap::zeros(s, s);
    for (float& v : adv.data) v = static_cast<float>(rng.uniform(0.1, 0.9));
    DetectorLoss dl = detector_loss(real, adv, mask, w.adv0, w);
    auto probe_d = [&](float* slot, double analytic) {
        const float orig = *slot;
        const float h = 1e-4f;
        *slot = orig + h;
        const double lp = detector_loss(real, adv, mask, w.adv0, w).total;
        *slot = orig - h;
        const double lm = detector_loss(real, adv, mask, w.adv0, w).total;
        const double span = double(orig + h) - double(orig - h);
        *slot = orig;
        const double fd = (lp - lm) / span;
        CHECK(std::fabs(analytic - fd) <= 1e-4 * std::max({1.0, std::fabs(analytic), std::fabs(fd)}));
    };
    for (std::size_t i = 0; i < real.data.size(); i += 11) probe_d(&real.data[i], dl.grad_real[i]);
    for (std::size_t i = 0; i < adv.data.size(); i += 7) probe_d(&adv.data[i], dl.grad_adv[i]);
}
