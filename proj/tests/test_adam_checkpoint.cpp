#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "shadowad/adam.hpp"
#include "shadowad/checkpoint.hpp"
#include "shadowad/common.hpp"
#include "shadowad/rng.hpp"
#include "shadowad/unet.hpp"

using namespace shadowad;
using namespace shadowad::nets;

namespace {

UNetConfig tiny() { return UNetConfig::detector(2, 2); }

ParamGrads unit_grads(const UNet& net, float value) {
    ParamGrads g = net.zero_grads();
    for (std::size_t t = 0; t < g.g.size(); ++t)
        if (net.tensors()[t].trainable) std::fill(g.g[t].begin(), g.g[t].end(), value);
    return g;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("shadowad_test_" + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("first adam step with unit gradients moves every weight by -lr/(1+eps)") {
    // m_hat = v_hat = 1 after bias correction, so dp = -lr/(sqrt(1)+eps).
    UNet net(tiny(), 3);
    std::vector<std::vector<float>> before;
    for (const auto& t : net.tensors()) before.push_back(t.v);

    AdamConfig cfg;  // lr 2e-4
    AdamState state = AdamState::init(net, cfg);
    adam_step(net, unit_grads(net, 1.0f), state);

    const double expect = -cfg.lr / (1.0 + cfg.eps);
    for (std::size_t t = 0; t < net.tensors().size(); ++t) {
        const auto& pt = net.tensors()[t];
        for (std::size_t i = 0; i < pt.v.size(); ++i) {
            const double delta = double(pt.v[i]) - double(before[t][i]);
            if (pt.trainable)
                CHECK(delta == doctest::Approx(expect).epsilon(1e-6));
            else
                CHECK(pt.v[i] == before[t][i]);
        }
    }
    CHECK(state.step == 1);
}

TEST_CASE("adam is deterministic across runs") {
    auto run = [] {
        UNet net(tiny(), 5);
        AdamState st = AdamState::init(net, AdamConfig{});
        SplitMix64 rng(17);
        for (int s = 0; s < 5; ++s) {
            ParamGrads g = net.zero_grads();
            for (std::size_t t = 0; t < g.g.size(); ++t)
                if (net.tensors()[t].trainable)
                    for (auto& v : g.g[t]) v = static_cast<float>(rng.uniform(-1.0, 1.0));
            adam_step(net, g, st);
        }
        std::vector<float> flat;
        for (const auto& t : net.tensors()) flat.insert(flat.end(), t.v.begin(), t.v.end());
        return flat;
    };
    CHECK(run() == run());
}

TEST_CASE("non-finite gradients abort the step before touching parameters") {
    UNet net(tiny(), 7);
    std::vector<std::vector<float>> before;
    for (const auto& t : net.tensors()) before.push_back(t.v);
    AdamState st = AdamState::init(net, AdamConfig{});

    ParamGrads g = unit_grads(net, 1.0f);
    g.g[0][0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(net, g, st), Error);
    CHECK(st.step == 0);
    for (std::size_t t = 0; t < net.tensors().size(); ++t) CHECK(net.tensors()[t].v == before[t]);

    g.g[0][0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(adam_step(net, g, st), Error);
}

TEST_CASE("adam config bounds are validated") {
    AdamConfig bad;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = AdamConfig{};
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = AdamConfig{};
    bad.eps = -1e-8;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("checkpoint round trip is bitwise for params and optimizer state") {
    TempDir dir;
    const auto path = (dir.path / "net.ckpt").string();

    UNet net(tiny(), 11);
    AdamState st = AdamState::init(net, AdamConfig{});
    SplitMix64 rng(13);
    for (int s = 0; s < 3; ++s) {
        ParamGrads g = net.zero_grads();
        for (std::size_t t = 0; t < g.g.size(); ++t)
            if (net.tensors()[t].trainable)
                for (auto& v : g.g[t]) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        adam_step(net, g, st);
    }
    save_checkpoint(net, path, &st);

    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(loaded.net.config() == net.config());
    REQUIRE(loaded.net.tensors().size() == net.tensors().size());
    for (std::size_t t = 0; t < net.tensors().size(); ++t) {
        CHECK(loaded.net.tensors()[t].name == net.tensors()[t].name);
        CHECK(loaded.net.tensors()[t].trainable == net.tensors()[t].trainable);
        REQUIRE(loaded.net.tensors()[t].v.size() == net.tensors()[t].v.size());
        CHECK(std::memcmp(loaded.net.tensors()[t].v.data(), net.tensors()[t].v.data(),
                          net.tensors()[t].v.size() * sizeof(float)) == 0);
    }
    REQUIRE(loaded.optimizer.has_value());
    CHECK(loaded.optimizer->step == st.step);
    CHECK(loaded.optimizer->config.lr == st.config.lr);
    REQUIRE(loaded.optimizer->m.size() == st.m.size());
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        CHECK(loaded.optimizer->m[i] == st.m[i]);
        CHECK(loaded.optimizer->v[i] == st.v[i]);
    }

    // Resumed training continues bitwise identically.
    UNet resumed(loaded.net.config(), std::move(loaded.net.tensors()));
    AdamState st2 = *loaded.optimizer;
    ParamGrads g = unit_grads(net, 0.25f);
    adam_step(net, g, st);
    adam_step(resumed, g, st2);
    for (std::size_t t = 0; t < net.tensors().size(); ++t)
        CHECK(resumed.tensors()[t].v == net.tensors()[t].v);
}

TEST_CASE("checkpoint without optimizer loads with empty optimizer") {
    TempDir dir;
    const auto path = (dir.path / "bare.ckpt").string();
    UNet net(tiny(), 19);
    save_checkpoint(net, path, nullptr);
    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK_FALSE(loaded.optimizer.has_value());
    for (std::size_t t = 0; t < net.tensors().size(); ++t)
        CHECK(loaded.net.tensors()[t].v == net.tensors()[t].v);
}

TEST_CASE("corrupted fingerprint is a model error") {
    TempDir dir;
    const auto path = (dir.path / "fp.ckpt").string();
    UNet net(tiny(), 23);
    save_checkpoint(net, path, nullptr);

    // The fingerprint sits after magic (8) + version (4).
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(12);
    char byte;
    f.seekg(12);
    f.read(&byte, 1);
    byte ^= 0x5a;
    f.seekp(12);
    f.write(&byte, 1);
    f.close();

    try {
        load_checkpoint(path);
        FAIL("expected a model error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::model);
    }
}

TEST_CASE("truncated checkpoint is an io error") {
    TempDir dir;
    const auto path = (dir.path / "trunc.ckpt").string();
    UNet net(tiny(), 29);
    save_checkpoint(net, path, nullptr);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    try {
        load_checkpoint(path);
        FAIL("expected an io error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
    }
}

TEST_CASE("garbage bytes are a model error, missing file an io error") {
    TempDir dir;
    const auto garbage = (dir.path / "garbage.ckpt").string();
    {
        std::ofstream f(garbage, std::ios::binary);
        f << "definitely not a checkpoint, padded to pass the header read....";
    }
    try {
        load_checkpoint(garbage);
        FAIL("expected a model error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::model);
    }

    try {
        load_checkpoint((dir.path / "absent.ckpt").string());
        FAIL("expected an io error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
    }
}

TEST_CASE("loading a checkpoint into the wrong architecture fails by fingerprint") {
    TempDir dir;
    const auto path = (dir.path / "arch.ckpt").string();
    UNet net(tiny(), 31);
    save_checkpoint(net, path, nullptr);
    LoadedCheckpoint ok = load_checkpoint(path);
    CHECK(ok.net.config().fingerprint() == net.config().fingerprint());
    // A different architecture writes a different fingerprint; simulate an
    // operator pointing a detector run at an attenuator file.
    const auto other = (dir.path / "other.ckpt").string();
    UNet att(UNetConfig::attenuator(2, 2), 31);
    save_checkpoint(att, other, nullptr);
    LoadedCheckpoint reload = load_checkpoint(other);
    CHECK(reload.net.config().fingerprint() != net.config().fingerprint());
}
