#include "shadowad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "shadowad/common.hpp"

namespace shadowad::nets {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'A', 'D', 'W', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

// This codebase only targets little-endian hosts; writing raw bytes keeps
// float payloads bit-exact.
static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

class Writer {
  public:
    explicit Writer(const std::filesystem::path& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        require(out_.good(), ErrorKind::io, "cannot open checkpoint for writing: " + path.string());
    }
    template <typename T>
    void pod(const T& v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(const void* p, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void finish() {
        out_.flush();
        require(out_.good(), ErrorKind::io, "write failure on checkpoint: " + path_.string());
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::filesystem::path& path)
        : path_(path), in_(path, std::ios::binary) {
        require(in_.good(), ErrorKind::io, "cannot open checkpoint: " + path.string());
    }
    template <typename T>
    T pod() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        check();
        return v;
    }
    void bytes(void* p, std::size_t n) {
        in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
        check();
    }
    std::string str(std::size_t n) {
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

  private:
    void check() {
        require(in_.good(), ErrorKind::io, "truncated or unreadable checkpoint: " + path_.string());
    }
    std::filesystem::path path_;
    std::ifstream in_;
};

void write_payload(Writer& w, const std::vector<float>& v) {
    w.bytes(v.data(), v.size() * sizeof(float));
}

}  // namespace

void save_checkpoint(const UNet& net, const std::filesystem::path& path,
                     const AdamState* optimizer) {
    Writer w(path);
    w.bytes(kMagic, sizeof(kMagic));
    w.pod(kVersion);
    w.pod(net.config().fingerprint());
    const std::string cfg = net.config().canonical();
    w.pod(static_cast<std::uint32_t>(cfg.size()));
    w.bytes(cfg.data(), cfg.size());
    w.pod(static_cast<std::uint32_t>(net.tensors().size()));
    for (const ParamTensor& t : net.tensors()) {
        w.pod(static_cast<std::uint32_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        w.pod(static_cast<std::uint32_t>(t.dims.size()));
        for (std::int64_t d : t.dims) w.pod(static_cast<std::uint64_t>(d));
        write_payload(w, t.v);
    }
    w.pod(static_cast<std::uint8_t>(optimizer ? 1 : 0));
    if (optimizer) {
        require(optimizer->m.size() == net.tensors().size(), ErrorKind::validation,
                "save_checkpoint: optimizer state does not match the network");
        w.pod(static_cast<std::uint64_t>(optimizer->step));
        w.pod(optimizer->config.lr);
        w.pod(optimizer->config.beta1);
        w.pod(optimizer->config.beta2);
        w.pod(optimizer->config.eps);
        std::uint32_t slots = 0;
        for (std::size_t i = 0; i < net.tensors().size(); ++i)
            if (net.tensors()[i].trainable) ++slots;
        w.pod(slots);
        for (std::size_t i = 0; i < net.tensors().size(); ++i) {
            if (!net.tensors()[i].trainable) continue;
            require(optimizer->m[i].size() == net.tensors()[i].v.size() &&
                        optimizer->v[i].size() == net.tensors()[i].v.size(),
                    ErrorKind::validation, "save_checkpoint: optimizer slot size mismatch");
            write_payload(w, optimizer->m[i]);
            write_payload(w, optimizer->v[i]);
        }
    }
    w.finish();
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    require(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorKind::model,
            "not a model checkpoint: " + path.string());
    const auto version = r.pod<std::uint32_t>();
    require(version == kVersion, ErrorKind::model,
            "unsupported checkpoint version " + std::to_string(version));
    const auto fingerprint = r.pod<std::uint64_t>();
    const auto cfg_len = r.pod<std::uint32_t>();
    require(cfg_len <= 1 << 16, ErrorKind::model, "checkpoint config block is implausibly large");
    UNetConfig cfg = unet_config_from_json(r.str(cfg_len));
    require(cfg.fingerprint() == fingerprint, ErrorKind::model,
            "checkpoint fingerprint mismatch: file does not match its embedded architecture");

    const auto n_tensors = r.pod<std::uint32_t>();
    require(n_tensors <= 4096, ErrorKind::model, "checkpoint tensor count is implausible");
    std::vector<ParamTensor> tensors;
    tensors.reserve(n_tensors);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        ParamTensor t;
        const auto name_len = r.pod<std::uint32_t>();
        require(name_len <= 256, ErrorKind::model, "checkpoint tensor name is implausibly long");
        t.name = r.str(name_len);
        const auto rank = r.pod<std::uint32_t>();
        require(rank >= 1 && rank <= 4, ErrorKind::model,
                "checkpoint tensor rank out of range at \"" + t.name + "\"");
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const auto dim = r.pod<std::uint64_t>();
            require(dim >= 1 && dim <= (1u << 20), ErrorKind::model,
                    "checkpoint dimension out of range at \"" + t.name + "\"");
            t.dims.push_back(static_cast<std::int64_t>(dim));
            numel *= static_cast<std::int64_t>(dim);
        }
        require(numel <= (1 << 28), ErrorKind::model, "checkpoint tensor is implausibly large");
        t.v.resize(static_cast<std::size_t>(numel));
        r.bytes(t.v.data(), t.v.size() * sizeof(float));
        tensors.push_back(std::move(t));
    }

    LoadedCheckpoint loaded{UNet(cfg, std::move(tensors)), std::nullopt};

    const auto has_opt = r.pod<std::uint8_t>();
    if (has_opt) {
        AdamState st;
        st.step = static_cast<std::int64_t>(r.pod<std::uint64_t>());
        st.config.lr = r.pod<double>();
        st.config.beta1 = r.pod<double>();
        st.config.beta2 = r.pod<double>();
        st.config.eps = r.pod<double>();
        st.config.validate();
        const auto slots = r.pod<std::uint32_t>();
        std::uint32_t expect_slots = 0;
        for (const ParamTensor& t : loaded.net.tensors())
            if (t.trainable) ++expect_slots;
        require(slots == expect_slots, ErrorKind::model,
                "checkpoint optimizer slots do not match the architecture");
        st.m.resize(loaded.net.tensors().size());
        st.v.resize(loaded.net.tensors().size());
        for (std::size_t i = 0; i < loaded.net.tensors().size(); ++i) {
            if (!loaded.net.tensors()[i].trainable) continue;
            st.m[i].resize(loaded.net.tensors()[i].v.size());
            st.v[i].resize(loaded.net.tensors()[i].v.size());
            r.bytes(st.m[i].data(), st.m[i].size() * sizeof(float));
            r.bytes(st.v[i].data(), st.v[i].size() * sizeof(float));
        }
        loaded.optimizer = std::move(st);
    }
    return loaded;
}

}  // namespace shadowad::nets
