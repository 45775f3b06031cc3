#include "shadowad/unet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "shadowad/common.hpp"
#include "shadowad/kernels.hpp"
#include "shadowad/rng.hpp"

namespace shadowad::nets {

namespace {

std::string format_double(double v) {
    // Shortest representation that round-trips; keeps canonical() stable.
    std::ostringstream os;
    os.precision(17);
    os << v;
    std::string s = os.str();
    std::ostringstream probe;
    for (int prec = 1; prec < 17; ++prec) {
        probe.str("");
        probe.precision(prec);
        probe << v;
        double back = 0.0;
        std::istringstream(probe.str()) >> back;
        if (back == v) return probe.str();
    }
    return s;
}

struct ConvLayer {
    std::string prefix;  // "enc1", "dec3", ...
    int cin = 0, cout = 0, stride = 1;
    bool has_norm = false;
};

// Registry order: encoder shallow-to-deep, decoder deep-to-shallow, head.
// This order is also the checkpoint tensor order and the Adam slot order.
std::vector<ConvLayer> layer_plan(const UNetConfig& c) {
    std::vector<ConvLayer> plan;
    const bool bn = c.norm == Norm::batch;
    for (int i = 1; i <= c.depth; ++i)
        plan.push_back({"enc" + std::to_string(i), c.level_channels(i - 1), c.level_channels(i), 2,
                        bn});
    for (int i = c.depth; i >= 2; --i)
        plan.push_back({"dec" + std::to_string(i),
                        c.level_channels(i) + c.level_channels(i - 1), c.level_channels(i - 1), 1,
                        bn});
    plan.push_back({"dec1", c.level_channels(1) + c.in_channels, c.out_channels, 1, false});
    return plan;
}

std::vector<ParamTensor> build_registry(const UNetConfig& c) {
    std::vector<ParamTensor> out;
    for (const ConvLayer& layer : layer_plan(c)) {
        ParamTensor w;
        w.name = layer.prefix + ".conv.w";
        w.dims = {layer.cout, layer.cin, 3, 3};
        w.v.assign(static_cast<std::size_t>(w.numel()), 0.0f);
        out.push_back(std::move(w));
        ParamTensor b;
        b.name = layer.prefix + ".conv.b";
        b.dims = {layer.cout};
        b.v.assign(layer.cout, 0.0f);
        out.push_back(std::move(b));
        if (!layer.has_norm) continue;
        for (const char* part : {"gamma", "beta", "running_mean", "running_var"}) {
            ParamTensor t;
            t.name = layer.prefix + ".bn." + part;
            t.dims = {layer.cout};
            t.v.assign(layer.cout, 0.0f);
            t.trainable = part[0] == 'g' || part[0] == 'b';
            out.push_back(std::move(t));
        }
    }
    return out;
}

}  // namespace

int UNetConfig::level_channels(int level) const {
    if (level == 0) return in_channels;
    int c = base_channels;
    for (int i = 1; i < level; ++i) c = std::min(c * 2, 8 * base_channels);
    return std::min(c, 8 * base_channels);
}

void UNetConfig::validate() const {
    require(depth >= 1 && depth <= 10, ErrorKind::validation, "UNetConfig: depth must be in [1,10]");
    require(base_channels >= 1 && base_channels <= 512, ErrorKind::validation,
            "UNetConfig: base_channels must be in [1,512]");
    require(in_channels >= 1 && in_channels <= 64 && out_channels >= 1 && out_channels <= 64,
            ErrorKind::validation, "UNetConfig: channel counts must be in [1,64]");
    require(leaky_slope > 0.0 && leaky_slope < 1.0, ErrorKind::validation,
            "UNetConfig: leaky_slope must be in (0,1)");
}

std::string UNetConfig::canonical() const {
    std::string s = "{\"depth\":" + std::to_string(depth) +
                    ",\"base_channels\":" + std::to_string(base_channels) +
                    ",\"in_channels\":" + std::to_string(in_channels) +
                    ",\"out_channels\":" + std::to_string(out_channels) +
                    ",\"leaky_slope\":" + format_double(leaky_slope) + ",\"norm\":\"" +
                    (norm == Norm::batch ? "batch" : "none") + "\",\"output_activation\":\"" +
                    (output_activation == OutputActivation::sigmoid ? "sigmoid" : "identity") +
                    "\",\"residual\":" + (residual ? "true" : "false") + "}";
    return s;
}

std::uint64_t UNetConfig::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a 64
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

UNetConfig UNetConfig::attenuator(int depth, int base_channels) {
    UNetConfig c;
    c.depth = depth;
    c.base_channels = base_channels;
    c.in_channels = 4;  // log-RGB + mask plane
    c.out_channels = 3;
    c.output_activation = OutputActivation::identity;
    c.residual = true;
    return c;
}

UNetConfig UNetConfig::detector(int depth, int base_channels) {
    UNetConfig c;
    c.depth = depth;
    c.base_channels = base_channels;
    c.in_channels = 3;
    c.out_channels = 1;
    c.output_activation = OutputActivation::sigmoid;
    c.residual = false;
    return c;
}

UNetConfig unet_config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("network config is not valid JSON: ") + e.what());
    }
    require(j.is_object(), ErrorKind::validation, "network config must be a JSON object");
    UNetConfig c;
    for (auto& [key, value] : j.items()) {
        try {
            if (key == "depth")
                c.depth = value.get<int>();
            else if (key == "base_channels")
                c.base_channels = value.get<int>();
            else if (key == "in_channels")
                c.in_channels = value.get<int>();
            else if (key == "out_channels")
                c.out_channels = value.get<int>();
            else if (key == "leaky_slope")
                c.leaky_slope = value.get<double>();
            else if (key == "norm") {
                std::string v = value.get<std::string>();
                require(v == "batch" || v == "none", ErrorKind::validation,
                        "network config: norm must be \"batch\" or \"none\"");
                c.norm = v == "batch" ? Norm::batch : Norm::none;
            } else if (key == "output_activation") {
                std::string v = value.get<std::string>();
                require(v == "sigmoid" || v == "identity", ErrorKind::validation,
                        "network config: output_activation must be \"sigmoid\" or \"identity\"");
                c.output_activation =
                    v == "sigmoid" ? OutputActivation::sigmoid : OutputActivation::identity;
            } else if (key == "residual")
                c.residual = value.get<bool>();
            else
                fail(ErrorKind::validation, "network config: unknown key \"" + key + "\"");
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::validation, "network config: bad value for key \"" + key + "\"");
        }
    }
    c.validate();
    return c;
}

std::int64_t ParamTensor::numel() const {
    std::int64_t n = 1;
    for (std::int64_t d : dims) n *= d;
    return n;
}

void ParamGrads::add_scaled(const ParamGrads& other, double scale) {
    require(g.size() == other.g.size(), ErrorKind::validation, "ParamGrads: layout mismatch");
    for (std::size_t t = 0; t < g.size(); ++t) {
        require(g[t].size() == other.g[t].size(), ErrorKind::validation,
                "ParamGrads: layout mismatch");
        for (std::size_t i = 0; i < g[t].size(); ++i)
            g[t][i] = static_cast<float>(g[t][i] + scale * other.g[t][i]);
    }
}

bool ParamGrads::all_finite() const {
    for (const auto& t : g)
        for (float v : t)
            if (!std::isfinite(v)) return false;
    return true;
}

UNet::UNet(UNetConfig config, std::uint64_t init_seed) : cfg_(config) {
    cfg_.validate();
    tensors_ = build_registry(cfg_);
    SplitMix64 rng(init_seed);
    for (ParamTensor& t : tensors_) {
        if (t.name.ends_with(".conv.w")) {
            for (float& v : t.v) v = static_cast<float>(rng.normal() * 0.02);
        } else if (t.name.ends_with(".bn.gamma") || t.name.ends_with(".bn.running_var")) {
            std::fill(t.v.begin(), t.v.end(), 1.0f);
        }
        // conv.b, bn.beta, bn.running_mean stay zero.
    }
}

UNet::UNet(UNetConfig config, std::vector<ParamTensor> tensors) : cfg_(config) {
    cfg_.validate();
    std::vector<ParamTensor> expect = build_registry(cfg_);
    require(tensors.size() == expect.size(), ErrorKind::model,
            "checkpoint tensors do not match the architecture (count mismatch)");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        require(tensors[i].name == expect[i].name, ErrorKind::model,
                "checkpoint tensor order/name mismatch at \"" + tensors[i].name + "\"");
        require(tensors[i].dims == expect[i].dims, ErrorKind::model,
                "checkpoint tensor shape mismatch at \"" + tensors[i].name + "\"");
        require(tensors[i].v.size() == static_cast<std::size_t>(expect[i].numel()),
                ErrorKind::model, "checkpoint tensor payload mismatch at \"" + tensors[i].name + "\"");
        tensors[i].trainable = expect[i].trainable;
    }
    tensors_ = std::move(tensors);
}

int UNet::find_tensor(const std::string& name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].name == name) return static_cast<int>(i);
    return -1;
}

std::int64_t UNet::trainable_parameter_count() const {
    std::int64_t n = 0;
    for (const ParamTensor& t : tensors_)
        if (t.trainable) n += t.numel();
    return n;
}

ParamGrads UNet::zero_grads() const {
    ParamGrads pg;
    pg.g.resize(tensors_.size());
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].trainable) pg.g[i].assign(tensors_[i].v.size(), 0.0f);
    return pg;
}

namespace {

struct LayerRef {
    const ConvLayer* layer;
    int w_idx, b_idx, gamma_idx, beta_idx, rmean_idx, rvar_idx;
};

std::vector<LayerRef> resolve_layers(const std::vector<ConvLayer>& plan, const UNet& net) {
    std::vector<LayerRef> out;
    for (const ConvLayer& l : plan) {
        LayerRef r{};
        r.layer = &l;
        r.w_idx = net.find_tensor(l.prefix + ".conv.w");
        r.b_idx = net.find_tensor(l.prefix + ".conv.b");
        if (l.has_norm) {
            r.gamma_idx = net.find_tensor(l.prefix + ".bn.gamma");
            r.beta_idx = net.find_tensor(l.prefix + ".bn.beta");
            r.rmean_idx = net.find_tensor(l.prefix + ".bn.running_mean");
            r.rvar_idx = net.find_tensor(l.prefix + ".bn.running_var");
        }
        out.push_back(r);
    }
    return out;
}

void add_into(Tensor& dst, const Tensor& src) {
    require(dst.shape == src.shape, ErrorKind::validation, "tensor add: shape mismatch");
    for (std::int64_t i = 0; i < dst.numel(); ++i)
        dst.v[static_cast<std::size_t>(i)] += src.v[static_cast<std::size_t>(i)];
}

}  // namespace

Tensor UNet::forward(const Tensor& input, RunMode mode, ForwardTrace* trace) {
    require(input.c() == cfg_.in_channels, ErrorKind::validation,
            "forward: input has " + std::to_string(input.c()) + " channels, expected " +
                std::to_string(cfg_.in_channels));
    const int div = 1 << cfg_.depth;
    require(input.h() % div == 0 && input.w() % div == 0 && input.h() >= div && input.w() >= div,
            ErrorKind::validation,
            "forward: input size must be a positive multiple of 2^depth = " + std::to_string(div));

    std::vector<ConvLayer> plan = layer_plan(cfg_);
    std::vector<LayerRef> refs = resolve_layers(plan, *this);
    const bool bn = cfg_.norm == Norm::batch;
    const bool train = mode == RunMode::train;

    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;
    tr = ForwardTrace{};
    tr.mode = mode;
    tr.params_version = version_;
    tr.input = input;
    tr.enc_conv_out.resize(cfg_.depth);
    tr.enc_bn_out.resize(cfg_.depth);
    tr.enc_act.resize(cfg_.depth);
    tr.enc_bn_mean.resize(cfg_.depth);
    tr.enc_bn_istd.resize(cfg_.depth);
    const int n_dec_blocks = cfg_.depth - 1;
    tr.dec_concat.resize(n_dec_blocks);
    tr.dec_conv_out.resize(n_dec_blocks);
    tr.dec_bn_out.resize(n_dec_blocks);
    tr.dec_act.resize(n_dec_blocks);
    tr.dec_bn_mean.resize(n_dec_blocks);
    tr.dec_bn_istd.resize(n_dec_blocks);

    auto run_block = [&](const LayerRef& r, const Tensor& x, Tensor& conv_out, Tensor& bn_out,
                         Tensor& act, std::vector<double>& save_mean,
                         std::vector<double>& save_istd) {
        const ConvLayer& l = *r.layer;
        ConvSpec spec{x.n(), l.cin, x.h(), x.w(), l.cout, 3, l.stride, 1};
        conv_out = Tensor::zeros(x.n(), l.cout, spec.oh(), spec.ow());
        conv2d_forward(x.data(), tensors_[r.w_idx].v.data(), tensors_[r.b_idx].v.data(),
                       conv_out.data(), spec);
        const Tensor* pre_act = &conv_out;
        if (l.has_norm && bn) {
            bn_out = Tensor::zeros(conv_out.n(), conv_out.c(), conv_out.h(), conv_out.w());
            const int hw = conv_out.h() * conv_out.w();
            if (train) {
                save_mean.resize(l.cout);
                save_istd.resize(l.cout);
                batchnorm_forward_train(conv_out.data(), tensors_[r.gamma_idx].v.data(),
                                        tensors_[r.beta_idx].v.data(), bn_out.data(),
                                        tensors_[r.rmean_idx].v.data(),
                                        tensors_[r.rvar_idx].v.data(), save_mean.data(),
                                        save_istd.data(), conv_out.n(), l.cout, hw, 0.1, 1e-5);
            } else {
                batchnorm_forward_infer(conv_out.data(), tensors_[r.gamma_idx].v.data(),
                                        tensors_[r.beta_idx].v.data(),
                                        tensors_[r.rmean_idx].v.data(),
                                        tensors_[r.rvar_idx].v.data(), bn_out.data(), conv_out.n(),
                                        l.cout, hw, 1e-5);
            }
            pre_act = &bn_out;
        }
        act = Tensor::zeros(pre_act->n(), pre_act->c(), pre_act->h(), pre_act->w());
        leaky_relu_forward(pre_act->data(), act.data(), pre_act->numel(),
                           static_cast<float>(cfg_.leaky_slope));
    };

    // Encoder.
    const Tensor* prev = &input;
    for (int i = 0; i < cfg_.depth; ++i) {
        run_block(refs[i], *prev, tr.enc_conv_out[i], tr.enc_bn_out[i], tr.enc_act[i],
                  tr.enc_bn_mean[i], tr.enc_bn_istd[i]);
        prev = &tr.enc_act[i];
    }

    // Decoder blocks: level d .. level 2.
    const Tensor* h = &tr.enc_act[cfg_.depth - 1];
    for (int j = 0; j < n_dec_blocks; ++j) {
        const int level = cfg_.depth - j;
        const Tensor& skip = tr.enc_act[level - 2];  // e[level-1]
        Tensor up = Tensor::zeros(h->n(), h->c(), h->h() * 2, h->w() * 2);
        upsample2_forward(h->data(), up.data(), h->n(), h->c(), h->h(), h->w());
        require(up.h() == skip.h() && up.w() == skip.w(), ErrorKind::validation,
                "forward: skip shape mismatch");
        tr.dec_concat[j] = Tensor::zeros(up.n(), up.c() + skip.c(), up.h(), up.w());
        concat_forward(up.data(), up.c(), skip.data(), skip.c(), tr.dec_concat[j].data(), up.n(),
                       up.h() * up.w());
        run_block(refs[cfg_.depth + j], tr.dec_concat[j], tr.dec_conv_out[j], tr.dec_bn_out[j],
                  tr.dec_act[j], tr.dec_bn_mean[j], tr.dec_bn_istd[j]);
        h = &tr.dec_act[j];
    }

    // Head: upsample, concat raw input, conv, output activation, residual.
    const LayerRef& head = refs.back();
    Tensor up = Tensor::zeros(h->n(), h->c(), h->h() * 2, h->w() * 2);
    upsample2_forward(h->data(), up.data(), h->n(), h->c(), h->h(), h->w());
    tr.head_concat = Tensor::zeros(up.n(), up.c() + input.c(), up.h(), up.w());
    concat_forward(up.data(), up.c(), input.data(), input.c(), tr.head_concat.data(), up.n(),
                   up.h() * up.w());
    ConvSpec head_spec{tr.head_concat.n(), head.layer->cin, tr.head_concat.h(),
                       tr.head_concat.w(), head.layer->cout, 3, 1, 1};
    tr.head_conv_out = Tensor::zeros(input.n(), cfg_.out_channels, input.h(), input.w());
    conv2d_forward(tr.head_concat.data(), tensors_[head.w_idx].v.data(),
                   tensors_[head.b_idx].v.data(), tr.head_conv_out.data(), head_spec);

    tr.head_act = tr.head_conv_out;
    if (cfg_.output_activation == OutputActivation::sigmoid)
        sigmoid_forward(tr.head_conv_out.data(), tr.head_act.data(), tr.head_conv_out.numel());

    Tensor out = tr.head_act;
    if (cfg_.residual) {
        const std::int64_t plane = static_cast<std::int64_t>(input.h()) * input.w();
        for (int in = 0; in < input.n(); ++in)
            for (int c = 0; c < cfg_.out_channels; ++c) {
                const float* src =
                    input.data() + (static_cast<std::int64_t>(in) * input.c() + c) * plane;
                float* dst = out.data() + (static_cast<std::int64_t>(in) * cfg_.out_channels + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i];
            }
    }
    return out;
}

void UNet::backward(const ForwardTrace& tr, const Tensor& dy, ParamGrads* grads,
                    Tensor* dinput) const {
    require(tr.params_version == version_, ErrorKind::validation,
            "backward: trace is stale (parameters changed since forward)");
    require(tr.mode == RunMode::train, ErrorKind::validation,
            "backward: trace was recorded in infer mode");
    require(dy.shape == tr.head_act.shape, ErrorKind::validation,
            "backward: dy shape mismatch");
    require(grads == nullptr || grads->g.size() == tensors_.size(), ErrorKind::validation,
            "backward: gradient layout mismatch");

    std::vector<ConvLayer> plan = layer_plan(cfg_);
    std::vector<LayerRef> refs = resolve_layers(plan, *this);
    const int n_dec_blocks = cfg_.depth - 1;
    const float slope = static_cast<float>(cfg_.leaky_slope);

    if (dinput) *dinput = Tensor::zeros(tr.input.n(), tr.input.c(), tr.input.h(), tr.input.w());

    auto conv_backward = [&](const LayerRef& r, const Tensor& x, const Tensor& g_out,
                             Tensor& g_in) {
        const ConvLayer& l = *r.layer;
        ConvSpec spec{x.n(), l.cin, x.h(), x.w(), l.cout, 3, l.stride, 1};
        if (grads) {
            std::vector<float> dw(tensors_[r.w_idx].v.size());
            std::vector<float> db(tensors_[r.b_idx].v.size());
            conv2d_backward_weights(x.data(), g_out.data(), dw.data(), db.data(), spec);
            auto& gw = grads->g[r.w_idx];
            auto& gb = grads->g[r.b_idx];
            for (std::size_t i = 0; i < dw.size(); ++i) gw[i] += dw[i];
            for (std::size_t i = 0; i < db.size(); ++i) gb[i] += db[i];
        }
        g_in = Tensor::zeros(x.n(), l.cin, x.h(), x.w());
        conv2d_backward_data(g_out.data(), tensors_[r.w_idx].v.data(), g_in.data(), spec);
    };

    auto block_backward = [&](const LayerRef& r, const Tensor& conv_in, const Tensor& conv_out,
                              const Tensor& bn_out, const std::vector<double>& bn_mean,
                              const std::vector<double>& bn_istd, const Tensor& g_act,
                              Tensor& g_in) {
        const ConvLayer& l = *r.layer;
        const Tensor& pre_act = l.has_norm ? bn_out : conv_out;
        Tensor g_pre = Tensor::zeros(g_act.n(), g_act.c(), g_act.h(), g_act.w());
        leaky_relu_backward(pre_act.data(), g_act.data(), g_pre.data(), g_act.numel(), slope);
        if (l.has_norm) {
            Tensor g_conv = Tensor::zeros(conv_out.n(), conv_out.c(), conv_out.h(), conv_out.w());
            std::vector<float> dgamma(static_cast<std::size_t>(conv_out.c()));
            std::vector<float> dbeta(static_cast<std::size_t>(conv_out.c()));
            batchnorm_backward(conv_out.data(), g_pre.data(), tensors_[r.gamma_idx].v.data(),
                               bn_mean.data(), bn_istd.data(), g_conv.data(), dgamma.data(),
                               dbeta.data(), conv_out.n(), conv_out.c(),
                               conv_out.h() * conv_out.w());
            if (grads) {
                auto& gg = grads->g[r.gamma_idx];
                auto& gb = grads->g[r.beta_idx];
                for (std::size_t i = 0; i < dgamma.size(); ++i) gg[i] += dgamma[i];
                for (std::size_t i = 0; i < dbeta.size(); ++i) gb[i] += dbeta[i];
            }
            conv_backward(r, conv_in, g_conv, g_in);
        } else {
            conv_backward(r, conv_in, g_pre, g_in);
        }
    };

    // Head.
    Tensor g_head = dy;  // residual passes dy through to the head unchanged
    if (cfg_.output_activation == OutputActivation::sigmoid) {
        Tensor g = Tensor::zeros(dy.n(), dy.c(), dy.h(), dy.w());
        sigmoid_backward(tr.head_act.data(), dy.data(), g.data(), dy.numel());
        g_head = std::move(g);
    }
    Tensor g_head_concat;
    conv_backward(refs.back(), tr.head_concat, g_head, g_head_concat);
    const int head_up_c = tr.head_concat.c() - tr.input.c();
    Tensor g_up = Tensor::zeros(g_head_concat.n(), head_up_c, g_head_concat.h(),
                                g_head_concat.w());
    Tensor g_skip_input = Tensor::zeros(tr.input.n(), tr.input.c(), tr.input.h(), tr.input.w());
    concat_backward(g_head_concat.data(), g_up.data(), head_up_c, g_skip_input.data(),
                    tr.input.c(), g_head_concat.n(),
                    g_head_concat.h() * g_head_concat.w());
    if (dinput) add_into(*dinput, g_skip_input);

    // Gradient of the deepest decoder activation (or of e[d] when depth==1).
    Tensor g_h = Tensor::zeros(g_up.n(), g_up.c(), g_up.h() / 2, g_up.w() / 2);
    upsample2_backward(g_up.data(), g_h.data(), g_h.n(), g_h.c(), g_h.h(), g_h.w());

    // Skip-connection gradients: ge[i] collects the grad of enc_act[i-1].
    std::vector<Tensor> ge(cfg_.depth);

    // Decoder blocks in reverse forward order.
    for (int j = n_dec_blocks - 1; j >= 0; --j) {
        const int level = cfg_.depth - j;
        Tensor g_concat;
        block_backward(refs[cfg_.depth + j], tr.dec_concat[j], tr.dec_conv_out[j],
                       tr.dec_bn_out[j], tr.dec_bn_mean[j], tr.dec_bn_istd[j], g_h, g_concat);
        const Tensor& skip = tr.enc_act[level - 2];
        const int up_c = tr.dec_concat[j].c() - skip.c();
        Tensor g_up_j = Tensor::zeros(g_concat.n(), up_c, g_concat.h(), g_concat.w());
        Tensor g_skip = Tensor::zeros(skip.n(), skip.c(), skip.h(), skip.w());
        concat_backward(g_concat.data(), g_up_j.data(), up_c, g_skip.data(), skip.c(),
                        g_concat.n(), g_concat.h() * g_concat.w());
        ge[level - 2] = std::move(g_skip);
        g_h = Tensor::zeros(g_up_j.n(), g_up_j.c(), g_up_j.h() / 2, g_up_j.w() / 2);
        upsample2_backward(g_up_j.data(), g_h.data(), g_h.n(), g_h.c(), g_h.h(), g_h.w());
    }

    // g_h now holds the grad of enc_act[depth-1] coming from the decoder.
    if (ge[cfg_.depth - 1].numel() == 0)
        ge[cfg_.depth - 1] = std::move(g_h);
    else
        add_into(ge[cfg_.depth - 1], g_h);

    // Encoder in reverse.
    for (int i = cfg_.depth - 1; i >= 0; --i) {
        const Tensor& conv_in = i == 0 ? tr.input : tr.enc_act[i - 1];
        Tensor g_in;
        block_backward(refs[i], conv_in, tr.enc_conv_out[i], tr.enc_bn_out[i], tr.enc_bn_mean[i],
                       tr.enc_bn_istd[i], ge[i], g_in);
        if (i == 0) {
            if (dinput) add_into(*dinput, g_in);
        } else {
            add_into(ge[i - 1], g_in);
        }
    }

    // Residual head: dy flows straight into the matching input planes.
    if (cfg_.residual && dinput) {
        const std::int64_t plane = static_cast<std::int64_t>(tr.input.h()) * tr.input.w();
        for (int in = 0; in < tr.input.n(); ++in)
            for (int c = 0; c < cfg_.out_channels; ++c) {
                float* dst =
                    dinput->data() + (static_cast<std::int64_t>(in) * tr.input.c() + c) * plane;
                const float* src =
                    dy.data() + (static_cast<std::int64_t>(in) * cfg_.out_channels + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i];
            }
    }
}

}  // namespace shadowad::nets
