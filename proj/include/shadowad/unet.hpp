#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shadowad/tensor.hpp"

namespace shadowad::nets {

enum class Norm { batch, none };
enum class OutputActivation { sigmoid, identity };
enum class RunMode { train, infer };

// Mirror-symmetric encoder/decoder with skip connections. Encoder block i:
// 3x3 stride-2 conv -> norm -> LeakyReLU, channels base*2^(i-1) capped at
// 8*base. Decoder block: 2x nearest upsample -> concat skip -> 3x3 stride-1
// conv -> norm -> LeakyReLU. The head decoder conv has no norm/LeakyReLU and
// feeds the output activation; `residual` adds the first out_channels input
// planes to the result (the attenuator's identity-at-zero head).
struct UNetConfig {
    int depth = 3;
    int base_channels = 16;
    int in_channels = 3;
    int out_channels = 1;
    double leaky_slope = 0.2;
    Norm norm = Norm::batch;
    OutputActivation output_activation = OutputActivation::sigmoid;
    bool residual = false;

    int level_channels(int level) const;  // level 0 = network input
    void validate() const;

    // Canonical JSON with a fixed key order; the basis of the fingerprint.
    std::string canonical() const;
    std::uint64_t fingerprint() const;  // FNV-1a over canonical()

    static UNetConfig attenuator(int depth, int base_channels);
    static UNetConfig detector(int depth, int base_channels);
    static UNetConfig attenuator_desk() { return attenuator(3, 16); }
    static UNetConfig detector_desk() { return detector(3, 16); }
    static UNetConfig attenuator_paper() { return attenuator(7, 64); }
    static UNetConfig detector_paper() { return detector(7, 64); }

    bool operator==(const UNetConfig&) const = default;
};

UNetConfig unet_config_from_json(const std::string& json_text);

struct ParamTensor {
    std::string name;
    std::vector<std::int64_t> dims;
    std::vector<float> v;
    bool trainable = true;  // false marks buffers (batchnorm running stats)

    std::int64_t numel() const;
};

// Per-parameter gradient buffers aligned with UNet::tensors() by index;
// buffer entries stay empty.
struct ParamGrads {
    std::vector<std::vector<float>> g;

    void add_scaled(const ParamGrads& other, double scale);
    bool all_finite() const;
};

// Saved forward state consumed by backward(). Valid until the owning
// network's parameters change (backward checks a version stamp).
struct ForwardTrace {
    RunMode mode = RunMode::train;
    std::uint64_t params_version = 0;
    Tensor input;
    // Encoder, index i-1 for block i.
    std::vector<Tensor> enc_conv_out, enc_bn_out, enc_act;
    std::vector<std::vector<double>> enc_bn_mean, enc_bn_istd;
    // Decoder blocks in forward order (level d down to level 2).
    std::vector<Tensor> dec_concat, dec_conv_out, dec_bn_out, dec_act;
    std::vector<std::vector<double>> dec_bn_mean, dec_bn_istd;
    // Head.
    Tensor head_concat, head_conv_out, head_act;
};

class UNet {
  public:
    // Fresh network: conv weights ~ N(0, 0.02), biases/beta/running_mean 0,
    // gamma/running_var 1, drawn in registry order from the seed.
    UNet(UNetConfig config, std::uint64_t init_seed);

    // Rebuild from checkpointed tensors; validates names/shapes against the
    // registry the config implies.
    UNet(UNetConfig config, std::vector<ParamTensor> tensors);

    const UNetConfig& config() const { return cfg_; }
    const std::vector<ParamTensor>& tensors() const { return tensors_; }
    std::vector<ParamTensor>& tensors() { return tensors_; }
    int find_tensor(const std::string& name) const;  // -1 when absent
    std::int64_t trainable_parameter_count() const;

    ParamGrads zero_grads() const;

    // Input height/width must be divisible by 2^depth. Train mode uses batch
    // statistics and updates the running stats in place; infer mode leaves
    // parameters and buffers untouched and uses running stats.
    Tensor forward(const Tensor& input, RunMode mode, ForwardTrace* trace = nullptr);

    // Accumulates parameter gradients into *grads (skipped entirely when
    // null: data-only backprop) and writes the input gradient to *dinput
    // (optional). May be called multiple times per trace with different dy.
    void backward(const ForwardTrace& trace, const Tensor& dy, ParamGrads* grads,
                  Tensor* dinput) const;

    // Must be called whenever parameters are mutated (the optimizer does);
    // invalidates outstanding traces.
    void note_params_changed() { ++version_; }
    std::uint64_t params_version() const { return version_; }

  private:
    UNetConfig cfg_;
    std::vector<ParamTensor> tensors_;
    std::uint64_t version_ = 0;
};

}  // namespace shadowad::nets
