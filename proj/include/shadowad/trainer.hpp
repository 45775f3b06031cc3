#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shadowad/adam.hpp"
#include "shadowad/image.hpp"
#include "shadowad/physics.hpp"
#include "shadowad/unet.hpp"

namespace shadowad::train {

// One training example; the image is already in log space (the networks'
// input domain). The mask doubles as the attenuator's fourth input plane
// and as the region the shadow losses integrate over.
struct TrainSample {
    Image log_image;
    BinaryMask mask;
};

TrainSample make_train_sample(const Image& linear_image, BinaryMask mask);

// The attenuator's input layout: three log planes plus the mask as a 0/1
// plane, stacked over the batch. Inference must build exactly what training
// fed the network, so there is one spelling of it.
Tensor attenuator_input(const std::vector<const TrainSample*>& batch);

struct TrainConfig {
    LossWeights weights{};
    int batch_size = 8;
    int iterations = 1;
    nets::AdamConfig adam_a{};
    nets::AdamConfig adam_d{};
    int band_radius = 0;  // 0 = default_band_radius of the sample size
    std::uint64_t seed = 0;
    int log_every = 1;
    int checkpoint_every = 0;  // 0 = final checkpoints only
    // false trains the detector on real images alone (the no-attenuator
    // baseline): attenuator fields of the record are 0, the attenuated
    // strength is reported as the input strength and nothing is gated.
    bool train_attenuator = true;

    void validate() const;
};

// Per-iteration bookkeeping. loss_nsd/loss_sd/loss_ph are unweighted batch
// means; loss_a is the weighted total. loss_d_real/loss_d_adv are weighted
// (lambda_real, per-sample lambda_adv) as they enter loss_d, because the
// gate varies within a batch.
struct StepRecord {
    std::int64_t iteration = 0;
    double loss_a = 0.0;
    double loss_nsd = 0.0;
    double loss_sd = 0.0;
    double loss_ph = 0.0;
    double loss_d = 0.0;
    double loss_d_real = 0.0;
    double loss_d_adv = 0.0;
    double mean_kstrength_in = 0.0;
    double mean_kstrength_att = 0.0;
    double gated_fraction = 0.0;  // fraction of the batch with lambda_adv == 0
};

extern const char* const kMetricsHeader;
std::string metrics_row(const StepRecord& record);

// Fisher–Yates permutation of 0..n-1 drawn from the per-epoch child stream
// derive_seed(seed, epoch). Shared by the loop and by tests/tools that need
// to know batch composition; resuming replays it from the epoch index alone.
std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::int64_t epoch, std::size_t n);

// Alternating A/D training. One step = three consecutive forward passes
// (A(I), D(A(I)), D(I)), one Adam update of D on L_D, then one Adam update
// of A on L_A. A's update flows through the detector that produced the
// forward (the pre-update parameters); the sd-path backward through D
// deliberately discards D's parameter gradients, so the networks can only
// influence each other through activations.
class Trainer {
  public:
    Trainer(const nets::UNetConfig& a_config, const nets::UNetConfig& d_config,
            const TrainConfig& config);

    // Rebuilds nets and optimizer moments bitwise from a snapshot directory
    // written by run(); the loop continues after the recorded iteration.
    // The snapshot must match the configured architectures and Adam
    // hyperparameters, else resuming would silently diverge.
    static Trainer resume(const std::filesystem::path& snapshot_dir,
                          const nets::UNetConfig& a_config, const nets::UNetConfig& d_config,
                          const TrainConfig& config);

    // One update of each network on one batch. Aborts with a numeric error
    // (carrying the partial record) when any output or loss goes non-finite.
    StepRecord step(const std::vector<const TrainSample*>& batch);

    // Runs iterations steps over seeded per-epoch shuffles (full batches
    // only), appends metrics.csv rows every log_every iterations, writes
    // ckpt_NNNNNN/ snapshots every checkpoint_every iterations and final
    // a_final.ckpt/d_final.ckpt (with optimizer state) under out_dir.
    // Returns the last record. When resuming, metrics.csv is truncated back
    // to the snapshot iteration so the finished file is identical to an
    // uninterrupted run.
    StepRecord run(const std::vector<TrainSample>& dataset, const std::filesystem::path& out_dir);

    nets::UNet& attenuator() { return a_net_; }
    nets::UNet& detector() { return d_net_; }
    const nets::AdamState& adam_a() const { return adam_a_; }
    const nets::AdamState& adam_d() const { return adam_d_; }
    std::int64_t iteration() const { return iteration_; }
    const TrainConfig& config() const { return config_; }

  private:
    Trainer(TrainConfig config, nets::UNet a_net, nets::UNet d_net, nets::AdamState adam_a,
            nets::AdamState adam_d, std::int64_t iteration);

    void write_snapshot(const std::filesystem::path& out_dir) const;

    TrainConfig config_;
    nets::UNet a_net_;
    nets::UNet d_net_;
    nets::AdamState adam_a_;
    nets::AdamState adam_d_;
    std::int64_t iteration_ = 0;
};

}  // namespace shadowad::train
