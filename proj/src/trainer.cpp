#include "shadowad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <string>

#include <json.hpp>

#include "shadowad/checkpoint.hpp"
#include "shadowad/common.hpp"
#include "shadowad/losses.hpp"
#include "shadowad/morphology.hpp"
#include "shadowad/rng.hpp"

namespace shadowad::train {
namespace {

namespace fs = std::filesystem;

// Seed tags keep the two init streams apart from each other and from the
// epoch-shuffle streams derive_seed(seed, epoch).
constexpr std::uint64_t kAInitTag = 0x4141414141414141ull;
constexpr std::uint64_t kDInitTag = 0x4444444444444444ull;

Tensor stack_images(const std::vector<const TrainSample*>& batch) {
    const Image& first = batch[0]->log_image;
    Tensor t = Tensor::zeros(static_cast<int>(batch.size()), 3, first.height, first.width);
    const std::size_t block = 3 * first.plane();
    for (std::size_t i = 0; i < batch.size(); ++i)
        std::copy(batch[i]->log_image.data.begin(), batch[i]->log_image.data.end(),
                  t.v.begin() + i * block);
    return t;
}

Image slice_image(const Tensor& t, int n) {
    Image image = Image::zeros(t.h(), t.w(), Domain::log);
    const std::size_t block = image.data.size();
    std::copy(t.v.begin() + n * block, t.v.begin() + (n + 1) * block, image.data.begin());
    return image;
}

PredictionMap slice_prediction(const Tensor& t, int n) {
    PredictionMap map = PredictionMap::zeros(t.h(), t.w());
    const std::size_t block = map.data.size();
    std::copy(t.v.begin() + n * block, t.v.begin() + (n + 1) * block, map.data.begin());
    return map;
}

// dst[slice n] += scale * g, narrowing after the double product.
void add_scaled_slice(Tensor& dst, int n, const std::vector<float>& g, double scale) {
    float* out = dst.v.data() + static_cast<std::size_t>(n) * g.size();
    for (std::size_t p = 0; p < g.size(); ++p)
        out[p] += static_cast<float>(scale * g[p]);
}

bool all_finite(const Tensor& t) {
    for (float x : t.v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool record_finite(const StepRecord& r) {
    return std::isfinite(r.loss_a) && std::isfinite(r.loss_nsd) && std::isfinite(r.loss_sd) &&
           std::isfinite(r.loss_ph) && std::isfinite(r.loss_d) && std::isfinite(r.loss_d_real) &&
           std::isfinite(r.loss_d_adv) && std::isfinite(r.mean_kstrength_in) &&
           std::isfinite(r.mean_kstrength_att) && std::isfinite(r.gated_fraction);
}

fs::path snapshot_path(const fs::path& out_dir, std::int64_t iteration) {
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_%06lld", static_cast<long long>(iteration));
    return out_dir / name;
}

// Fresh file gets the header; a resumed run keeps only the rows the resumed
// trainer has already re-earned, byte for byte, so the finished file cannot
// be told apart from an uninterrupted run's.
void prepare_metrics_file(const fs::path& path, std::int64_t resumed_iteration) {
    if (resumed_iteration <= 0 || !fs::exists(path)) {
        std::ofstream out(path, std::ios::trunc);
        out << kMetricsHeader << '\n';
        require(out.good(), ErrorKind::io, "cannot write " + path.string());
        return;
    }
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot read " + path.string());
    std::string kept;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            kept = line + "\n";
            first = false;
            continue;
        }
        const long long it = std::strtoll(line.c_str(), nullptr, 10);
        if (it >= 1 && it <= resumed_iteration) kept += line + "\n";
    }
    std::ofstream out(path, std::ios::trunc);
    out << kept;
    require(out.good(), ErrorKind::io, "cannot write " + path.string());
}

}  // namespace

Tensor attenuator_input(const std::vector<const TrainSample*>& batch) {
    const Image& first = batch[0]->log_image;
    const std::size_t plane = first.plane();
    Tensor t = Tensor::zeros(static_cast<int>(batch.size()), 4, first.height, first.width);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        float* dst = t.v.data() + i * 4 * plane;
        std::copy(batch[i]->log_image.data.begin(), batch[i]->log_image.data.end(), dst);
        for (std::size_t p = 0; p < plane; ++p)
            dst[3 * plane + p] = batch[i]->mask.data[p] != 0 ? 1.0f : 0.0f;
    }
    return t;
}

const char* const kMetricsHeader =
    "iteration,loss_A,loss_nsd,loss_sd,loss_ph,loss_D,loss_D_real,loss_D_adv,"
    "mean_kstrength_in,mean_kstrength_att,gated_fraction";

std::string metrics_row(const StepRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                  static_cast<long long>(r.iteration), r.loss_a, r.loss_nsd, r.loss_sd, r.loss_ph,
                  r.loss_d, r.loss_d_real, r.loss_d_adv, r.mean_kstrength_in, r.mean_kstrength_att,
                  r.gated_fraction);
    return buf;
}

TrainSample make_train_sample(const Image& linear_image, BinaryMask mask) {
    require(linear_image.domain == Domain::linear, ErrorKind::validation,
            "training sample image must be linear domain");
    require(mask.height == linear_image.height && mask.width == linear_image.width,
            ErrorKind::validation, "training sample mask dimensions do not match the image");
    return TrainSample{to_log_space(linear_image), std::move(mask)};
}

void TrainConfig::validate() const {
    weights.validate();
    adam_a.validate();
    adam_d.validate();
    require(batch_size >= 1, ErrorKind::validation, "batch_size must be >= 1");
    require(iterations >= 1, ErrorKind::validation, "iterations must be >= 1");
    require(band_radius >= 0, ErrorKind::validation, "band_radius must be >= 0");
    require(log_every >= 1, ErrorKind::validation, "log_every must be >= 1");
    require(checkpoint_every >= 0, ErrorKind::validation, "checkpoint_every must be >= 0");
}

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::int64_t epoch, std::size_t n) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const int j = rng.uniform_int(0, static_cast<int>(i) - 1);
        std::swap(perm[i - 1], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

Trainer::Trainer(const nets::UNetConfig& a_config, const nets::UNetConfig& d_config,
                 const TrainConfig& config)
    : config_(config),
      a_net_(a_config, derive_seed(config.seed ^ kAInitTag, 0)),
      d_net_(d_config, derive_seed(config.seed ^ kDInitTag, 0)),
      adam_a_(nets::AdamState::init(a_net_, config.adam_a)),
      adam_d_(nets::AdamState::init(d_net_, config.adam_d)) {
    config_.validate();
}

Trainer::Trainer(TrainConfig config, nets::UNet a_net, nets::UNet d_net, nets::AdamState adam_a,
                 nets::AdamState adam_d, std::int64_t iteration)
    : config_(std::move(config)),
      a_net_(std::move(a_net)),
      d_net_(std::move(d_net)),
      adam_a_(std::move(adam_a)),
      adam_d_(std::move(adam_d)),
      iteration_(iteration) {}

Trainer Trainer::resume(const std::filesystem::path& snapshot_dir,
                        const nets::UNetConfig& a_config, const nets::UNetConfig& d_config,
                        const TrainConfig& config) {
    config.validate();
    nets::LoadedCheckpoint a = nets::load_checkpoint(snapshot_dir / "a.ckpt");
    nets::LoadedCheckpoint d = nets::load_checkpoint(snapshot_dir / "d.ckpt");
    require(a.net.config() == a_config, ErrorKind::model,
            "attenuator snapshot does not match the configured architecture");
    require(d.net.config() == d_config, ErrorKind::model,
            "detector snapshot does not match the configured architecture");
    require(a.optimizer.has_value() && d.optimizer.has_value(), ErrorKind::model,
            "snapshot lacks optimizer state; cannot resume");
    auto same_adam = [](const nets::AdamConfig& x, const nets::AdamConfig& y) {
        return x.lr == y.lr && x.beta1 == y.beta1 && x.beta2 == y.beta2 && x.eps == y.eps;
    };
    require(same_adam(a.optimizer->config, config.adam_a) &&
                same_adam(d.optimizer->config, config.adam_d),
            ErrorKind::validation,
            "resume Adam hyperparameters differ from the snapshot; the run would diverge");

    const fs::path state_path = snapshot_dir / "state.json";
    std::ifstream in(state_path);
    require(in.good(), ErrorKind::io, "cannot read " + state_path.string());
    std::int64_t iteration = 0;
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        iteration = j.at("iteration").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::io, "malformed " + state_path.string() + ": " + e.what());
    }
    require(iteration >= 1, ErrorKind::io, "snapshot iteration must be >= 1");
    return Trainer(config, std::move(a.net), std::move(d.net), std::move(*a.optimizer),
                   std::move(*d.optimizer), iteration);
}

StepRecord Trainer::step(const std::vector<const TrainSample*>& batch) {
    require(!batch.empty(), ErrorKind::validation, "empty training batch");
    const int b = static_cast<int>(batch.size());
    const int h = batch[0]->log_image.height;
    const int w = batch[0]->log_image.width;
    for (const TrainSample* s : batch) {
        require(s->log_image.domain == Domain::log, ErrorKind::validation,
                "training samples must be log domain");
        require(s->log_image.height == h && s->log_image.width == w && s->mask.height == h &&
                    s->mask.width == w,
                ErrorKind::validation, "all samples in a batch must share dimensions");
    }
    const int radius = config_.band_radius > 0 ? config_.band_radius : default_band_radius(h, w);
    const double inv_b = 1.0 / b;

    StepRecord rec;
    rec.iteration = iteration_ + 1;
    const std::string at_iter = " at iteration " + std::to_string(rec.iteration);

    double sum_in = 0.0;
    for (const TrainSample* s : batch)
        sum_in += shadow_strength(from_log_space(s->log_image), s->mask, radius);
    rec.mean_kstrength_in = sum_in * inv_b;

    if (!config_.train_attenuator) {
        // Detector baseline: supervision on real images only; the gate and
        // every attenuator quantity are inert.
        nets::ForwardTrace trace_d;
        Tensor d_real_t = d_net_.forward(stack_images(batch), nets::RunMode::train, &trace_d);
        require(all_finite(d_real_t), ErrorKind::numeric,
                "non-finite detector output" + at_iter);
        Tensor dy_real = Tensor::zeros(b, 1, h, w);
        const PredictionMap silent = PredictionMap::zeros(h, w);
        double sum_real = 0.0;
        for (int i = 0; i < b; ++i) {
            DetectorLoss det = detector_loss(slice_prediction(d_real_t, i), silent,
                                             batch[i]->mask, 0.0, config_.weights);
            sum_real += det.real_term;
            add_scaled_slice(dy_real, i, det.grad_real, inv_b);
        }
        nets::ParamGrads d_grads = d_net_.zero_grads();
        d_net_.backward(trace_d, dy_real, &d_grads, nullptr);
        nets::adam_step(d_net_, d_grads, adam_d_);
        rec.loss_d_real = sum_real * inv_b;
        rec.loss_d = rec.loss_d_real;
        rec.mean_kstrength_att = rec.mean_kstrength_in;
        require(record_finite(rec), ErrorKind::numeric,
                "non-finite loss" + at_iter + ": " + metrics_row(rec));
        iteration_ = rec.iteration;
        return rec;
    }

    // The three consecutive forward passes: attenuate, detect on the
    // attenuated batch, detect on the real batch.
    nets::ForwardTrace trace_a;
    Tensor a_out = a_net_.forward(attenuator_input(batch), nets::RunMode::train, &trace_a);
    nets::ForwardTrace trace_da;
    Tensor d_adv_t = d_net_.forward(a_out, nets::RunMode::train, &trace_da);
    nets::ForwardTrace trace_di;
    Tensor d_real_t = d_net_.forward(stack_images(batch), nets::RunMode::train, &trace_di);
    require(all_finite(a_out) && all_finite(d_adv_t) && all_finite(d_real_t), ErrorKind::numeric,
            "non-finite network output" + at_iter);

    // Per-sample gate from the reconstructed linear-domain attenuated image.
    std::vector<Image> a_images(static_cast<std::size_t>(b));
    std::vector<double> lambda_adv(static_cast<std::size_t>(b));
    double sum_att = 0.0;
    int gated = 0;
    for (int i = 0; i < b; ++i) {
        a_images[i] = slice_image(a_out, i);
        const double strength = shadow_strength(from_log_space(a_images[i]), batch[i]->mask, radius);
        sum_att += strength;
        lambda_adv[i] = adaptive_adv_weight(strength, config_.weights);
        if (lambda_adv[i] == 0.0) ++gated;
    }
    rec.mean_kstrength_att = sum_att * inv_b;
    rec.gated_fraction = static_cast<double>(gated) * inv_b;

    // Per-sample losses; batch means distribute 1/b into every gradient.
    Tensor da_direct = Tensor::zeros(b, 3, h, w);
    Tensor dy_sd = Tensor::zeros(b, 1, h, w);
    Tensor dy_real = Tensor::zeros(b, 1, h, w);
    Tensor dy_adv = Tensor::zeros(b, 1, h, w);
    double sum_a = 0.0, sum_nsd = 0.0, sum_sd = 0.0, sum_ph = 0.0;
    double sum_d = 0.0, sum_real = 0.0, sum_adv = 0.0;
    for (int i = 0; i < b; ++i) {
        const PredictionMap d_adv_i = slice_prediction(d_adv_t, i);
        AttenuatorLoss att = attenuator_loss(batch[i]->log_image, batch[i]->mask, a_images[i],
                                             d_adv_i, config_.weights);
        DetectorLoss det = detector_loss(slice_prediction(d_real_t, i), d_adv_i, batch[i]->mask,
                                         lambda_adv[i], config_.weights);
        sum_a += att.total;
        sum_nsd += att.nsd;
        sum_sd += att.sd;
        sum_ph += att.ph;
        sum_d += det.total;
        sum_real += det.real_term;
        sum_adv += det.adv_term;
        add_scaled_slice(da_direct, i, att.grad_a, inv_b);
        add_scaled_slice(dy_sd, i, att.grad_d_on_a, inv_b);
        add_scaled_slice(dy_real, i, det.grad_real, inv_b);
        if (lambda_adv[i] != 0.0) add_scaled_slice(dy_adv, i, det.grad_adv, inv_b);
    }
    rec.loss_a = sum_a * inv_b;
    rec.loss_nsd = sum_nsd * inv_b;
    rec.loss_sd = sum_sd * inv_b;
    rec.loss_ph = sum_ph * inv_b;
    rec.loss_d = sum_d * inv_b;
    rec.loss_d_real = sum_real * inv_b;
    rec.loss_d_adv = sum_adv * inv_b;

    // The sd path's input gradient must be taken before the detector update
    // invalidates the trace: A's update flows through the detector that
    // produced this forward. No parameter gradients are collected here, so
    // the A-update cannot touch D.
    Tensor d_input_grad = Tensor::zeros(b, 3, h, w);
    d_net_.backward(trace_da, dy_sd, nullptr, &d_input_grad);

    nets::ParamGrads d_grads = d_net_.zero_grads();
    d_net_.backward(trace_di, dy_real, &d_grads, nullptr);
    if (gated < b) d_net_.backward(trace_da, dy_adv, &d_grads, nullptr);
    nets::adam_step(d_net_, d_grads, adam_d_);

    for (std::size_t p = 0; p < da_direct.v.size(); ++p) da_direct.v[p] += d_input_grad.v[p];
    nets::ParamGrads a_grads = a_net_.zero_grads();
    a_net_.backward(trace_a, da_direct, &a_grads, nullptr);
    nets::adam_step(a_net_, a_grads, adam_a_);

    require(record_finite(rec), ErrorKind::numeric,
            "non-finite loss" + at_iter + ": " + metrics_row(rec));
    iteration_ = rec.iteration;
    return rec;
}

StepRecord Trainer::run(const std::vector<TrainSample>& dataset, const fs::path& out_dir) {
    require(!dataset.empty(), ErrorKind::validation, "training dataset is empty");
    const std::size_t batches_per_epoch = dataset.size() / static_cast<std::size_t>(config_.batch_size);
    require(batches_per_epoch >= 1, ErrorKind::validation,
            "dataset is smaller than one batch; partial batches are dropped");
    require(iteration_ < config_.iterations, ErrorKind::validation,
            "snapshot is already at or past the configured iterations");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec, ErrorKind::io, "cannot create " + out_dir.string());
    const fs::path metrics_path = out_dir / "metrics.csv";
    prepare_metrics_file(metrics_path, iteration_);
    std::ofstream csv(metrics_path, std::ios::app);
    require(csv.good(), ErrorKind::io, "cannot write " + metrics_path.string());

    std::vector<std::size_t> perm;
    std::int64_t perm_epoch = -1;
    std::vector<const TrainSample*> batch(static_cast<std::size_t>(config_.batch_size));
    StepRecord last;
    for (std::int64_t it = iteration_ + 1; it <= config_.iterations; ++it) {
        const std::int64_t epoch = (it - 1) / static_cast<std::int64_t>(batches_per_epoch);
        const std::size_t pos =
            static_cast<std::size_t>((it - 1) % static_cast<std::int64_t>(batches_per_epoch));
        if (epoch != perm_epoch) {
            perm = epoch_permutation(config_.seed, epoch, dataset.size());
            perm_epoch = epoch;
        }
        for (std::size_t j = 0; j < batch.size(); ++j)
            batch[j] = &dataset[perm[pos * batch.size() + j]];
        last = step(batch);
        if (it % config_.log_every == 0 || it == config_.iterations) {
            csv << metrics_row(last) << '\n';
            csv.flush();
            require(csv.good(), ErrorKind::io, "cannot write " + metrics_path.string());
        }
        if (config_.checkpoint_every > 0 && it % config_.checkpoint_every == 0)
            write_snapshot(out_dir);
    }
    nets::save_checkpoint(a_net_, out_dir / "a_final.ckpt", &adam_a_);
    nets::save_checkpoint(d_net_, out_dir / "d_final.ckpt", &adam_d_);
    return last;
}

void Trainer::write_snapshot(const fs::path& out_dir) const {
    const fs::path dir = snapshot_path(out_dir, iteration_);
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create " + dir.string());
    nets::save_checkpoint(a_net_, dir / "a.ckpt", &adam_a_);
    nets::save_checkpoint(d_net_, dir / "d.ckpt", &adam_d_);
    nlohmann::json j;
    j["schema_version"] = 1;
    j["iteration"] = iteration_;
    std::ofstream out(dir / "state.json");
    out << j.dump(2) << '\n';
    require(out.good(), ErrorKind::io, "cannot write " + (dir / "state.json").string());
}

}  // namespace shadowad::train
