// shadowad: synthesize shadow datasets, train the attenuator/detector pair,
// and run detection, attenuation, evaluation and boundary analysis.
//
// Exit codes: 0 success, 2 usage or validation, 3 I/O or dataset layout,
// 4 numeric abort, 5 checkpoint/architecture mismatch.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shadowad/checkpoint.hpp"
#include "shadowad/common.hpp"
#include "shadowad/evaluation.hpp"
#include "shadowad/image.hpp"
#include "shadowad/morphology.hpp"
#include "shadowad/parallel.hpp"
#include "shadowad/physics.hpp"
#include "shadowad/png_io.hpp"
#include "shadowad/run_config.hpp"
#include "shadowad/synth.hpp"
#include "shadowad/trainer.hpp"
#include "shadowad/unet.hpp"

namespace fs = std::filesystem;
using namespace shadowad;

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::validation: return 2;
        case ErrorKind::io: return 3;
        case ErrorKind::numeric: return 4;
        case ErrorKind::model: return 5;
    }
    return 1;
}

nets::LoadedCheckpoint load_detector(const fs::path& path) {
    nets::LoadedCheckpoint loaded = nets::load_checkpoint(path);
    require(loaded.net.config().in_channels == 3 && loaded.net.config().out_channels == 1,
            ErrorKind::model,
            "checkpoint " + path.string() +
                " is not a detector (expected 3 input channels and 1 output channel)");
    return loaded;
}

nets::LoadedCheckpoint load_attenuator(const fs::path& path) {
    nets::LoadedCheckpoint loaded = nets::load_checkpoint(path);
    require(loaded.net.config().in_channels == 4 && loaded.net.config().out_channels == 3,
            ErrorKind::model,
            "checkpoint " + path.string() +
                " is not an attenuator (expected 4 input channels and 3 output channels)");
    return loaded;
}

std::vector<synth::Sample> load_data_dir(const fs::path& data) {
    return synth::load_directory_dataset(data / "images", data / "masks");
}

// Same protocol as training and evaluation: work at the square network size,
// then bring the result back to the input's resolution.
PredictionMap detect_full_size(nets::UNet& net, const Image& image, int net_size) {
    Image small = resize_image(image, net_size, net_size);
    PredictionMap pred = make_detector_predictor(net)(to_log_space(small));
    return resize_prediction(pred, image.height, image.width);
}

struct SynthArgs {
    std::string out;
    synth::DatasetSpec spec;
    std::string texture = "smooth-noise";
};

void run_synth(const SynthArgs& args) {
    synth::DatasetSpec spec = args.spec;
    spec.texture = synth::texture_from_string(args.texture);
    spec.validate();
    std::vector<synth::Sample> samples = synth::generate_dataset(spec);
    synth::write_dataset(samples, spec, args.out);
    std::cout << "wrote " << samples.size() << " samples under " << args.out << "\n";
}

struct TrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::string resume;  // snapshot directory; empty = fresh run
};

void run_train(const TrainArgs& args) {
    cli::RunConfig config = cli::load_run_config(args.config);
    std::vector<synth::Sample> raw = load_data_dir(args.data);
    std::vector<train::TrainSample> dataset;
    dataset.reserve(raw.size());
    for (const synth::Sample& sample : raw)
        dataset.push_back(train::make_train_sample(sample.image, sample.mask));
    raw.clear();

    fs::create_directories(args.out);
    {
        // Echo the fully-defaulted config next to the artifacts it produced.
        std::ofstream echo(fs::path(args.out) / "config.json");
        echo << cli::run_config_to_json(config);
        require(echo.good(), ErrorKind::io, "cannot write " + args.out + "/config.json");
    }

    train::Trainer trainer =
        args.resume.empty()
            ? train::Trainer(config.a_net, config.d_net, config.train)
            : train::Trainer::resume(args.resume, config.a_net, config.d_net, config.train);
    train::StepRecord last = trainer.run(dataset, args.out);
    std::cout << train::kMetricsHeader << "\n" << train::metrics_row(last) << "\n";
}

struct DetectArgs {
    std::string model;
    std::string image;
    std::string out;
    std::string prob;  // optional float-map output
    float threshold = 0.5f;
    int net_size = 64;
};

void run_detect(const DetectArgs& args) {
    nets::LoadedCheckpoint loaded = load_detector(args.model);
    Image image = load_image_png(args.image);
    PredictionMap pred = detect_full_size(loaded.net, image, args.net_size);
    BinaryMask mask = binarize(pred, args.threshold);
    save_mask_png(mask, args.out);
    if (!args.prob.empty()) save_prediction_png(pred, args.prob);
    std::cout << "shadow pixels: " << mask.count_true() << " of " << mask.data.size() << "\n";
}

struct AttenuateArgs {
    std::string model;
    std::string image;
    std::string mask;
    std::string out;
    int net_size = 64;
};

void run_attenuate(const AttenuateArgs& args) {
    nets::LoadedCheckpoint loaded = load_attenuator(args.model);
    Image image = load_image_png(args.image);
    BinaryMask mask = load_mask_png(args.mask);
    require(mask.height == image.height && mask.width == image.width, ErrorKind::validation,
            "mask dimensions do not match the image: " + std::to_string(mask.width) + "x" +
                std::to_string(mask.height) + " vs " + std::to_string(image.width) + "x" +
                std::to_string(image.height));

    const int s = args.net_size;
    train::TrainSample sample =
        train::make_train_sample(resize_image(image, s, s), resize_mask(mask, s, s));
    Tensor a_out = loaded.net.forward(train::attenuator_input({&sample}), nets::RunMode::infer);

    Image log_small = Image::zeros(s, s, Domain::log);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) log_small.at(c, y, x) = a_out.at(0, c, y, x);
    Image attenuated = resize_image(from_log_space(log_small), image.height, image.width);
    save_image_png(attenuated, args.out);

    // Strength is only defined when both regions exist.
    std::size_t on = mask.count_true();
    if (on > 0 && on < mask.data.size()) {
        int radius = default_band_radius(image.height, image.width);
        std::cout << "shadow strength: input " << shadow_strength(image, mask, radius)
                  << ", attenuated " << shadow_strength(attenuated, mask, radius) << "\n";
    }
}

struct EvalArgs {
    std::string model;
    std::string data;
    std::string report;
    float threshold = 0.5f;
    int net_size = 64;
};

void run_eval(const EvalArgs& args) {
    nets::LoadedCheckpoint loaded = load_detector(args.model);
    std::vector<synth::Sample> samples = load_data_dir(args.data);
    EvalProtocol protocol;
    protocol.net_size = args.net_size;
    protocol.threshold = args.threshold;
    protocol.validate();
    EvalReport report = evaluate_dataset(make_detector_predictor(loaded.net), samples, protocol);
    write_eval_report(report, protocol, args.report);
    std::cout << "BER " << report.ber << " over " << report.images.size() << " images\n";
}

struct AnalyzeArgs {
    std::string pred_dir;
    std::string gt_dir;
    std::string cdf;
    int max_distance = 50;
};

std::map<std::string, fs::path> png_stems(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorKind::io, "not a directory: " + dir.string());
    std::map<std::string, fs::path> stems;
    for (const fs::directory_entry& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            stems[entry.path().stem().string()] = entry.path();
    return stems;
}

void run_analyze(const AnalyzeArgs& args) {
    require(args.max_distance >= 0, ErrorKind::validation, "--max-distance must be nonnegative");
    std::map<std::string, fs::path> preds = png_stems(args.pred_dir);
    std::map<std::string, fs::path> gts = png_stems(args.gt_dir);

    std::vector<std::string> problems;
    for (const auto& kv : preds)
        if (!gts.count(kv.first)) problems.push_back("prediction without ground truth: " + kv.first);
    for (const auto& kv : gts)
        if (!preds.count(kv.first)) problems.push_back("ground truth without prediction: " + kv.first);

    BoundaryErrorCdf pooled;
    pooled.max_distance = args.max_distance;
    pooled.fn_le.assign(static_cast<std::size_t>(args.max_distance) + 1, 0);
    pooled.fp_le.assign(static_cast<std::size_t>(args.max_distance) + 1, 0);
    std::size_t paired = 0;
    for (const auto& [stem, path] : preds) {
        auto gt_it = gts.find(stem);
        if (gt_it == gts.end()) continue;
        BinaryMask pred = load_mask_png(path);
        BinaryMask gt = load_mask_png(gt_it->second);
        if (pred.height != gt.height || pred.width != gt.width) {
            problems.push_back("dimension mismatch for " + stem + ": prediction " +
                               std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                               ", ground truth " + std::to_string(gt.width) + "x" +
                               std::to_string(gt.height));
            continue;
        }
        pooled += boundary_error_cdf(pred, gt, args.max_distance);
        ++paired;
    }
    if (!problems.empty()) {
        std::string message = "prediction/ground-truth pairing failed:";
        for (const std::string& p : problems) message += "\n  " + p;
        fail(ErrorKind::io, message);
    }
    require(paired > 0, ErrorKind::io, "no prediction/ground-truth pairs found");

    write_cdf_csv(pooled, args.cdf);
    std::cout << "pooled " << paired << " image pairs: " << pooled.fn_total
              << " false negatives, " << pooled.fp_total << " false positives\n";
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();

    CLI::App app{"adversarial shadow attenuation toolkit"};
    app.require_subcommand(1);

    auto synth_args = std::make_shared<SynthArgs>();
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic shadow dataset");
    synth_cmd->add_option("--out", synth_args->out, "output dataset directory")->required();
    synth_cmd->add_option("--count", synth_args->spec.count, "number of samples")->required();
    synth_cmd->add_option("--size", synth_args->spec.size, "square image size");
    synth_cmd->add_option("--seed", synth_args->spec.seed, "dataset seed");
    synth_cmd->add_option("--k-lo", synth_args->spec.k_lo, "lower bound of the core k factor");
    synth_cmd->add_option("--k-hi", synth_args->spec.k_hi, "upper bound of the core k factor");
    synth_cmd->add_option("--penumbra", synth_args->spec.penumbra_sigma,
                          "penumbra blur sigma in pixels");
    synth_cmd->add_option("--texture", synth_args->texture,
                          "reflectance texture: flat, checker or smooth-noise");
    synth_cmd->callback([synth_args] { run_synth(*synth_args); });

    auto train_args = std::make_shared<TrainArgs>();
    CLI::App* train_cmd = app.add_subcommand("train", "train the attenuator/detector pair");
    train_cmd->add_option("--data", train_args->data, "dataset directory (images/ and masks/)")
        ->required();
    train_cmd->add_option("--config", train_args->config, "run configuration JSON")->required();
    train_cmd->add_option("--out", train_args->out, "run output directory")->required();
    train_cmd->add_option("--resume", train_args->resume, "snapshot directory to resume from");
    train_cmd->callback([train_args] { run_train(*train_args); });

    auto detect_args = std::make_shared<DetectArgs>();
    CLI::App* detect_cmd = app.add_subcommand("detect", "predict a shadow mask for one image");
    detect_cmd->add_option("--model", detect_args->model, "detector checkpoint")->required();
    detect_cmd->add_option("--image", detect_args->image, "input PNG")->required();
    detect_cmd->add_option("--out", detect_args->out, "output mask PNG")->required();
    detect_cmd->add_option("--threshold", detect_args->threshold, "binarization threshold");
    detect_cmd->add_option("--prob", detect_args->prob, "also write the probability map PNG");
    detect_cmd->add_option("--net-size", detect_args->net_size, "network input size");
    detect_cmd->callback([detect_args] { run_detect(*detect_args); });

    auto att_args = std::make_shared<AttenuateArgs>();
    CLI::App* att_cmd = app.add_subcommand("attenuate", "attenuate the shadow in one image");
    att_cmd->add_option("--model", att_args->model, "attenuator checkpoint")->required();
    att_cmd->add_option("--image", att_args->image, "input PNG")->required();
    att_cmd->add_option("--mask", att_args->mask, "shadow mask PNG")->required();
    att_cmd->add_option("--out", att_args->out, "output image PNG")->required();
    att_cmd->add_option("--net-size", att_args->net_size, "network input size");
    att_cmd->callback([att_args] { run_attenuate(*att_args); });

    auto eval_args = std::make_shared<EvalArgs>();
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a detector on a dataset");
    eval_cmd->add_option("--model", eval_args->model, "detector checkpoint")->required();
    eval_cmd->add_option("--data", eval_args->data, "dataset directory (images/ and masks/)")
        ->required();
    eval_cmd->add_option("--report", eval_args->report, "output report JSON")->required();
    eval_cmd->add_option("--threshold", eval_args->threshold, "binarization threshold");
    eval_cmd->add_option("--net-size", eval_args->net_size, "network input size");
    eval_cmd->callback([eval_args] { run_eval(*eval_args); });

    auto an_args = std::make_shared<AnalyzeArgs>();
    CLI::App* an_cmd =
        app.add_subcommand("analyze", "boundary-distance error CDF over prediction/truth pairs");
    an_cmd->add_option("--pred-dir", an_args->pred_dir, "predicted mask directory")->required();
    an_cmd->add_option("--gt-dir", an_args->gt_dir, "ground-truth mask directory")->required();
    an_cmd->add_option("--cdf", an_args->cdf, "output CSV path")->required();
    an_cmd->add_option("--max-distance", an_args->max_distance, "largest tracked distance");
    an_cmd->callback([an_args] { run_analyze(*an_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
