#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shadowad/image.hpp"
#include "shadowad/synth.hpp"
#include "shadowad/unet.hpp"

namespace shadowad {

// Pixel true iff pred > threshold, strictly.
BinaryMask binarize(const PredictionMap& pred, float threshold = 0.5f);

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& other);
};

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt);

// Per-class error percentages and their mean. Computed multiply-first so
// integer-exact cases come out exact; requires the class present.
double shadow_error(const ConfusionCounts& counts);     // 100*FN/(TP+FN)
double nonshadow_error(const ConfusionCounts& counts);  // 100*FP/(TN+FP)
double ber(const ConfusionCounts& counts);              // mean of the two

struct ImageEval {
    std::string id;
    ConfusionCounts counts;
    std::optional<double> ber;  // absent when ground truth lacks a class
};

struct EvalProtocol {
    int net_size = 64;  // square network input; images are resized to this
    float threshold = 0.5f;

    void validate() const;
};

struct EvalReport {
    ConfusionCounts counts;  // aggregated over the dataset
    double ber = 0.0;
    double shadow_error = 0.0;
    double nonshadow_error = 0.0;
    std::vector<ImageEval> images;
};

// Anything that maps a log-domain image to a same-size prediction; lets
// tests substitute oracles for a trained detector.
using NetPredictor = std::function<PredictionMap(const Image& log_input)>;

// Wraps a detector network (3 in, 1 out) for the evaluation protocol.
NetPredictor make_detector_predictor(nets::UNet& net);

// Per sample: resize to the network size, log transform, predict, resize
// the float prediction back to the original dims, binarize, count.
// Aggregate BER comes from the summed counts, not a mean of per-image BERs.
EvalReport evaluate_dataset(const NetPredictor& predictor,
                            const std::vector<synth::Sample>& samples,
                            const EvalProtocol& protocol);

// Distance-to-boundary histogram of wrongly predicted pixels, FN and FP
// separately, as cumulative counts at integer distances 0..max_distance.
// Totals count every wrong pixel, including those beyond max_distance, so
// fractions end at most 1. Poolable across images via operator+=.
struct BoundaryErrorCdf {
    int max_distance = 0;
    std::vector<std::int64_t> fn_le;  // size max_distance+1
    std::vector<std::int64_t> fp_le;
    std::int64_t fn_total = 0;
    std::int64_t fp_total = 0;

    BoundaryErrorCdf& operator+=(const BoundaryErrorCdf& other);
    // Cumulative fraction at each distance; empty when the class has no
    // wrong pixels at all (the "empty curve" marker).
    std::vector<double> fn_fractions() const;
    std::vector<double> fp_fractions() const;
};

BoundaryErrorCdf boundary_error_cdf(const BinaryMask& pred, const BinaryMask& gt,
                                    int max_distance);

// Artifact writers: report as JSON, curve as CSV (distance, fn_cum, fp_cum;
// "nan" where a class has no wrong pixels).
void write_eval_report(const EvalReport& report, const EvalProtocol& protocol,
                       const std::filesystem::path& path);
void write_cdf_csv(const BoundaryErrorCdf& cdf, const std::filesystem::path& path);

}  // namespace shadowad
