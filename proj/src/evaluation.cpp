#include "shadowad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "shadowad/common.hpp"
#include "shadowad/morphology.hpp"
#include "shadowad/tensor.hpp"

namespace shadowad {

BinaryMask binarize(const PredictionMap& pred, float threshold) {
    require(threshold > 0.0f && threshold < 1.0f, ErrorKind::validation,
            "binarize: threshold must lie in (0,1)");
    BinaryMask out = BinaryMask::zeros(pred.height, pred.width);
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        out.data[i] = pred.data[i] > threshold ? 1 : 0;
    return out;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
    tp += other.tp;
    tn += other.tn;
    fp += other.fp;
    fn += other.fn;
    return *this;
}

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt) {
    require(pred.height == gt.height && pred.width == gt.width, ErrorKind::validation,
            "confusion_counts: shape mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
        if (g)
            (p ? c.tp : c.fn) += 1;
        else
            (p ? c.fp : c.tn) += 1;
    }
    return c;
}

double shadow_error(const ConfusionCounts& counts) {
    require(counts.tp + counts.fn > 0, ErrorKind::validation,
            "shadow_error: no shadow pixels in ground truth");
    return 100.0 * double(counts.fn) / double(counts.tp + counts.fn);
}

double nonshadow_error(const ConfusionCounts& counts) {
    require(counts.tn + counts.fp > 0, ErrorKind::validation,
            "nonshadow_error: no non-shadow pixels in ground truth");
    return 100.0 * double(counts.fp) / double(counts.tn + counts.fp);
}

double ber(const ConfusionCounts& counts) {
    return 0.5 * (shadow_error(counts) + nonshadow_error(counts));
}

void EvalProtocol::validate() const {
    require(net_size >= 8, ErrorKind::validation, "eval: network size must be >= 8");
    require(threshold > 0.0f && threshold < 1.0f, ErrorKind::validation,
            "eval: threshold must lie in (0,1)");
}

NetPredictor make_detector_predictor(nets::UNet& net) {
    require(net.config().in_channels == 3 && net.config().out_channels == 1,
            ErrorKind::validation, "detector predictor needs a 3-in/1-out network");
    return [&net](const Image& log_input) {
        Tensor x = Tensor::zeros(1, 3, log_input.height, log_input.width);
        std::copy(log_input.data.begin(), log_input.data.end(), x.v.begin());
        Tensor y = net.forward(x, nets::RunMode::infer);
        PredictionMap out = PredictionMap::zeros(log_input.height, log_input.width);
        std::copy(y.v.begin(), y.v.end(), out.data.begin());
        return out;
    };
}

EvalReport evaluate_dataset(const NetPredictor& predictor,
                            const std::vector<synth::Sample>& samples,
                            const EvalProtocol& protocol) {
    protocol.validate();
    require(!samples.empty(), ErrorKind::validation, "eval: empty dataset");
    require(static_cast<bool>(predictor), ErrorKind::validation, "eval: null predictor");

    EvalReport report;
    report.images.resize(samples.size());

    // Sequential over images: predictors may be stateful (the network's
    // kernels parallelize internally), and aggregation order stays fixed.
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const synth::Sample& s = samples[i];
        Image resized = resize_image(s.image, protocol.net_size, protocol.net_size);
        PredictionMap pred = predictor(to_log_space(resized));
        require(pred.height == protocol.net_size && pred.width == protocol.net_size,
                ErrorKind::validation, "eval: predictor returned wrong dimensions");
        PredictionMap back = resize_prediction(pred, s.image.height, s.image.width);
        BinaryMask mask = binarize(back, protocol.threshold);

        ImageEval& row = report.images[i];
        char id[16];
        std::snprintf(id, sizeof id, "%04zu", i);
        row.id = id;
        row.counts = confusion_counts(mask, s.mask);
        if (row.counts.tp + row.counts.fn > 0 && row.counts.tn + row.counts.fp > 0)
            row.ber = ber(row.counts);
    }

    for (const ImageEval& row : report.images) report.counts += row.counts;
    report.ber = ber(report.counts);
    report.shadow_error = shadow_error(report.counts);
    report.nonshadow_error = nonshadow_error(report.counts);
    return report;
}

BoundaryErrorCdf& BoundaryErrorCdf::operator+=(const BoundaryErrorCdf& other) {
    require(max_distance == other.max_distance, ErrorKind::validation,
            "cdf pooling: max_distance mismatch");
    for (std::size_t i = 0; i < fn_le.size(); ++i) {
        fn_le[i] += other.fn_le[i];
        fp_le[i] += other.fp_le[i];
    }
    fn_total += other.fn_total;
    fp_total += other.fp_total;
    return *this;
}

std::vector<double> BoundaryErrorCdf::fn_fractions() const {
    std::vector<double> out;
    if (fn_total == 0) return out;
    out.reserve(fn_le.size());
    for (std::int64_t c : fn_le) out.push_back(double(c) / double(fn_total));
    return out;
}

std::vector<double> BoundaryErrorCdf::fp_fractions() const {
    std::vector<double> out;
    if (fp_total == 0) return out;
    out.reserve(fp_le.size());
    for (std::int64_t c : fp_le) out.push_back(double(c) / double(fp_total));
    return out;
}

BoundaryErrorCdf boundary_error_cdf(const BinaryMask& pred, const BinaryMask& gt,
                                    int max_distance) {
    require(pred.height == gt.height && pred.width == gt.width, ErrorKind::validation,
            "boundary_error_cdf: shape mismatch");
    require(max_distance >= 0, ErrorKind::validation,
            "boundary_error_cdf: max_distance must be >= 0");

    BoundaryErrorCdf cdf;
    cdf.max_distance = max_distance;
    cdf.fn_le.assign(static_cast<std::size_t>(max_distance) + 1, 0);
    cdf.fp_le.assign(static_cast<std::size_t>(max_distance) + 1, 0);

    const DistanceMap dist = distance_to_boundary(gt);
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            const bool p = pred.at(y, x), g = gt.at(y, x);
            if (p == g) continue;
            std::vector<std::int64_t>& le = g ? cdf.fn_le : cdf.fp_le;
            (g ? cdf.fn_total : cdf.fp_total) += 1;
            const float d = dist.at(y, x);
            // d <= t is exact: d is the float of a double sqrt of an exact
            // integer square, far from any integer it does not equal.
            for (int t = max_distance; t >= 0 && d <= float(t); --t) le[static_cast<std::size_t>(t)] += 1;
        }
    return cdf;
}

void write_eval_report(const EvalReport& report, const EvalProtocol& protocol,
                       const std::filesystem::path& path) {
    nlohmann::json j;
    j["protocol"] = {{"net_size", protocol.net_size},
                     {"threshold", protocol.threshold},
                     {"aggregation", "count-aggregated"}};
    j["aggregate"] = {{"tp", report.counts.tp},   {"tn", report.counts.tn},
                      {"fp", report.counts.fp},   {"fn", report.counts.fn},
                      {"ber", report.ber},        {"shadow_error", report.shadow_error},
                      {"nonshadow_error", report.nonshadow_error}};
    j["images"] = nlohmann::json::array();
    for (const ImageEval& row : report.images) {
        nlohmann::json r = {{"id", row.id},
                            {"tp", row.counts.tp},
                            {"tn", row.counts.tn},
                            {"fp", row.counts.fp},
                            {"fn", row.counts.fn}};
        if (row.ber) r["ber"] = *row.ber;
        j["images"].push_back(std::move(r));
    }
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot write report: " + path.string());
    out << j.dump(2) << "\n";
    require(out.good(), ErrorKind::io, "report write failed: " + path.string());
}

void write_cdf_csv(const BoundaryErrorCdf& cdf, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot write cdf: " + path.string());
    out << "distance,fn_cum,fp_cum\n";
    const std::vector<double> fn = cdf.fn_fractions();
    const std::vector<double> fp = cdf.fp_fractions();
    for (int t = 0; t <= cdf.max_distance; ++t) {
        out << t << ",";
        if (fn.empty())
            out << "nan";
        else
            out << fn[static_cast<std::size_t>(t)];
        out << ",";
        if (fp.empty())
            out << "nan";
        else
            out << fp[static_cast<std::size_t>(t)];
        out << "\n";
    }
    require(out.good(), ErrorKind::io, "cdf write failed: " + path.string());
}

}  // namespace shadowad
