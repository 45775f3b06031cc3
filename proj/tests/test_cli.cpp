#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <doctest.h>

#include "shadowad/common.hpp"
#include "shadowad/evaluation.hpp"
#include "shadowad/png_io.hpp"
#include "shadowad/run_config.hpp"
#include "shadowad/synth.hpp"
#include "test_util.hpp"

using namespace shadowad;
namespace fs = std::filesystem;

namespace {

const char* bin_path() {
    if (const char* env = std::getenv("SHADOWAD_BIN")) return env;
    return SHADOWAD_BIN_PATH;
}

// Runs the CLI as a subprocess; output goes to capture (or /dev/null).
int run_cli(const std::string& args, const fs::path& capture = {}) {
    std::string cmd = std::string(bin_path()) + " " + args;
    cmd += capture.empty() ? " >/dev/null 2>&1" : " >" + capture.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    REQUIRE(out.good());
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

// The tiny config used for subprocess training runs: small enough that the
// whole pipeline finishes in seconds.
const char* kTinyConfig = R"({
  "schema_version": 1,
  "train": { "batch_size": 2, "iterations": 2, "seed": 5, "log_every": 1 },
  "a_net": { "depth": 2, "base_channels": 4 },
  "d_net": { "depth": 2, "base_channels": 4 }
})";

}  // namespace

TEST_CASE("run config defaults survive a serialization round trip") {
    cli::RunConfig defaults;
    std::string text = cli::run_config_to_json(defaults);
    cli::RunConfig parsed = cli::run_config_from_json(text);
    CHECK(cli::run_config_to_json(parsed) == text);
    CHECK(parsed.a_net == nets::UNetConfig::attenuator_desk());
    CHECK(parsed.d_net == nets::UNetConfig::detector_desk());
    CHECK(parsed.train.batch_size == defaults.train.batch_size);
    CHECK(parsed.train.weights.nsd == defaults.train.weights.nsd);
    CHECK(parsed.train.adam_a.lr == defaults.train.adam_a.lr);

    // A minimal document gets every default injected.
    cli::RunConfig minimal = cli::run_config_from_json("{\"schema_version\": 1}");
    CHECK(cli::run_config_to_json(minimal) == text);
}

TEST_CASE("run config names every rejected key and type") {
    auto message_of = [](const std::string& text) {
        try {
            cli::run_config_from_json(text);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::validation);
            return std::string(e.what());
        }
        FAIL("expected a validation error");
        return std::string();
    };

    CHECK(contains(message_of("{}"), "missing required key \"schema_version\""));
    CHECK(contains(message_of("{\"schema_version\": 2}"), "schema_version must be 1"));
    CHECK(contains(message_of("{\"schema_version\": 1, \"extra\": 3}"),
                   "unknown key \"extra\" in the document root"));
    CHECK(contains(message_of("{\"schema_version\": 1, \"train\": {\"batchsize\": 2}}"),
                   "unknown key \"batchsize\" in train"));
    CHECK(contains(
        message_of("{\"schema_version\": 1, \"train\": {\"weights\": {\"lambda\": 1}}}"),
        "unknown key \"lambda\" in train.weights"));
    CHECK(contains(message_of("{\"schema_version\": 1, \"train\": {\"adam_a\": {\"rate\": 1}}}"),
                   "unknown key \"rate\" in train.adam_a"));
    CHECK(contains(message_of("{\"schema_version\": 1, \"a_net\": {\"width\": 8}}"),
                   "unknown key \"width\" in a_net"));
    CHECK(contains(message_of("{\"schema_version\": 1, \"train\": {\"batch_size\": \"8\"}}"),
                   "train.batch_size must be an integer"));
    CHECK(contains(message_of("{\"schema_version\": 1, \"train\": {\"seed\": -1}}"),
                   "train.seed must be a nonnegative integer"));
    CHECK(contains(message_of("{\"schema_version\": 1, \"train\": {\"weights\": {\"ph\": \"x\"}}}"),
                   "train.weights.ph must be a number"));
    CHECK(contains(message_of("{\"schema_version\": 1, \"train\": 3}"),
                   "train must be an object"));
    CHECK(contains(message_of("not json"), "parse error"));

    // Structurally valid documents still go through semantic validation.
    CHECK_THROWS_AS(
        cli::run_config_from_json("{\"schema_version\": 1, \"train\": {\"batch_size\": 0}}"),
        Error);
    CHECK_THROWS_AS(cli::run_config_from_json("{\"schema_version\": 1, \"a_net\": {\"depth\": 0}}"),
                    Error);
}

TEST_CASE("shipped desk config is canonical") {
    fs::path path = SHADOWAD_DESK_CONFIG_PATH;
    cli::RunConfig config = cli::load_run_config(path);
    CHECK(config.train.batch_size == 8);
    CHECK(config.train.iterations == 2000);
    CHECK(config.a_net == nets::UNetConfig::attenuator_desk());
    CHECK(config.d_net == nets::UNetConfig::detector_desk());
    // The file is byte-identical to its own echo, so a run directory's
    // config.json matches the config that produced it.
    CHECK(cli::run_config_to_json(config) == read_file(path));
}

TEST_CASE("synth command is deterministic and validates its arguments") {
    testutil::TempDir tmp;
    std::string base = "synth --count 3 --size 16 --seed 7 --out ";
    REQUIRE(run_cli(base + (tmp.path / "one").string()) == 0);
    REQUIRE(run_cli(base + (tmp.path / "two").string()) == 0);
    for (const char* rel : {"images/0001.png", "masks/0001.png", "manifest.json"})
        CHECK(read_file(tmp.path / "one" / rel) == read_file(tmp.path / "two" / rel));

    CHECK(run_cli("synth --count 0 --out " + (tmp.path / "bad").string()) == 2);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("--bogus") == 2);
    CHECK(run_cli("synth --count 1 --texture marble --out " + (tmp.path / "bad").string()) == 2);
}

TEST_CASE("trained artifacts drive detect, attenuate and eval") {
    testutil::TempDir tmp;
    fs::path ds = tmp.path / "ds";
    fs::path run = tmp.path / "run";
    REQUIRE(run_cli("synth --count 4 --size 16 --seed 3 --out " + ds.string()) == 0);
    write_file(tmp.path / "cfg.json", kTinyConfig);

    REQUIRE(run_cli("train --data " + ds.string() + " --config " +
                    (tmp.path / "cfg.json").string() + " --out " + run.string()) == 0);
    CHECK(fs::exists(run / "a_final.ckpt"));
    CHECK(fs::exists(run / "d_final.ckpt"));
    CHECK(fs::exists(run / "config.json"));
    std::string metrics = read_file(run / "metrics.csv");
    CHECK(contains(metrics, "iteration,loss_A"));
    CHECK(contains(metrics, "\n1,"));
    CHECK(contains(metrics, "\n2,"));

    // The echoed config parses back to the same document.
    std::string echoed = read_file(run / "config.json");
    CHECK(cli::run_config_to_json(cli::run_config_from_json(echoed)) == echoed);

    fs::path image = ds / "images" / "0000.png";
    fs::path mask = ds / "masks" / "0000.png";
    std::string d_model = (run / "d_final.ckpt").string();
    std::string a_model = (run / "a_final.ckpt").string();

    fs::path pred = tmp.path / "pred.png";
    fs::path prob = tmp.path / "prob.png";
    REQUIRE(run_cli("detect --model " + d_model + " --image " + image.string() + " --out " +
                    pred.string() + " --prob " + prob.string() + " --net-size 16") == 0);
    BinaryMask pred_mask = load_mask_png(pred);
    CHECK(pred_mask.height == 16);
    CHECK(pred_mask.width == 16);
    CHECK(fs::exists(prob));

    fs::path att = tmp.path / "att.png";
    REQUIRE(run_cli("attenuate --model " + a_model + " --image " + image.string() + " --mask " +
                    mask.string() + " --out " + att.string() + " --net-size 16") == 0);
    Image att_img = load_image_png(att);
    CHECK(att_img.height == 16);
    CHECK(att_img.width == 16);

    // Role gates: each command refuses the other network's checkpoint.
    fs::path sink = tmp.path / "sink.png";
    CHECK(run_cli("detect --model " + a_model + " --image " + image.string() + " --out " +
                  sink.string() + " --net-size 16") == 5);
    CHECK(run_cli("attenuate --model " + d_model + " --image " + image.string() + " --mask " +
                  mask.string() + " --out " + sink.string() + " --net-size 16") == 5);

    fs::path report = tmp.path / "report.json";
    REQUIRE(run_cli("eval --model " + d_model + " --data " + ds.string() + " --report " +
                    report.string() + " --net-size 16") == 0);
    std::string report_text = read_file(report);
    CHECK(contains(report_text, "\"ber\""));
    CHECK(contains(report_text, "\"images\""));

    // A mask of the wrong size is a validation error, not an I/O one.
    REQUIRE(run_cli("synth --count 1 --size 32 --seed 1 --out " + (tmp.path / "big").string()) ==
            0);
    CHECK(run_cli("attenuate --model " + a_model + " --image " + image.string() + " --mask " +
                  (tmp.path / "big" / "masks" / "0000.png").string() + " --out " + sink.string() +
                  " --net-size 16") == 2);
}

TEST_CASE("config problems surface as exit 2 naming the problem") {
    testutil::TempDir tmp;
    fs::path ds = tmp.path / "ds";
    REQUIRE(run_cli("synth --count 2 --size 16 --seed 3 --out " + ds.string()) == 0);

    auto train_error = [&](const std::string& config_text) {
        write_file(tmp.path / "bad.json", config_text);
        fs::path log = tmp.path / "err.txt";
        int code = run_cli("train --data " + ds.string() + " --config " +
                               (tmp.path / "bad.json").string() + " --out " +
                               (tmp.path / "out").string(),
                           log);
        CHECK(code == 2);
        return read_file(log);
    };

    CHECK(contains(train_error("{\"train\": {}}"), "schema_version"));
    CHECK(contains(train_error("{\"schema_version\": 1, \"train\": {\"batchsize\": 2}}"),
                   "batchsize"));

    // Missing config file is an I/O failure instead.
    CHECK(run_cli("train --data " + ds.string() + " --config " +
                  (tmp.path / "nowhere.json").string() + " --out " + (tmp.path / "out").string()) ==
          3);
}

TEST_CASE("analyze pools boundary statistics and reports pairing problems") {
    testutil::TempDir tmp;
    fs::path ds = tmp.path / "ds";
    REQUIRE(run_cli("synth --count 3 --size 16 --seed 11 --out " + ds.string()) == 0);
    fs::path preds = tmp.path / "preds";
    fs::path gts = tmp.path / "gts";
    fs::create_directories(preds);
    fs::create_directories(gts);

    // pred != gt for both stems: the CLI must match a hand-pooled CDF.
    fs::copy_file(ds / "masks" / "0000.png", preds / "a.png");
    fs::copy_file(ds / "masks" / "0001.png", gts / "a.png");
    fs::copy_file(ds / "masks" / "0001.png", preds / "b.png");
    fs::copy_file(ds / "masks" / "0002.png", gts / "b.png");

    fs::path csv = tmp.path / "cdf.csv";
    REQUIRE(run_cli("analyze --pred-dir " + preds.string() + " --gt-dir " + gts.string() +
                    " --cdf " + csv.string() + " --max-distance 6") == 0);

    BoundaryErrorCdf pooled;
    pooled.max_distance = 6;
    pooled.fn_le.assign(7, 0);
    pooled.fp_le.assign(7, 0);
    for (const char* stem : {"a", "b"})
        pooled += boundary_error_cdf(load_mask_png(preds / (std::string(stem) + ".png")),
                                     load_mask_png(gts / (std::string(stem) + ".png")), 6);
    fs::path expected = tmp.path / "expected.csv";
    write_cdf_csv(pooled, expected);
    CHECK(read_file(csv) == read_file(expected));

    // Perfect predictions leave both curves empty: marker rows, exit 0.
    fs::copy_file(gts / "a.png", preds / "a.png", fs::copy_options::overwrite_existing);
    fs::copy_file(gts / "b.png", preds / "b.png", fs::copy_options::overwrite_existing);
    REQUIRE(run_cli("analyze --pred-dir " + preds.string() + " --gt-dir " + gts.string() +
                    " --cdf " + csv.string() + " --max-distance 6") == 0);
    CHECK(contains(read_file(csv), "nan"));

    // Any unpaired stem fails the whole command, naming every problem.
    fs::copy_file(ds / "masks" / "0002.png", preds / "orphan.png");
    fs::path log = tmp.path / "err.txt";
    CHECK(run_cli("analyze --pred-dir " + preds.string() + " --gt-dir " + gts.string() +
                  " --cdf " + csv.string(),
                  log) == 3);
    CHECK(contains(read_file(log), "prediction without ground truth: orphan"));
}
