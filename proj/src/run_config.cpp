#include "shadowad/run_config.hpp"

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "shadowad/common.hpp"

namespace shadowad::cli {
namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

void reject_unknown_keys(const json& node, const std::string& where,
                         std::initializer_list<const char*> allowed) {
    for (const auto& item : node.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) known = true;
        require(known, ErrorKind::validation,
                "config: unknown key \"" + item.key() + "\" in " + where);
    }
}

const json* subobject(const json& node, const std::string& where, const char* key) {
    if (!node.contains(key)) return nullptr;
    require(node.at(key).is_object(), ErrorKind::validation,
            "config: " + where + "." + key + " must be an object");
    return &node.at(key);
}

void read_double(const json& node, const std::string& where, const char* key, double& out) {
    if (!node.contains(key)) return;
    const json& v = node.at(key);
    require(v.is_number(), ErrorKind::validation,
            "config: " + where + "." + key + " must be a number");
    out = v.get<double>();
}

void read_int(const json& node, const std::string& where, const char* key, int& out) {
    if (!node.contains(key)) return;
    const json& v = node.at(key);
    require(v.is_number_integer(), ErrorKind::validation,
            "config: " + where + "." + key + " must be an integer");
    out = v.get<int>();
}

void read_seed(const json& node, const std::string& where, const char* key, std::uint64_t& out) {
    if (!node.contains(key)) return;
    const json& v = node.at(key);
    require(v.is_number_integer() && (v.is_number_unsigned() || v.get<std::int64_t>() >= 0),
            ErrorKind::validation, "config: " + where + "." + key + " must be a nonnegative integer");
    out = v.get<std::uint64_t>();
}

void read_bool(const json& node, const std::string& where, const char* key, bool& out) {
    if (!node.contains(key)) return;
    const json& v = node.at(key);
    require(v.is_boolean(), ErrorKind::validation,
            "config: " + where + "." + key + " must be a boolean");
    out = v.get<bool>();
}

void read_adam(const json& node, const std::string& where, nets::AdamConfig& out) {
    reject_unknown_keys(node, where, {"lr", "beta1", "beta2", "eps"});
    read_double(node, where, "lr", out.lr);
    read_double(node, where, "beta1", out.beta1);
    read_double(node, where, "beta2", out.beta2);
    read_double(node, where, "eps", out.eps);
}

nets::UNetConfig read_net(const json& node, const std::string& where, bool attenuator) {
    reject_unknown_keys(node, where, {"depth", "base_channels"});
    int depth = attenuator ? nets::UNetConfig::attenuator_desk().depth
                           : nets::UNetConfig::detector_desk().depth;
    int base = attenuator ? nets::UNetConfig::attenuator_desk().base_channels
                          : nets::UNetConfig::detector_desk().base_channels;
    read_int(node, where, "depth", depth);
    read_int(node, where, "base_channels", base);
    return attenuator ? nets::UNetConfig::attenuator(depth, base)
                      : nets::UNetConfig::detector(depth, base);
}

}  // namespace

RunConfig run_config_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrorKind::validation, std::string("config: parse error: ") + e.what());
    }
    require(doc.is_object(), ErrorKind::validation, "config: document must be a JSON object");
    reject_unknown_keys(doc, "the document root", {"schema_version", "train", "a_net", "d_net"});
    require(doc.contains("schema_version"), ErrorKind::validation,
            "config: missing required key \"schema_version\"");
    require(doc.at("schema_version").is_number_integer() && doc.at("schema_version") == 1,
            ErrorKind::validation, "config: schema_version must be 1");

    RunConfig config;
    if (const json* t = subobject(doc, "the document root", "train")) {
        reject_unknown_keys(*t, "train",
                            {"batch_size", "iterations", "seed", "log_every", "checkpoint_every",
                             "band_radius", "train_attenuator", "weights", "adam_a", "adam_d"});
        read_int(*t, "train", "batch_size", config.train.batch_size);
        read_int(*t, "train", "iterations", config.train.iterations);
        read_seed(*t, "train", "seed", config.train.seed);
        read_int(*t, "train", "log_every", config.train.log_every);
        read_int(*t, "train", "checkpoint_every", config.train.checkpoint_every);
        read_int(*t, "train", "band_radius", config.train.band_radius);
        read_bool(*t, "train", "train_attenuator", config.train.train_attenuator);
        if (const json* w = subobject(*t, "train", "weights")) {
            reject_unknown_keys(*w, "train.weights", {"nsd", "sd", "ph", "real", "adv0", "epsilon"});
            read_double(*w, "train.weights", "nsd", config.train.weights.nsd);
            read_double(*w, "train.weights", "sd", config.train.weights.sd);
            read_double(*w, "train.weights", "ph", config.train.weights.ph);
            read_double(*w, "train.weights", "real", config.train.weights.real);
            read_double(*w, "train.weights", "adv0", config.train.weights.adv0);
            read_double(*w, "train.weights", "epsilon", config.train.weights.epsilon);
        }
        if (const json* a = subobject(*t, "train", "adam_a")) read_adam(*a, "train.adam_a", config.train.adam_a);
        if (const json* a = subobject(*t, "train", "adam_d")) read_adam(*a, "train.adam_d", config.train.adam_d);
    }
    if (const json* n = subobject(doc, "the document root", "a_net"))
        config.a_net = read_net(*n, "a_net", true);
    if (const json* n = subobject(doc, "the document root", "d_net"))
        config.d_net = read_net(*n, "d_net", false);

    config.train.validate();
    config.a_net.validate();
    config.d_net.validate();
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return run_config_from_json(ss.str());
}

std::string run_config_to_json(const RunConfig& config) {
    ordered doc;
    doc["schema_version"] = 1;
    ordered& t = doc["train"];
    t["batch_size"] = config.train.batch_size;
    t["iterations"] = config.train.iterations;
    t["seed"] = config.train.seed;
    t["log_every"] = config.train.log_every;
    t["checkpoint_every"] = config.train.checkpoint_every;
    t["band_radius"] = config.train.band_radius;
    t["train_attenuator"] = config.train.train_attenuator;
    ordered& w = t["weights"];
    w["nsd"] = config.train.weights.nsd;
    w["sd"] = config.train.weights.sd;
    w["ph"] = config.train.weights.ph;
    w["real"] = config.train.weights.real;
    w["adv0"] = config.train.weights.adv0;
    w["epsilon"] = config.train.weights.epsilon;
    for (const auto& [name, adam] :
         {std::pair<const char*, const nets::AdamConfig&>{"adam_a", config.train.adam_a},
          {"adam_d", config.train.adam_d}}) {
        ordered& a = t[name];
        a["lr"] = adam.lr;
        a["beta1"] = adam.beta1;
        a["beta2"] = adam.beta2;
        a["eps"] = adam.eps;
    }
    doc["a_net"]["depth"] = config.a_net.depth;
    doc["a_net"]["base_channels"] = config.a_net.base_channels;
    doc["d_net"]["depth"] = config.d_net.depth;
    doc["d_net"]["base_channels"] = config.d_net.base_channels;
    return doc.dump(2) + "\n";
}

}  // namespace shadowad::cli
