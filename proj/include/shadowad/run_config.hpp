#pragma once

#include <filesystem>
#include <string>

#include "shadowad/trainer.hpp"
#include "shadowad/unet.hpp"

namespace shadowad::cli {

// Everything a training run needs, as one JSON document. The nets are
// configured by role (depth and width only); the rest of their shape is
// fixed by what an attenuator/detector is.
struct RunConfig {
    train::TrainConfig train;
    nets::UNetConfig a_net = nets::UNetConfig::attenuator_desk();
    nets::UNetConfig d_net = nets::UNetConfig::detector_desk();
};

// schema_version is required (and must be 1); every other key is optional
// and defaults as in RunConfig{}. Unknown keys are rejected by name so a
// typo cannot silently fall back to a default.
RunConfig run_config_from_json(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// The full document with every default made explicit, for echoing into the
// run directory; parsing it back yields the same configuration.
std::string run_config_to_json(const RunConfig& config);

}  // namespace shadowad::cli
