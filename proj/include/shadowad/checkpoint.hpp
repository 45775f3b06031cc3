#pragma once

#include <filesystem>
#include <optional>

#include "shadowad/adam.hpp"
#include "shadowad/unet.hpp"

namespace shadowad::nets {

/*
 * Checkpoint container, little-endian binary:
 *   magic "SHADWNET" | u32 version=1 | u64 config fingerprint
 *   u32 config length | canonical config JSON
 *   u32 tensor count  | tensors in registry order:
 *       u32 name length | name | u32 rank | u64 dims[rank] | f32 payload
 *   u8 has_optimizer  | if set: u64 step | f64 lr beta1 beta2 eps
 *       u32 slot count | per trainable tensor: m then v as f32 payloads
 * Float payloads are raw bits, so save/load round-trips exactly.
 */

void save_checkpoint(const UNet& net, const std::filesystem::path& path,
                     const AdamState* optimizer = nullptr);

struct LoadedCheckpoint {
    UNet net;
    std::optional<AdamState> optimizer;
};

// Verifies magic/version, the fingerprint against the embedded config, and
// every tensor name/shape against the registry the config implies.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace shadowad::nets
