#pragma once

#include <filesystem>
#include <optional>

#include "pulseox/calib.hpp"
#include "pulseox/model.hpp"

namespace pulseox::io {

// Versioned checkpoint container. Either section may be absent, but not
// both. Binary layout:
//   8-byte magic "POXCKPT\n", uint32 LE version, uint64 LE JSON length,
//   JSON metadata (model config, trainable flags, parameter manifest,
//   optional calibration), then the named arrays as little-endian float64
//   in manifest order. save/load round trips are bit-exact.
struct Checkpoint {
  std::optional<nn::ModelParams> model;
  std::optional<calib::QuadCalib> quad;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pulseox::io
