#pragma once

#include <filesystem>

#include "pulseox/segmentation.hpp"

namespace pulseox::io {

// Session file layout, human-inspectable and diff-able:
//   line 1: "PPGSESSION 1"
//   line 2: one-line JSON header (subject, device, fs, kind, wavelengths)
//   "SIGNALS" marker, "t_s,red,ir" header, one CSV row per sample
//   "LABELS" marker, "t_s,spo2" header, one CSV row per label
// Values are written with 17 significant digits so a write/read round trip
// is bit-exact.
void write_session(const std::filesystem::path& path,
                   const seg::PpgSession& session);

seg::PpgSession read_session(const std::filesystem::path& path);

}  // namespace pulseox::io
