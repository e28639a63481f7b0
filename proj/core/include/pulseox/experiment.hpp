#pragma once

#include <filesystem>
#include <string>

#include "pulseox/model.hpp"
#include "pulseox/training.hpp"

namespace pulseox::io {

struct SplitSpec {
  std::string kind = "subject";  // "subject", "kfold" or "loso"
  double test_fraction = 0.2;
  std::size_t k = 5;
  std::uint64_t seed = 0;
};

// One experiment = data location + model + training recipe + split. Stored
// as a single human-readable JSON file.
struct ExperimentConfig {
  train::TrainConfig train;
  nn::ModelConfig model;
  SplitSpec split;
  std::filesystem::path sessions_dir;
  std::filesystem::path out_dir;

  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Referenced input paths must exist before a run starts.
  void validate_paths() const;
};

}  // namespace pulseox::io
