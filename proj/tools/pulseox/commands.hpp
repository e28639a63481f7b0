#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pulseox::cli {

struct SynthOptions {
  std::string config_path;  // optional JSON corpus spec
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

struct PreprocessOptions {
  std::vector<std::string> inputs;
  std::string out_dir;
  double fs_target = 25.0;
};

struct CalibOptions {
  std::string config_path;
  std::string out_dir;  // overrides the config's out_dir when set
  std::optional<std::uint64_t> seed;
};

struct TrainOptions {
  std::string config_path;
  std::string out_dir;
  std::string init_checkpoint;  // finetune only
  std::optional<std::uint64_t> seed;
};

struct PredictOptions {
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::string out_dir;
  std::string use = "auto";  // auto | model | calib
};

struct EvaluateOptions {
  std::vector<std::string> inputs;
  std::string out_dir;
};

int run_synth(const SynthOptions& opts);
int run_preprocess(const PreprocessOptions& opts);
int run_calib(const CalibOptions& opts);
int run_pretrain(const TrainOptions& opts);
int run_finetune(const TrainOptions& opts);
int run_predict(const PredictOptions& opts);
int run_evaluate(const EvaluateOptions& opts);

}  // namespace pulseox::cli
