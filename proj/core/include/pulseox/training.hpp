#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pulseox/model.hpp"
#include "pulseox/optim.hpp"
#include "pulseox/rng.hpp"
#include "pulseox/segmentation.hpp"

namespace pulseox::train {

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch = 256;
  std::size_t pretrain_epochs = 100;
  std::size_t finetune_epochs = 150;
  std::size_t finetune_stage1_epochs = 50;  // FC-only phase
  std::size_t bins = 10;
  std::uint64_t seed = 0;
  bool shuffle = true;
  // Weighted sampling always applies to fine-tuning; pretraining uses it
  // only when this is set.
  bool weighted_pretrain = false;

  void validate() const;
};

struct SplitPlan {
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::vector<std::vector<std::string>> folds;
};

// Subject-level split, test share = round(n * test_fraction), at least 1.
SplitPlan subject_split(std::vector<std::string> subjects, std::uint64_t seed,
                        double test_fraction = 0.2);

// k subject-disjoint folds with sizes differing by at most one.
std::vector<std::vector<std::string>> kfold(std::vector<std::string> subjects,
                                            std::size_t k, std::uint64_t seed);

// One plan per subject; that subject is the test set exactly once.
std::vector<SplitPlan> loso(std::vector<std::string> subjects);

// Inverse-bin-frequency index sampler over equal-width label bins.
class WeightedSampler {
 public:
  WeightedSampler(std::span<const double> labels, std::size_t bins,
                  std::uint64_t seed, double lo = 70.0, double hi = 100.0);

  std::size_t draw();
  double weight(std::size_t index) const { return weights_[index]; }

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  Rng rng_;
};

// Segments packed into batched tensors.
struct Dataset {
  Tensor x;  // (N, T, C)
  Tensor y;  // (N, 1)
  std::vector<std::string> subject;
  std::vector<double> t_end;

  std::size_t size() const { return subject.size(); }
  std::vector<double> labels() const;
  std::vector<std::string> unique_subjects() const;

  static Dataset from_segments(std::span<const seg::SegmentSet> sets);
  Dataset subset_by_subjects(const std::set<std::string>& keep) const;
};

struct EpochStats {
  std::size_t epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  double mae = 0.0;
};

struct TrainResult {
  nn::ModelParams params;
  std::vector<EpochStats> history;
  // 1-based epoch with the best validation MAE; 0 when no validation set.
  // Recorded only; the returned params are always the final epoch's.
  std::size_t best_epoch = 0;
  // Total optimizer steps taken (ceil(N/batch) per epoch).
  std::size_t adam_steps = 0;
  // Snapshot at the stage-1/stage-2 boundary (finetune only); lets callers
  // verify the freezing contract.
  std::optional<nn::ModelParams> stage1_params;
};

// Trains all groups from a fresh seeded initialization.
TrainResult pretrain(const Dataset& train_data, const Dataset* val,
                     const TrainConfig& cfg, const nn::ModelConfig& model_cfg);

// Two-stage transfer: FC-only for finetune_stage1_epochs, then BiLSTM + FC
// jointly for the remainder. Attention stays frozen throughout and weighted
// sampling is always on.
TrainResult finetune(const nn::ModelParams& pretrained,
                     const Dataset& train_data, const Dataset* val,
                     const TrainConfig& cfg);

// Raw (unclamped) model outputs over a dataset, evaluated in batches.
std::vector<double> predict_raw(const nn::ModelParams& params,
                                const Dataset& data, std::size_t batch = 256);

void write_history_csv(const std::filesystem::path& path,
                       std::span<const EpochStats> history);

}  // namespace pulseox::train
