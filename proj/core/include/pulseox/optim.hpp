#pragma once

#include "pulseox/model.hpp"

namespace pulseox::nn {

struct MseResult {
  double loss = 0.0;
  Tensor grad;  // dL/dpred, same shape as pred
};

// Mean squared error over the batch, with its gradient 2(pred - target)/B.
MseResult mse_loss(const Tensor& pred, const Tensor& target);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates, laid out exactly like the parameters.
struct AdamState {
  ModelParams m;
  ModelParams v;
  std::uint64_t step = 0;

  static AdamState init(const ModelParams& params);
};

// Bias-corrected Adam update. Only parameter groups whose trainable flag is
// set move; frozen groups keep both their values and their moments.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const AdamConfig& cfg = {});

}  // namespace pulseox::nn
