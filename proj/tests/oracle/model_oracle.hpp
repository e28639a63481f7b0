#pragma once

// Independent loop-level reimplementation of the regressor used as a test
// oracle. Everything here is written as per-sample scalar loops against the
// raw parameter arrays; it shares no code with the library's batched path.

#include <vector>

#include "pulseox/model.hpp"

namespace oracle {

struct CellOut {
  std::vector<double> h, c;  // hidden each
};

// One LSTM step for a single sample (no batch dimension).
CellOut lstm_cell(const pulseox::nn::GateWeights& w,
                  const std::vector<double>& x_t,
                  const std::vector<double>& h_prev,
                  const std::vector<double>& c_prev);

// Full stacked BiLSTM for one sample: returns (T x F) row-major features.
std::vector<double> bilstm(const pulseox::nn::ModelParams& params,
                           const std::vector<double>& x, std::size_t t_len);

// Attention (or mean) pooling for one sample: (T x F) -> (F).
std::vector<double> attention_pool(const pulseox::nn::ModelParams& params,
                                   const std::vector<double>& hseq,
                                   std::size_t t_len);

// End-to-end prediction for a batch laid out (B, T, C) row-major.
std::vector<double> model_forward(const pulseox::nn::ModelParams& params,
                                  const std::vector<double>& x,
                                  std::size_t batch);

}  // namespace oracle
