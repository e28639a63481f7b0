#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pulseox/tensor.hpp"

namespace pulseox::nn {

struct ModelConfig {
  std::size_t hidden = 64;  // per direction
  std::size_t layers = 2;
  bool use_attention = true;
  std::size_t input_dim = 2;
  std::size_t seq_len = 125;
  std::uint64_t seed = 0;

  // Width of the concatenated bidirectional features.
  std::size_t feature_dim() const { return 2 * hidden; }

  bool operator==(const ModelConfig&) const = default;
};

enum class ParamGroup { Bilstm, Attention, Fc };

struct TrainableFlags {
  bool bilstm = true;
  bool attention = true;
  bool fc = true;

  bool enabled(ParamGroup g) const {
    switch (g) {
      case ParamGroup::Bilstm: return bilstm;
      case ParamGroup::Attention: return attention;
      case ParamGroup::Fc: return fc;
    }
    return false;
  }

  static TrainableFlags all() { return {true, true, true}; }
  static TrainableFlags fc_only() { return {false, false, true}; }
  static TrainableFlags bilstm_and_fc() { return {true, false, true}; }

  bool operator==(const TrainableFlags&) const = default;
};

// One direction of one LSTM layer. Row-vector convention: the gate
// pre-activation at time t is x_t·W + h_{t-1}·U + b.
struct GateWeights {
  Tensor Wi, Wf, Wg, Wo;  // (in, H)
  Tensor Ui, Uf, Ug, Uo;  // (H, H)
  Tensor bi, bf, bg, bo;  // (H)
};

struct LstmLayerParams {
  GateWeights fwd;
  GateWeights bwd;
};

// All weights of the BiLSTM + self-attention + FC regressor. The same
// struct doubles as the gradient container (zeros_like).
struct ModelParams {
  ModelConfig config;
  std::vector<LstmLayerParams> lstm;  // config.layers entries
  Tensor Wq, Wk, Wv;                  // (F, F) with F = feature_dim
  Tensor Wfc;                         // (F, 1)
  Tensor bfc;                         // (1)
  TrainableFlags trainable;

  // Zero tensors with the shapes the config implies.
  static ModelParams shaped(const ModelConfig& config);
  // Xavier-uniform matrices, zero biases except forget bias = 1; seeded.
  static ModelParams init(const ModelConfig& config);
  static ModelParams zeros_like(const ModelParams& other);

  // Canonical fixed-order enumeration ("l1.fwd.Wi", ..., "attn.Wq",
  // "fc.W", "fc.b"). Checkpoints, the optimizer state and the group
  // hashes all follow this order.
  void visit(
      const std::function<void(const std::string&, Tensor&, ParamGroup)>& f);
  void visit(const std::function<void(const std::string&, const Tensor&,
                                      ParamGroup)>& f) const;

  std::uint64_t group_hash(ParamGroup g) const;
};

// ---- forward caches -------------------------------------------------------
// LSTM activations are kept time-major (T, B, H) so each step is one
// contiguous (B, H) block; attention tensors are batch-major (B, T, F).

struct DirCache {
  Tensor xw_i, xw_f, xw_g, xw_o;          // (T, B, H): x·W + b
  Tensor gate_i, gate_f, gate_g, gate_o;  // (T, B, H) post-activation
  Tensor c;                               // (T, B, H)
  Tensor h;                               // (T, B, H)
};

struct LayerCache {
  Tensor input;  // (T, B, in) the layer consumed
  DirCache fwd, bwd;
  Tensor output;  // (T, B, 2H) concatenated directions
};

struct AttentionCache {
  Tensor hseq;  // (B, T, F) final BiLSTM features
  Tensor q, k, v;  // (B, T, F)
  Tensor attn;     // (B, T, T) row-softmax of scaled scores
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  AttentionCache attn;
  Tensor pooled;  // (B, F)
  std::size_t batch = 0;
  bool valid = false;
};

// ---- ops ------------------------------------------------------------------

struct CellResult {
  Tensor h, c;  // (B, H) each
};

struct CellCache {
  Tensor gate_i, gate_f, gate_g, gate_o;  // (B, H) post-activation
  Tensor c;                               // (B, H)
};

// One LSTM step on a batch of rows.
CellResult lstm_cell_forward(const Tensor& x_t, const Tensor& h_prev,
                             const Tensor& c_prev, const GateWeights& w,
                             CellCache* cache = nullptr);

// Stacked bidirectional pass; returns (B, T, F).
Tensor bilstm_forward(const Tensor& x, const ModelParams& params,
                      ForwardCache* cache = nullptr);

// Scaled dot-product self-attention (Q, K, V all projected from hseq)
// followed by mean-over-time pooling; plain mean pooling when the config
// disables attention. Returns (B, F).
Tensor attention_pool(const Tensor& hseq, const ModelParams& params,
                      AttentionCache* cache = nullptr);

// Full regressor: x (B, T, input_dim) -> raw predictions (B, 1).
// Predictions are unclamped; inference-time clamping lives in the pipeline.
Tensor model_forward(const Tensor& x, const ModelParams& params,
                     ForwardCache* cache = nullptr);

// Exact reverse-mode gradients for every trainable group; frozen groups
// come back zero. Consumes the cache (one backward per forward).
ModelParams backward(const ModelParams& params, ForwardCache& cache,
                     const Tensor& dpred);

}  // namespace pulseox::nn
