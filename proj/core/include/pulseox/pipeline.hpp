#pragma once

#include <vector>

#include "pulseox/calib.hpp"
#include "pulseox/dsp.hpp"
#include "pulseox/eval.hpp"
#include "pulseox/model.hpp"
#include "pulseox/segmentation.hpp"

namespace pulseox::pipe {

struct PreprocessOptions {
  dsp::FilterSpec band{0.5, 12.0, 4, dsp::FilterKind::BandPass};
  double fs_target = 25.0;
};

// Band-pass at the native rate, resample to fs_target, split into AC/DC,
// and form the per-channel AC/DC ratio.
struct PreprocessResult {
  seg::PpgSession normalized;  // ratio signals at fs_target
  // Per-channel components at fs_target, kept for R-ratio computation.
  dsp::RawSignal red_ac, red_dc, ir_ac, ir_dc;
  std::size_t degenerate_red = 0;
  std::size_t degenerate_ir = 0;
};

PreprocessResult preprocess_session(const seg::PpgSession& raw,
                                    const PreprocessOptions& opts = {});

// One labeled R-ratio observation per 5 s window.
struct RWindow {
  double r = 0.0;
  double spo2 = 0.0;
  double t_end = 0.0;
};

std::vector<RWindow> r_windows(const PreprocessResult& pre, double win_s = 5.0,
                               double stride_s = 1.0);

// Fits the quadratic calibration on the pooled windows of many sessions.
calib::QuadCalib fit_calibration(std::span<const PreprocessResult> sessions);

// segment -> model -> moving_average -> clamp, against the session labels.
eval::PredictionTrace predict_model_trace(const seg::PpgSession& normalized,
                                          const nn::ModelParams& params,
                                          std::size_t ma_window = 5);

// R windows -> quadratic -> moving_average -> clamp.
eval::PredictionTrace predict_traditional_trace(const PreprocessResult& pre,
                                                const calib::QuadCalib& quad,
                                                std::size_t ma_window = 5);

}  // namespace pulseox::pipe
