#include "pulseox/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "pulseox/training.hpp"

namespace pulseox::pipe {

namespace {

double clamp_spo2(double v) {
  return std::clamp(v, calib::kSpo2ClampLo, calib::kSpo2ClampHi);
}

}  // namespace

PreprocessResult preprocess_session(const seg::PpgSession& raw,
                                    const PreprocessOptions& opts) {
  raw.validate();
  if (raw.normalized) {
    throw InvalidSpecError("preprocess_session expects a raw session");
  }

  PreprocessResult out;
  // The 0.5-12 Hz band-pass and the 0.5 Hz low-pass split each channel into
  // its pulsatile and baseline parts at the native rate; both parts are then
  // band-limited well below the target Nyquist, so each can be resampled
  // before forming the ratio.
  auto process = [&](const dsp::RawSignal& x, dsp::RawSignal& ac,
                     dsp::RawSignal& dc, std::size_t& degenerate)
      -> dsp::NormalizedSignal {
    const dsp::AcDc parts = dsp::decompose_ac_dc(x, opts.band);
    ac = parts.ac;
    dc = parts.dc;
    if (std::abs(x.fs - opts.fs_target) > 1e-9) {
      ac = dsp::fourier_resample(ac, opts.fs_target);
      dc = dsp::fourier_resample(dc, opts.fs_target);
    }
    dsp::RatioResult ratio = dsp::normalize_ratio(ac, dc);
    degenerate = ratio.degenerate_count;
    return std::move(ratio.signal);
  };

  const dsp::NormalizedSignal red_norm =
      process(raw.red, out.red_ac, out.red_dc, out.degenerate_red);
  const dsp::NormalizedSignal ir_norm =
      process(raw.ir, out.ir_ac, out.ir_dc, out.degenerate_ir);

  out.normalized = raw;
  out.normalized.red.samples = red_norm.samples;
  out.normalized.red.fs = red_norm.fs;
  out.normalized.ir.samples = ir_norm.samples;
  out.normalized.ir.fs = ir_norm.fs;
  out.normalized.normalized = true;
  return out;
}

std::vector<RWindow> r_windows(const PreprocessResult& pre, double win_s,
                               double stride_s) {
  const double fs = pre.red_ac.fs;
  const auto win_len = static_cast<std::size_t>(std::llround(win_s * fs));
  const auto stride_len =
      static_cast<std::size_t>(std::llround(stride_s * fs));
  const auto starts =
      seg::window_starts(pre.red_ac.samples.size(), win_len, stride_len);

  std::vector<RWindow> out;
  for (std::size_t start : starts) {
    const double t_end = static_cast<double>(start + win_len) / fs;
    if (seg::nearest_label_distance(pre.normalized.labels, t_end) >
        seg::kMaxLabelGapS / 2.0) {
      continue;  // same stale-label rule as segmentation
    }
    auto window = [&](const dsp::RawSignal& s) {
      return std::span<const double>(s.samples).subspan(start, win_len);
    };
    RWindow w;
    w.r = calib::compute_r_ratio(window(pre.red_ac), window(pre.red_dc),
                                 window(pre.ir_ac), window(pre.ir_dc));
    w.spo2 = seg::label_for_time(pre.normalized.labels, t_end);
    w.t_end = t_end;
    out.push_back(w);
  }
  return out;
}

calib::QuadCalib fit_calibration(std::span<const PreprocessResult> sessions) {
  std::vector<std::pair<double, double>> pairs;
  for (const PreprocessResult& pre : sessions) {
    for (const RWindow& w : r_windows(pre)) {
      pairs.emplace_back(w.r, w.spo2);
    }
  }
  return calib::fit_quadratic(pairs);
}

eval::PredictionTrace predict_model_trace(const seg::PpgSession& normalized,
                                          const nn::ModelParams& params,
                                          std::size_t ma_window) {
  const seg::SegmentSet set = seg::segment_session(normalized);
  if (set.segments.empty()) {
    throw InsufficientDataError("session too short to predict");
  }
  const seg::SegmentSet sets[] = {set};
  const train::Dataset data = train::Dataset::from_segments(sets);
  const std::vector<double> raw = train::predict_raw(params, data);
  const std::vector<double> smooth = dsp::moving_average(raw, ma_window);

  eval::PredictionTrace trace;
  for (std::size_t i = 0; i < set.segments.size(); ++i) {
    trace.t.push_back(set.segments[i].t_end);
    trace.y_ref.push_back(set.segments[i].label);
    trace.y_pred.push_back(clamp_spo2(smooth[i]));
  }
  return trace;
}

eval::PredictionTrace predict_traditional_trace(const PreprocessResult& pre,
                                                const calib::QuadCalib& quad,
                                                std::size_t ma_window) {
  const auto windows = r_windows(pre);
  if (windows.empty()) {
    throw InsufficientDataError("session too short to predict");
  }
  std::vector<double> preds;
  preds.reserve(windows.size());
  for (const RWindow& w : windows) {
    preds.push_back(calib::predict_traditional(quad, w.r));
  }
  const std::vector<double> smooth = dsp::moving_average(preds, ma_window);

  eval::PredictionTrace trace;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    trace.t.push_back(windows[i].t_end);
    trace.y_ref.push_back(windows[i].spo2);
    trace.y_pred.push_back(clamp_spo2(smooth[i]));
  }
  return trace;
}

}  // namespace pulseox::pipe
