#pragma once

#include <span>
#include <string>
#include <vector>

#include "pulseox/dsp.hpp"
#include "pulseox/tensor.hpp"

namespace pulseox::seg {

struct LabelPoint {
  double t;     // seconds from session start
  double spo2;  // percent
};

// A dual-channel recording with reference labels. The same struct carries
// both raw sensor traces and normalized (AC/DC ratio) traces; `normalized`
// says which one this is.
struct PpgSession {
  std::string subject_id;
  dsp::RawSignal red;
  dsp::RawSignal ir;
  std::vector<LabelPoint> labels;
  std::string device;
  bool normalized = false;
  double wavelength_red_nm = 660.0;
  double wavelength_ir_nm = 940.0;

  double duration_s() const {
    return red.fs > 0.0 ? static_cast<double>(red.samples.size()) / red.fs
                        : 0.0;
  }

  // Throws if the channel/label invariants do not hold.
  void validate() const;
};

// One model input window: (win_len x 2) matrix, columns red then ir.
struct Segment {
  Tensor window;
  double label = 0.0;
  double t_end = 0.0;
  std::string subject_id;
};

struct SegmentSet {
  std::vector<Segment> segments;
  double fs = 25.0;
  double stride_s = 1.0;
  // Windows discarded because the nearest reference label was too stale.
  std::size_t dropped = 0;
};

// Start offsets of every full window of win_len samples at the given stride.
std::vector<std::size_t> window_starts(std::size_t len, std::size_t win_len,
                                       std::size_t stride_len);

// Reference value whose timestamp is nearest to t; ties go to the earlier
// label. Labels must be sorted by time.
double label_for_time(std::span<const LabelPoint> labels, double t);

// Distance from t to the nearest label timestamp.
double nearest_label_distance(std::span<const LabelPoint> labels, double t);

constexpr double kExpectedFs = 25.0;
constexpr double kMaxLabelGapS = 10.0;

// Cuts a normalized 25 Hz session into labeled windows. Windows whose end
// time sits more than kMaxLabelGapS/2 from every label (the middle of a
// label gap longer than kMaxLabelGapS) are dropped and counted.
SegmentSet segment_session(const PpgSession& session, double win_s = 5.0,
                           double stride_s = 1.0,
                           double max_label_gap_s = kMaxLabelGapS);

}  // namespace pulseox::seg
