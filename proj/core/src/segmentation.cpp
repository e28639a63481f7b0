#include "pulseox/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pulseox::seg {

void PpgSession::validate() const {
  if (red.fs != ir.fs) {
    throw ShapeError("session channels have different sampling rates");
  }
  if (!(red.fs > 0.0)) throw ShapeError("session sampling rate must be > 0");
  if (red.samples.size() != ir.samples.size()) {
    throw ShapeError("session channels have different lengths");
  }
  const double duration = duration_s();
  double prev_t = -std::numeric_limits<double>::infinity();
  for (const LabelPoint& l : labels) {
    if (l.t < prev_t) throw Error("label times must be non-decreasing");
    if (l.t < 0.0 || l.t > duration + 1e-9) {
      throw Error("label time outside signal duration");
    }
    if (l.spo2 < 50.0 || l.spo2 > 100.0) {
      throw Error("label spo2 outside [50, 100]");
    }
    prev_t = l.t;
  }
}

std::vector<std::size_t> window_starts(std::size_t len, std::size_t win_len,
                                       std::size_t stride_len) {
  std::vector<std::size_t> starts;
  if (win_len == 0 || stride_len == 0 || len < win_len) return starts;
  for (std::size_t k = 0; k * stride_len + win_len <= len; ++k) {
    starts.push_back(k * stride_len);
  }
  return starts;
}

double label_for_time(std::span<const LabelPoint> labels, double t) {
  if (labels.empty()) throw MissingLabelError("no reference labels");
  // First label at or after t.
  auto it = std::lower_bound(
      labels.begin(), labels.end(), t,
      [](const LabelPoint& l, double value) { return l.t < value; });
  if (it == labels.begin()) return it->spo2;
  if (it == labels.end()) return std::prev(it)->spo2;
  const LabelPoint& later = *it;
  const LabelPoint& earlier = *std::prev(it);
  // Ties go to the earlier label.
  return (t - earlier.t) <= (later.t - t) ? earlier.spo2 : later.spo2;
}

double nearest_label_distance(std::span<const LabelPoint> labels, double t) {
  if (labels.empty()) throw MissingLabelError("no reference labels");
  auto it = std::lower_bound(
      labels.begin(), labels.end(), t,
      [](const LabelPoint& l, double value) { return l.t < value; });
  double best = std::numeric_limits<double>::infinity();
  if (it != labels.end()) best = std::min(best, it->t - t);
  if (it != labels.begin()) best = std::min(best, t - std::prev(it)->t);
  return best;
}

SegmentSet segment_session(const PpgSession& session, double win_s,
                           double stride_s, double max_label_gap_s) {
  session.validate();
  if (!session.normalized) {
    throw Error("segment_session expects a normalized session");
  }
  if (std::abs(session.red.fs - kExpectedFs) > 1e-6) {
    throw ShapeError("segment_session expects " +
                     std::to_string(kExpectedFs) + " Hz signals");
  }

  const double fs = session.red.fs;
  const auto win_len = static_cast<std::size_t>(std::llround(win_s * fs));
  const auto stride_len =
      static_cast<std::size_t>(std::llround(stride_s * fs));
  if (win_len == 0 || stride_len == 0) {
    throw InvalidSpecError("window and stride must be positive");
  }

  SegmentSet out;
  out.fs = fs;
  out.stride_s = stride_s;

  const auto starts = window_starts(session.red.samples.size(), win_len,
                                    stride_len);
  if (starts.empty()) return out;  // shorter than one window: empty, not error

  const double stale_limit = max_label_gap_s / 2.0;
  for (std::size_t start : starts) {
    const double t_end = static_cast<double>(start + win_len) / fs;
    if (nearest_label_distance(session.labels, t_end) > stale_limit) {
      ++out.dropped;
      continue;
    }
    Segment s;
    s.window = Tensor({win_len, 2});
    for (std::size_t i = 0; i < win_len; ++i) {
      s.window(i, 0) = session.red.samples[start + i];
      s.window(i, 1) = session.ir.samples[start + i];
    }
    s.label = label_for_time(session.labels, t_end);
    s.t_end = t_end;
    s.subject_id = session.subject_id;
    out.segments.push_back(std::move(s));
  }
  return out;
}

}  // namespace pulseox::seg
