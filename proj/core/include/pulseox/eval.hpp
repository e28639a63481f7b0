#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulseox/errors.hpp"

namespace pulseox::eval {

// Aligned reference/prediction pair sampled at 1 Hz (window end times).
struct PredictionTrace {
  std::vector<double> t;
  std::vector<double> y_ref;
  std::vector<double> y_pred;

  void validate() const;
};

// Index range [start_idx, end_idx] (inclusive) covered by one flagged
// total-variation window. end_idx = start_idx + window + 1, since the sum
// over j = i..i+window touches sample i+window+1.
struct InstantZone {
  std::size_t start_idx = 0;
  std::size_t end_idx = 0;
};

struct EvalReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mae_ins;
  std::optional<double> rmse_ins;
  std::size_t n_points = 0;
  std::size_t n_instant_points = 0;
  std::vector<InstantZone> zones;
};

double mae(std::span<const double> y_ref, std::span<const double> y_pred);
double rmse(std::span<const double> y_ref, std::span<const double> y_pred);

// TV_i = sum of |y[j+1] - y[j]| for j = i..i+window (window+1 terms).
double total_variation(std::span<const double> y, std::size_t i,
                       std::size_t window = 10);

// Every start index whose TV meets the threshold (>=, boundary included)
// yields a zone. Traces shorter than window + 2 points produce no zones.
std::vector<InstantZone> detect_instant_zones(std::span<const double> y_ref,
                                              double threshold = 3.0,
                                              std::size_t window = 10);

// Point membership: covered by at least one zone.
std::vector<bool> instant_coverage(std::size_t len,
                                   std::span<const InstantZone> zones);

EvalReport evaluate(const PredictionTrace& trace, double threshold = 3.0,
                    std::size_t window = 10);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// Annotated per-trace rows (t, y_ref, y_pred, is_instant) for plotting.
std::string trace_to_csv(const PredictionTrace& trace,
                         std::span<const InstantZone> zones);

}  // namespace pulseox::eval
