#pragma once

#include <span>
#include <utility>

#include "pulseox/errors.hpp"

namespace pulseox::calib {

// Display clamp range shared by the traditional and learned predictors.
constexpr double kSpo2ClampLo = 70.0;
constexpr double kSpo2ClampHi = 100.0;

// Quadratic calibration curve: spo2 = c0 + c1*R + c2*R^2.
struct QuadCalib {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double operator()(double r) const { return c0 + r * (c1 + r * c2); }
};

// Ratio of normalized pulsatilities over one window. The AC magnitude of a
// channel is the standard deviation of its AC sequence; the DC magnitude is
// the mean of its DC sequence.
double compute_r_ratio(std::span<const double> red_ac,
                       std::span<const double> red_dc,
                       std::span<const double> ir_ac,
                       std::span<const double> ir_dc);

// Ordinary least squares on [1, R, R^2] against spo2. Needs at least three
// pairs with three distinct R values.
QuadCalib fit_quadratic(std::span<const std::pair<double, double>> pairs);

// Applies the curve and clamps to the display range.
double predict_traditional(const QuadCalib& calib, double r);

}  // namespace pulseox::calib
