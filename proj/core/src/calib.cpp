#include "pulseox/calib.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pulseox::calib {

namespace {

constexpr double kDegenerateEps = 1e-12;

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

double compute_r_ratio(std::span<const double> red_ac,
                       std::span<const double> red_dc,
                       std::span<const double> ir_ac,
                       std::span<const double> ir_dc) {
  if (red_ac.empty() || red_dc.empty() || ir_ac.empty() || ir_dc.empty()) {
    throw ShapeError("compute_r_ratio: empty window");
  }
  const double red_dc_mag = mean(red_dc);
  const double ir_dc_mag = mean(ir_dc);
  const double ir_ac_mag = stddev(ir_ac);
  if (std::abs(red_dc_mag) < kDegenerateEps ||
      std::abs(ir_dc_mag) < kDegenerateEps ||
      std::abs(ir_ac_mag) < kDegenerateEps) {
    throw NumericError("compute_r_ratio: degenerate window");
  }
  const double r =
      (stddev(red_ac) / red_dc_mag) / (ir_ac_mag / ir_dc_mag);
  if (!std::isfinite(r)) {
    throw NumericError("compute_r_ratio: non-finite ratio");
  }
  return r;
}

QuadCalib fit_quadratic(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 3) {
    throw NumericError("fit_quadratic: need at least 3 pairs");
  }
  std::set<double> distinct;
  for (const auto& [r, spo2] : pairs) distinct.insert(r);
  if (distinct.size() < 3) {
    throw NumericError("fit_quadratic: need at least 3 distinct R values");
  }

  // Normal equations for the Vandermonde system [1, R, R^2].
  long double ata[3][3] = {};
  long double atb[3] = {};
  for (const auto& [r, spo2] : pairs) {
    const long double row[3] = {1.0L, r, static_cast<long double>(r) * r};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) ata[i][j] += row[i] * row[j];
      atb[i] += row[i] * spo2;
    }
  }

  long double scale = 0.0L;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      scale = std::max(scale, std::abs(ata[i][j]));
    }
  }

  // Gaussian elimination with partial pivoting.
  int perm[3] = {0, 1, 2};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(static_cast<double>(ata[perm[r]][col])) >
          std::abs(static_cast<double>(ata[perm[pivot]][col]))) {
        pivot = r;
      }
    }
    std::swap(perm[col], perm[pivot]);
    const long double p = ata[perm[col]][col];
    if (std::abs(static_cast<double>(p)) < 1e-12 * static_cast<double>(scale)) {
      throw NumericError("fit_quadratic: rank-deficient system");
    }
    for (int r = col + 1; r < 3; ++r) {
      const long double f = ata[perm[r]][col] / p;
      for (int c = col; c < 3; ++c) ata[perm[r]][c] -= f * ata[perm[col]][c];
      atb[perm[r]] -= f * atb[perm[col]];
    }
  }
  long double sol[3];
  for (int i = 2; i >= 0; --i) {
    long double s = atb[perm[i]];
    for (int j = i + 1; j < 3; ++j) s -= ata[perm[i]][j] * sol[j];
    sol[i] = s / ata[perm[i]][i];
  }

  QuadCalib out{static_cast<double>(sol[0]), static_cast<double>(sol[1]),
                static_cast<double>(sol[2])};
  if (!std::isfinite(out.c0) || !std::isfinite(out.c1) ||
      !std::isfinite(out.c2)) {
    throw NumericError("fit_quadratic: non-finite coefficients");
  }
  return out;
}

double predict_traditional(const QuadCalib& calib, double r) {
  return std::clamp(calib(r), kSpo2ClampLo, kSpo2ClampHi);
}

}  // namespace pulseox::calib
