#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pulseox/errors.hpp"

namespace pulseox::dsp {

enum class Channel { Red, Ir };

// A single-channel sample sequence in sensor units.
struct RawSignal {
  std::vector<double> samples;
  double fs = 0.0;
  Channel channel = Channel::Red;
};

enum class FilterKind { BandPass, LowPass };

// Band edges in Hz. For LowPass only high_hz (the corner) is used.
// `order` is the analog prototype order; a band-pass of order N realizes
// 2N poles (N biquad sections).
struct FilterSpec {
  double low_hz = 0.5;
  double high_hz = 12.0;
  int order = 4;
  FilterKind kind = FilterKind::BandPass;
};

// One second-order section, normalized so a0 == 1.
struct Biquad {
  double b0, b1, b2;
  double a1, a2;
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
  int n_poles = 0;

  // Edge padding used by filtfilt: three time constants' worth of samples.
  int pad_len() const { return 3 * n_poles; }
};

// Largest pole magnitude across all sections; < 1 means stable.
double max_pole_magnitude(const FilterCoefficients& coeffs);

// Butterworth design via analog prototype, band transform and bilinear
// transform with frequency pre-warping. Gain is normalized to 1 at the
// geometric band center (band-pass) or at DC (low-pass).
FilterCoefficients design_bandpass(const FilterSpec& spec, double fs);
FilterCoefficients design_lowpass(double cutoff_hz, int order, double fs);
FilterCoefficients design_filter(const FilterSpec& spec, double fs);

// Single forward pass through the section cascade (direct form II
// transposed), zero initial state.
std::vector<double> sosfilt(const FilterCoefficients& coeffs,
                            std::span<const double> x);

// Zero-phase forward-backward filtering with odd-reflection edge padding of
// length pad_len() and per-section steady-state initial conditions.
RawSignal filtfilt(const FilterCoefficients& coeffs, const RawSignal& x);

struct AcDc {
  RawSignal ac;
  RawSignal dc;
};

// Splits x into pulsatile (band-pass over `band`) and baseline (low-pass at
// band.low_hz, same order) components.
AcDc decompose_ac_dc(const RawSignal& x, const FilterSpec& band);

// Dimensionless AC/DC ratio sequence.
struct NormalizedSignal {
  std::vector<double> samples;
  double fs = 0.0;
};

struct RatioResult {
  NormalizedSignal signal;
  // Samples where |dc| fell below the guard threshold; zeroed, not errors.
  std::size_t degenerate_count = 0;
};

RatioResult normalize_ratio(const RawSignal& ac, const RawSignal& dc);

// FFT resampling: spectrum truncation / zero-padding with the usual
// Nyquist-bin split convention. Output length = round(len * fs_out / fs_in).
RawSignal fourier_resample(const RawSignal& x, double fs_out);

// Causal trailing mean: out[i] = mean(y[max(0, i-window+1) ... i]).
std::vector<double> moving_average(std::span<const double> y,
                                   std::size_t window = 5);

}  // namespace pulseox::dsp
