#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pulseox/calib.hpp"
#include "pulseox/segmentation.hpp"

namespace pulseox::synth {

struct BreathHoldSpec {
  std::size_t count = 3;
  double depth_lo = 4.0;   // percent SpO2 drop
  double depth_hi = 12.0;
  double duration_lo_s = 20.0;
  double duration_hi_s = 40.0;
};

struct SynthConfig {
  double fs = 86.0;
  double duration_s = 180.0;
  double hr_lo_bpm = 60.0;
  double hr_hi_bpm = 90.0;
  // Ground-truth law mapping R to SpO2, monotone over the working branch.
  calib::QuadCalib spo2_law{104.0, -17.0, -2.0};
  BreathHoldSpec holds;
  double noise_sd = 0.01;            // additive sensor noise, post-gain
  double baseline_wander_amp = 0.02;  // 0.05-0.3 Hz drift amplitude
  double gain_red = 1.0;
  double gain_ir = 1.0;
  std::uint64_t seed = 0;
  std::string subject_id = "s00";
  std::string device = "synth";
};

struct Spo2Trace {
  std::vector<double> t;     // seconds, 1 Hz
  std::vector<double> spo2;  // percent
};

// Ground-truth SpO2 at the fs grid and the per-sample R it implies.
struct SessionTruth {
  std::vector<double> spo2_at_fs;
  std::vector<double> r_at_fs;
};

// Baseline 97-99% with an exponential desaturation per breath-hold and a
// fast exponential resaturation afterwards. Deterministic under seed.
Spo2Trace generate_spo2_trace(const SynthConfig& config);

// R such that spo2_law(R) == spo2, restricted to the physiological branch
// R in (0.3, 3). Throws InvalidSpecError when no such root exists.
double invert_spo2_law(const calib::QuadCalib& law, double spo2);

// Dual-channel PPG with the R-ratio law built in: the red pulsatile
// amplitude is R(t) times the normalized infrared pulsatility. Gains,
// baseline wander and white noise are applied afterwards; labels at 1 Hz.
seg::PpgSession generate_session(const SynthConfig& config,
                                 SessionTruth* truth = nullptr);

// A corpus of subjects x sessions with per-session derived seeds.
std::vector<seg::PpgSession> generate_corpus(const SynthConfig& base,
                                             std::size_t subjects,
                                             std::size_t sessions_per_subject);

}  // namespace pulseox::synth
