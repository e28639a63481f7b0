#include "pulseox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "pulseox/rng.hpp"

namespace pulseox::synth {

namespace {

// Root-selection branch for the quadratic law. Wide enough to cover
// SpO2 in [75, 100] under the default law.
constexpr double kBranchLo = 0.2;
constexpr double kBranchHi = 3.0;

constexpr double kResatTauS = 6.0;     // resaturation time constant
constexpr double kSlotRecoveryS = 12.0;  // in-slot tail left for recovery
constexpr double kSlotLeadS = 3.0;       // earliest hold start within a slot

struct Hold {
  double start_s;
  double duration_s;
  double depth;
};

double deficit_at(const Hold& h, double t) {
  if (t < h.start_s) return 0.0;
  const double tau_desat = h.duration_s / 4.0;
  if (t <= h.start_s + h.duration_s) {
    return h.depth * (1.0 - std::exp(-(t - h.start_s) / tau_desat));
  }
  const double at_end = h.depth * (1.0 - std::exp(-4.0));
  return at_end * std::exp(-(t - h.start_s - h.duration_s) / kResatTauS);
}

std::vector<Hold> schedule_holds(const SynthConfig& cfg, Rng& rng) {
  std::vector<Hold> holds;
  if (cfg.holds.count == 0) return holds;
  const double slot = cfg.duration_s / static_cast<double>(cfg.holds.count);
  const double usable = slot - kSlotLeadS - kSlotRecoveryS;
  if (usable < 5.0) {
    throw InvalidSpecError(
        "session too short for the requested breath-hold count");
  }
  for (std::size_t i = 0; i < cfg.holds.count; ++i) {
    Hold h;
    h.depth = rng.uniform(cfg.holds.depth_lo, cfg.holds.depth_hi);
    h.duration_s = std::clamp(
        rng.uniform(cfg.holds.duration_lo_s, cfg.holds.duration_hi_s), 5.0,
        usable);
    const double slack = slot - kSlotLeadS - kSlotRecoveryS - h.duration_s;
    h.start_s = static_cast<double>(i) * slot + kSlotLeadS +
                rng.uniform(0.0, std::max(0.0, slack));
    holds.push_back(h);
  }
  return holds;
}

}  // namespace

Spo2Trace generate_spo2_trace(const SynthConfig& config) {
  Rng rng(mix_seed(config.seed, 0x5702));
  const double baseline = rng.uniform(97.0, 99.0);
  const auto holds = schedule_holds(config, rng);

  Spo2Trace trace;
  const auto n = static_cast<std::size_t>(std::floor(config.duration_s)) + 1;
  trace.t.resize(n);
  trace.spo2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    double deficit = 0.0;
    for (const Hold& h : holds) deficit += deficit_at(h, t);
    trace.t[i] = t;
    trace.spo2[i] = baseline - deficit;
    if (trace.spo2[i] < 75.0 || trace.spo2[i] > 100.0) {
      throw InvalidSpecError("breath-hold schedule pushes SpO2 out of range");
    }
  }
  return trace;
}

double invert_spo2_law(const calib::QuadCalib& law, double spo2) {
  const double a = law.c2;
  const double b = law.c1;
  const double c = law.c0 - spo2;

  double roots[2];
  int n_roots = 0;
  if (std::abs(a) < 1e-12) {
    if (std::abs(b) < 1e-12) {
      throw InvalidSpecError("spo2 law is constant; cannot invert");
    }
    roots[n_roots++] = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) {
      throw InvalidSpecError("spo2 law has no real inverse at this value");
    }
    const double q =
        -0.5 * (b + std::copysign(std::sqrt(disc), b == 0.0 ? 1.0 : b));
    roots[n_roots++] = q / a;
    if (q != 0.0) roots[n_roots++] = c / q;
  }

  double picked = 0.0;
  int in_branch = 0;
  for (int i = 0; i < n_roots; ++i) {
    if (roots[i] > kBranchLo && roots[i] < kBranchHi) {
      picked = roots[i];
      ++in_branch;
    }
  }
  if (in_branch != 1) {
    throw InvalidSpecError(
        "spo2 law inverse not unique in the physiological branch");
  }
  return picked;
}

seg::PpgSession generate_session(const SynthConfig& config,
                                 SessionTruth* truth) {
  if (!(config.fs > 0.0) || !(config.duration_s > 0.0)) {
    throw InvalidSpecError("synth config needs positive fs and duration");
  }
  const Spo2Trace trace = generate_spo2_trace(config);

  Rng rng(mix_seed(config.seed, 0x5e5510));
  const double hr_mid = 0.5 * (config.hr_lo_bpm + config.hr_hi_bpm);
  const double hr_amp =
      rng.uniform(0.2, 0.5) * 0.5 * (config.hr_hi_bpm - config.hr_lo_bpm);
  const double hr_freq = rng.uniform(0.005, 0.02);
  const double hr_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double perfusion = rng.uniform(0.02, 0.05);

  struct WanderBank {
    double freq[3], phase[3], amp[3];
  };
  auto draw_wander = [&](WanderBank& w) {
    for (int j = 0; j < 3; ++j) {
      w.freq[j] = rng.uniform(0.05, 0.3);
      w.phase[j] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      w.amp[j] = config.baseline_wander_amp * rng.uniform(0.3, 1.0);
    }
  };
  WanderBank wander_red, wander_ir;
  draw_wander(wander_red);
  draw_wander(wander_ir);

  const auto n =
      static_cast<std::size_t>(std::llround(config.duration_s * config.fs));
  const double dc_level = 1.0;
  const double ac_ir = perfusion * dc_level;

  seg::PpgSession session;
  session.subject_id = config.subject_id;
  session.device = config.device;
  session.normalized = false;
  session.red.fs = config.fs;
  session.red.channel = dsp::Channel::Red;
  session.ir.fs = config.fs;
  session.ir.channel = dsp::Channel::Ir;
  session.red.samples.resize(n);
  session.ir.samples.resize(n);
  if (truth != nullptr) {
    truth->spo2_at_fs.resize(n);
    truth->r_at_fs.resize(n);
  }

  double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / config.fs;

    // Linear interpolation of the 1 Hz SpO2 trace.
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(t)),
                             trace.spo2.size() - 1);
    const auto i1 = std::min(i0 + 1, trace.spo2.size() - 1);
    const double frac = t - std::floor(t);
    const double spo2 =
        trace.spo2[i0] + (trace.spo2[i1] - trace.spo2[i0]) * frac;
    const double r = invert_spo2_law(config.spo2_law, spo2);

    const double hr =
        hr_mid + hr_amp * std::sin(2.0 * std::numbers::pi * hr_freq * t +
                                   hr_phase);
    theta += 2.0 * std::numbers::pi * hr / 60.0 / config.fs;
    const double pulse = std::sin(theta) + 0.3 * std::sin(2.0 * theta + 1.2);

    const double ac_red = r * (ac_ir / dc_level) * dc_level;
    auto wander_at = [&](const WanderBank& w) {
      double s = 0.0;
      for (int j = 0; j < 3; ++j) {
        s += w.amp[j] *
             std::sin(2.0 * std::numbers::pi * w.freq[j] * t + w.phase[j]);
      }
      return s;
    };

    session.red.samples[i] =
        config.gain_red * (dc_level + ac_red * pulse) + wander_at(wander_red) +
        config.noise_sd * rng.normal();
    session.ir.samples[i] =
        config.gain_ir * (dc_level + ac_ir * pulse) + wander_at(wander_ir) +
        config.noise_sd * rng.normal();

    if (truth != nullptr) {
      truth->spo2_at_fs[i] = spo2;
      truth->r_at_fs[i] = r;
    }
  }

  session.labels.reserve(trace.t.size());
  const double duration = session.duration_s();
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    if (trace.t[i] <= duration) {
      session.labels.push_back({trace.t[i], trace.spo2[i]});
    }
  }
  session.validate();
  return session;
}

std::vector<seg::PpgSession> generate_corpus(
    const SynthConfig& base, std::size_t subjects,
    std::size_t sessions_per_subject) {
  if (subjects == 0 || sessions_per_subject == 0) {
    throw InvalidSpecError("corpus needs at least one subject and session");
  }
  std::vector<seg::PpgSession> out;
  out.reserve(subjects * sessions_per_subject);
  for (std::size_t s = 1; s <= subjects; ++s) {
    for (std::size_t r = 1; r <= sessions_per_subject; ++r) {
      SynthConfig cfg = base;
      cfg.seed = mix_seed(base.seed, s * 1000 + r);
      char sid[16];
      std::snprintf(sid, sizeof(sid), "s%02zu", s);
      cfg.subject_id = sid;
      out.push_back(generate_session(cfg));
    }
  }
  return out;
}

}  // namespace pulseox::synth
