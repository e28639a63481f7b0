#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "commands.hpp"
#include "pulseox/rng.hpp"
#include "pulseox/session_io.hpp"
#include "pulseox/synth.hpp"
#include "util.hpp"

namespace pulseox::cli {

namespace {

struct CorpusSpec {
  std::size_t subjects = 9;
  std::size_t sessions_per_subject = 3;
  synth::SynthConfig base;
};

CorpusSpec parse_corpus_spec(const std::string& path) {
  CorpusSpec spec;
  if (path.empty()) return spec;

  std::ifstream in(path);
  if (!in) throw Error("cannot open synth config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad JSON: " + e.what());
  }

  auto& b = spec.base;
  if (j.contains("subjects")) spec.subjects = j.at("subjects").get<std::size_t>();
  if (j.contains("sessions_per_subject")) {
    spec.sessions_per_subject = j.at("sessions_per_subject").get<std::size_t>();
  }
  if (j.contains("fs")) b.fs = j.at("fs").get<double>();
  if (j.contains("duration_s")) b.duration_s = j.at("duration_s").get<double>();
  if (j.contains("hr_bpm")) {
    b.hr_lo_bpm = j.at("hr_bpm").at(0).get<double>();
    b.hr_hi_bpm = j.at("hr_bpm").at(1).get<double>();
  }
  if (j.contains("spo2_law")) {
    b.spo2_law.c0 = j.at("spo2_law").at(0).get<double>();
    b.spo2_law.c1 = j.at("spo2_law").at(1).get<double>();
    b.spo2_law.c2 = j.at("spo2_law").at(2).get<double>();
  }
  if (j.contains("holds")) {
    const auto& h = j.at("holds");
    if (h.contains("count")) b.holds.count = h.at("count").get<std::size_t>();
    if (h.contains("depth")) {
      b.holds.depth_lo = h.at("depth").at(0).get<double>();
      b.holds.depth_hi = h.at("depth").at(1).get<double>();
    }
    if (h.contains("duration_s")) {
      b.holds.duration_lo_s = h.at("duration_s").at(0).get<double>();
      b.holds.duration_hi_s = h.at("duration_s").at(1).get<double>();
    }
  }
  if (j.contains("noise_sd")) b.noise_sd = j.at("noise_sd").get<double>();
  if (j.contains("baseline_wander_amp")) {
    b.baseline_wander_amp = j.at("baseline_wander_amp").get<double>();
  }
  if (j.contains("gain_red")) b.gain_red = j.at("gain_red").get<double>();
  if (j.contains("gain_ir")) b.gain_ir = j.at("gain_ir").get<double>();
  if (j.contains("seed")) b.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("device")) b.device = j.at("device").get<std::string>();
  return spec;
}

}  // namespace

int run_synth(const SynthOptions& opts) {
  CorpusSpec spec = parse_corpus_spec(opts.config_path);
  if (opts.seed.has_value()) spec.base.seed = *opts.seed;
  if (spec.subjects == 0 || spec.sessions_per_subject == 0) {
    throw InvalidSpecError("synth: subjects and sessions must be >= 1");
  }

  ensure_out_dir(opts.out_dir);
  std::size_t written = 0;
  for (std::size_t s = 1; s <= spec.subjects; ++s) {
    for (std::size_t r = 1; r <= spec.sessions_per_subject; ++r) {
      synth::SynthConfig cfg = spec.base;
      cfg.seed = mix_seed(spec.base.seed, s * 1000 + r);
      char name[48];
      std::snprintf(name, sizeof(name), "s%02zu_r%zu.session", s, r);
      char sid[16];
      std::snprintf(sid, sizeof(sid), "s%02zu", s);
      cfg.subject_id = sid;
      io::write_session(std::filesystem::path(opts.out_dir) / name,
                        synth::generate_session(cfg));
      ++written;
    }
  }
  std::fprintf(stderr, "synth: wrote %zu session files to %s\n", written,
               opts.out_dir.c_str());
  return 0;
}

}  // namespace pulseox::cli
